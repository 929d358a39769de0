#include "wspec/field.hpp"

#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

namespace wspec {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double param(const nlohmann::json& params, const char* name, std::size_t position, std::optional<double> fallback = {}) {
  if (params.is_object() && params.contains(name)) return params.at(name).get<double>();
  if (params.is_array() && position < params.size()) return params.at(position).get<double>();
  if (fallback) return *fallback;
  throw std::invalid_argument(std::string("missing field parameter '") + name + "'");
}

}  // namespace

ScalarField ScalarField::constant(double c, int dimension) {
  ScalarField f;
  f.kind_ = Kind::constant;
  f.family_ = Family::constant;
  f.dim_ = dimension;
  f.params_ = {c};
  return f;
}

ScalarField ScalarField::linear(double a, double b, int dimension) {
  ScalarField f;
  f.kind_ = Kind::builtin;
  f.family_ = Family::linear;
  f.dim_ = dimension;
  f.params_ = {a, b};
  return f;
}

ScalarField ScalarField::radial_quadratic(double c, int dimension, std::array<double, 2> center) {
  ScalarField f;
  f.kind_ = Kind::builtin;
  f.family_ = Family::radial_quadratic;
  f.dim_ = dimension;
  f.params_ = {c};
  f.center_ = {center[0], center[1]};
  return f;
}

ScalarField ScalarField::gaussian_well(double amplitude, double sigma, std::vector<double> center) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_well: sigma must be positive");
  if (center.size() != 2 && center.size() != 3) throw std::invalid_argument("gaussian_well: center must have 2 or 3 components");
  ScalarField f;
  f.kind_ = Kind::builtin;
  f.family_ = Family::gaussian_well;
  f.dim_ = static_cast<int>(center.size());
  f.params_ = {amplitude, sigma};
  f.center_ = std::move(center);
  return f;
}

ScalarField ScalarField::expression(const std::string& source, int dimension) {
  ScalarField f;
  f.kind_ = Kind::expression;
  f.dim_ = dimension;
  f.source_ = source;
  f.ast_ = parse_expression(source, dimension);
  for (int i = 0; i < dimension; ++i) f.grad_ast_.push_back(differentiate(f.ast_, i));
  return f;
}

ScalarField ScalarField::from_json(const nlohmann::json& spec, int dimension) {
  if (spec.is_number()) return constant(spec.get<double>(), dimension);
  if (spec.is_string()) return from_string(spec.get<std::string>(), dimension);
  if (!spec.is_object()) throw std::invalid_argument("field spec must be an object, string or number");
  if (spec.contains("expr")) return expression(spec.at("expr").get<std::string>(), dimension);
  if (!spec.contains("builtin")) throw std::invalid_argument("field spec needs 'builtin' or 'expr'");
  const std::string name = spec.at("builtin").get<std::string>();
  const nlohmann::json params = spec.value("params", nlohmann::json::object());
  auto center_of = [&](std::size_t position, std::size_t n) {
    std::vector<double> c(n, 0.0);
    if (params.is_object() && params.contains("center")) {
      c = params.at("center").get<std::vector<double>>();
    } else if (params.is_array() && params.size() > position) {
      c.assign(params.begin() + static_cast<std::ptrdiff_t>(position), params.end());
    }
    if (c.size() != n) throw std::invalid_argument(name + ": center must have " + std::to_string(n) + " components");
    return c;
  };
  if (name == "constant") return constant(param(params, "c", 0), dimension);
  if (name == "linear") return linear(param(params, "a", 0), param(params, "b", 1), dimension);
  if (name == "radial_quadratic") {
    const auto c = center_of(1, 2);
    return radial_quadratic(param(params, "c", 0), dimension, {c[0], c[1]});
  }
  if (name == "gaussian_well") {
    return gaussian_well(param(params, "A", 0), param(params, "sigma", 1), center_of(2, static_cast<std::size_t>(dimension)));
  }
  throw std::invalid_argument("unknown builtin field '" + name + "'");
}

ScalarField ScalarField::from_string(const std::string& raw, int dimension) {
  const auto b = raw.find_first_not_of(" \t\n");
  const std::string text = b == std::string::npos ? std::string() : raw.substr(b);
  if (!text.empty() && text.front() == '{') return from_json(nlohmann::json::parse(text), dimension);
  for (const char* name : {"constant", "linear", "radial_quadratic", "gaussian_well"}) {
    const std::string n(name);
    if (text.rfind(n + "(", 0) != 0) continue;
    const auto close = text.rfind(')');
    if (close == std::string::npos) throw ParseError("missing ')'", text.size());
    nlohmann::json params = nlohmann::json::array();
    std::stringstream ss(text.substr(n.size() + 1, close - n.size() - 1));
    std::string item;
    while (std::getline(ss, item, ',')) params.push_back(evaluate(parse_expression(item, 1), std::span<const double>()));
    return from_json({{"builtin", n}, {"params", params}}, dimension);
  }
  return expression(text, dimension);
}

nlohmann::json ScalarField::to_json() const {
  nlohmann::json j;
  switch (kind_) {
    case Kind::constant:
      j = {{"builtin", "constant"}, {"params", {{"c", params_[0] + offset_}}}};
      return j;
    case Kind::expression:
      j = {{"expr", offset_ == 0.0 ? source_ : "(" + source_ + ")+" + fmt(offset_)}};
      return j;
    case Kind::builtin:
      break;
  }
  switch (family_) {
    case Family::linear:
      j = {{"builtin", "linear"}, {"params", {{"a", params_[0]}, {"b", params_[1]}}}};
      break;
    case Family::radial_quadratic:
      j = {{"builtin", "radial_quadratic"}, {"params", {{"c", params_[0]}, {"center", center_}}}};
      break;
    case Family::gaussian_well:
      j = {{"builtin", "gaussian_well"}, {"params", {{"A", params_[0]}, {"sigma", params_[1]}, {"center", center_}}}};
      break;
    case Family::constant:
      break;
  }
  if (offset_ != 0.0) j["offset"] = offset_;
  return j;
}

std::string ScalarField::describe() const {
  std::string s;
  switch (kind_) {
    case Kind::constant:
      return "constant(" + fmt(params_[0] + offset_) + ")";
    case Kind::expression:
      s = source_;
      break;
    case Kind::builtin:
      switch (family_) {
        case Family::linear:
          s = "linear(" + fmt(params_[0]) + "," + fmt(params_[1]) + ")";
          break;
        case Family::radial_quadratic:
          s = "radial_quadratic(" + fmt(params_[0]) + ", center=[" + fmt(center_[0]) + "," + fmt(center_[1]) + "])";
          break;
        case Family::gaussian_well: {
          s = "gaussian_well(" + fmt(params_[0]) + "," + fmt(params_[1]) + ", center=[";
          for (std::size_t i = 0; i < center_.size(); ++i) s += (i ? "," : "") + fmt(center_[i]);
          s += "])";
          break;
        }
        case Family::constant:
          break;
      }
  }
  if (offset_ != 0.0) s += " + " + fmt(offset_);
  return s;
}

void ScalarField::check_point(std::span<const double> point) const {
  if (point.size() != static_cast<std::size_t>(dim_)) {
    throw std::invalid_argument("point has " + std::to_string(point.size()) + " coordinates, field expects " + std::to_string(dim_));
  }
}

double ScalarField::eval(std::span<const double> p) const {
  check_point(p);
  double v = 0.0;
  switch (kind_) {
    case Kind::constant:
      v = params_[0];
      break;
    case Kind::expression:
      v = evaluate(ast_, p);
      break;
    case Kind::builtin:
      switch (family_) {
        case Family::linear:
          v = params_[0] * p[0] + params_[1] * p[1];
          break;
        case Family::radial_quadratic: {
          const double dx = p[0] - center_[0], dy = p[1] - center_[1];
          v = params_[0] * (dx * dx + dy * dy) / 2.0;
          break;
        }
        case Family::gaussian_well: {
          double r2 = 0.0;
          for (std::size_t i = 0; i < p.size(); ++i) r2 += (p[i] - center_[i]) * (p[i] - center_[i]);
          v = -params_[0] * std::exp(-r2 / (params_[1] * params_[1]));
          break;
        }
        case Family::constant:
          v = params_[0];
          break;
      }
  }
  return v + offset_;
}

std::vector<double> ScalarField::grad(std::span<const double> p) const {
  check_point(p);
  std::vector<double> g(p.size(), 0.0);
  switch (kind_) {
    case Kind::constant:
      break;
    case Kind::expression:
      for (std::size_t i = 0; i < p.size(); ++i) g[i] = evaluate(grad_ast_[i], p);
      break;
    case Kind::builtin:
      switch (family_) {
        case Family::linear:
          g[0] = params_[0];
          g[1] = params_[1];
          break;
        case Family::radial_quadratic:
          g[0] = params_[0] * (p[0] - center_[0]);
          g[1] = params_[0] * (p[1] - center_[1]);
          break;
        case Family::gaussian_well: {
          double r2 = 0.0;
          for (std::size_t i = 0; i < p.size(); ++i) r2 += (p[i] - center_[i]) * (p[i] - center_[i]);
          const double s2 = params_[1] * params_[1];
          const double w = params_[0] * std::exp(-r2 / s2) * 2.0 / s2;
          for (std::size_t i = 0; i < p.size(); ++i) g[i] = w * (p[i] - center_[i]);
          break;
        }
        case Family::constant:
          break;
      }
  }
  return g;
}

ScalarField ScalarField::shifted(double c) const {
  ScalarField f = *this;
  f.offset_ += c;
  return f;
}

}  // namespace wspec
