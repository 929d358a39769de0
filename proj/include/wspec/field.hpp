#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "wspec/expr.hpp"

namespace wspec {

/// Scalar function on ambient coordinates, used for the weight phi and the
/// potential h. Gradients are exact: analytic for the built-in families and
/// symbolic for parsed expressions.
class ScalarField {
public:
  enum class Kind { constant, builtin, expression };
  enum class Family { constant, linear, radial_quadratic, gaussian_well };

  static ScalarField constant(double c, int dimension = 2);
  /// a*x + b*y
  static ScalarField linear(double a, double b, int dimension = 2);
  /// c * |(x,y) - center|^2 / 2; only the x and y components enter.
  static ScalarField radial_quadratic(double c, int dimension = 2, std::array<double, 2> center = {0.0, 0.0});
  /// -A * exp(-|p - center|^2 / sigma^2)
  static ScalarField gaussian_well(double amplitude, double sigma, std::vector<double> center);
  static ScalarField expression(const std::string& source, int dimension);

  /// Field spec as used in config files: {"builtin": name, "params": {...}} or
  /// {"expr": "..."}.
  static ScalarField from_json(const nlohmann::json& spec, int dimension);
  /// Accepts a JSON spec, a builtin call such as "radial_quadratic(1)", or an
  /// expression.
  static ScalarField from_string(const std::string& text, int dimension);
  nlohmann::json to_json() const;
  /// Human-readable source, recorded in provenance.
  std::string describe() const;

  Kind kind() const { return kind_; }
  int dimension() const { return dim_; }
  bool is_constant() const { return kind_ == Kind::constant || (kind_ == Kind::builtin && family_ == Family::constant); }

  double eval(std::span<const double> point) const;
  std::vector<double> grad(std::span<const double> point) const;

  /// Evaluates at a mesh vertex position, using its first dimension() coordinates.
  double eval(const Eigen::Vector3d& p) const { return eval(std::span<const double>(p.data(), static_cast<std::size_t>(dim_))); }

  /// Same field with a constant added.
  ScalarField shifted(double c) const;

private:
  Kind kind_ = Kind::constant;
  Family family_ = Family::constant;
  int dim_ = 2;
  std::vector<double> params_;
  std::vector<double> center_;
  double offset_ = 0.0;
  std::string source_;
  Expr ast_;
  std::vector<Expr> grad_ast_;

  void check_point(std::span<const double> point) const;
};

}  // namespace wspec
