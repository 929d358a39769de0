#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "wspec/assembly.hpp"
#include "wspec/verify.hpp"

namespace wspec {

/// Invalid configuration. `field` is a dotted path such as "instance[1].h";
/// `line` is the 1-based source line when known, else 0.
class ConfigError : public std::runtime_error {
public:
  ConfigError(const std::string& message, std::string field, int line);
  const std::string& field() const { return field_; }
  int line() const { return line_; }

private:
  std::string field_;
  int line_;
};

struct InstanceConfig {
  std::string name;
  std::string shape;      ///< Shape::parse text; empty when mesh_file is set
  std::string mesh_file;  ///< saved mesh to load instead of generating
  double h = 0.05;        ///< target mean edge length for generated meshes
  int refinements = 0;    ///< uniform refinements applied after generation/loading
  ProblemKind kind = ProblemKind::dirichlet;
  int k = 6;
  nlohmann::json phi = 0.0;        ///< field spec: number, string or {"builtin"/"expr"}
  nlohmann::json potential;        ///< null when absent
  std::optional<CrossingProbe> probe;
};

struct SweepAxis {
  std::string key;  ///< "h", "refinements", "phi", "potential" or "params.<name>"
  std::vector<nlohmann::json> values;
};

struct RunConfig {
  std::vector<InstanceConfig> instances;
  bool canonical_suite = false;
  double canonical_planar_h = 0.02;
  double canonical_sphere_h = 0.04;
  double canonical_torus_h = 0.05;
  double tol = 1e-10;
  std::uint64_t seed = 1;
  NodalOptions nodal;
  int rotations = 5;
  std::vector<std::string> checks;  ///< empty runs every check
  double lemma_tol = 0.05;
  bool lemma_refinement = false;
  double cluster_c = 0.25;
  double angle_tol_deg = 10.0;
  double shift_constant = 5.0;
  std::vector<SweepAxis> sweep;
  std::string output;

  VerifyOptions verify_options() const;
  /// Normalized echo, written into manifests.
  nlohmann::json to_json() const;
};

/// Parses TOML, or JSON when the text starts with '{'. `origin` names the
/// source in diagnostics.
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_config(const std::string& path);

/// Meshes the configured instances (and the canonical suite when requested).
std::vector<VerifyInstance> build_instances(const RunConfig& config);

struct GridPoint {
  std::string label;                           ///< directory name, e.g. "000_h=0.05"
  std::map<std::string, nlohmann::json> values;  ///< axis key -> value
  RunConfig config;                            ///< with the axis values applied
};

/// Cartesian product of the sweep axes, first axis slowest. "params.<name>"
/// replaces the placeholder "{name}" in phi and potential specs. With no axes,
/// returns a single point carrying the config unchanged.
std::vector<GridPoint> expand_sweep(const RunConfig& config);

}  // namespace wspec
