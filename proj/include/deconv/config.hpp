#pragma once

#include "deconv/error_model.hpp"
#include "deconv/estimator.hpp"
#include "deconv/simulation.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace deconv {

//! Error law by name; only the fields of `kind` are read.
struct ErrorDecl
{
  //! uniform | uniform_convolution | discrete | binomial | uniform_gamma
  std::string kind;
  double theta = 1.0;
  std::vector<double> thetas;
  std::vector<int> mults;
  double step = 1.0;
  std::vector<double> probs;
  //! Symmetric indexing when absent.
  std::optional<int> first_index;
  double unit_tol = 1e-8;
  int m = 1;
  double shape = 1.0;
  double rate = 1.0;

  bool operator==(const ErrorDecl&) const = default;
};

struct DensityDecl
{
  //! cauchy_power | smooth_compact
  std::string kind;
  double r = 3.0;
  double center = 0.0;
  double width = 1.0;

  bool operator==(const DensityDecl&) const = default;
};

struct RiskDecl
{
  RiskKind kind = RiskKind::pointwise;
  double x0 = 0.0;
  // optional explicit L2 grid: lo, hi and step together
  std::optional<double> lo, hi, step;

  bool operator==(const RiskDecl&) const = default;
};

struct ExperimentConfig
{
  ErrorDecl error;
  DensityDecl density;
  RiskDecl risk;
  std::vector<std::size_t> n_grid;
  int reps = 100;
  double alpha = 2.0;
  std::optional<double> p;
  double a_const = 1.0;
  double b_const = 1.0;
  std::uint64_t seed = 0;
  std::optional<int> k0;
  int workers = 1;
  int bootstrap = 500;
  int max_cap = 4096;
  bool plot = false;
  std::string output_dir = "out";

  bool operator==(const ExperimentConfig&) const = default;
};

//! Throws config_error for unknown, missing or mistyped keys and
//! invalid_parameter (prefixed by the field path) for bad values.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
//! Canonical TOML text; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

//! Throws invalid_parameter naming the offending field.
void validate(const ExperimentConfig& config);

ErrorModel make_error_model(const ErrorDecl& decl);
TestDensity make_density(const DensityDecl& decl);
RateExperiment make_experiment(const ExperimentConfig& config);

//! DECONV_OUTPUT_DIR when set, the configured directory otherwise.
std::string resolved_output_dir(const ExperimentConfig& config);

//! FNV-1a of the canonical text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);
std::string fnv1a_hex(const std::string& text);

inline constexpr const char* tool_version = "0.1.0";

} // namespace deconv
