#pragma once

#include "deconv/error_model.hpp"
#include "deconv/estimator.hpp"
#include "deconv/random.hpp"
#include "deconv/reconstruction.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace deconv {

struct TestDensity
{
  std::string name;
  std::function<double(double)> pdf;
  std::function<double(double)> cdf;
  std::function<double(double)> quantile;
  std::function<double(Rng&)> sampler;
  //! Documented smoothness; infinity for C-infinity densities.
  double alpha_doc;
  //! Largest documented finite-moment order; infinity when all exist.
  double p_doc;
};

//! C_r (1 + x^2)^{-r}, r > 1/2.
TestDensity density_cauchy_power(double r);
//! Normalised bump on [center - width, center + width].
TestDensity density_smooth_compact(double center, double width);

//! Sampled with the stream `rng`; throws for custom laws.
double sample_error(const ErrorModel& model, Rng& rng);
//! Y = X + eps, deterministic in seed.
std::vector<double> sample_observations(const TestDensity& f,
                                        const ErrorModel& model,
                                        std::size_t n,
                                        std::uint64_t seed);
//! Density of Y = X + eps.
Density observation_density(const TestDensity& f, const ErrorModel& model);

struct RiskSettings
{
  RiskKind kind = RiskKind::pointwise;
  double x0 = 0.0;
  double alpha = 2.0;
  std::optional<double> p;
  double a_const = 1.0;
  double b_const = 1.0;
  std::optional<int> k0;
  int workers = 1;
  TuningOptions tuning;
  //! L2 only: fixed evaluation grid instead of the automatic one.
  std::optional<std::vector<double>> grid;
};

struct RiskEstimate
{
  double risk;
  double stderr_risk;
  //! Squared loss per replication.
  std::vector<double> losses;
  double h;
  int n_cap;
  //! L2 only: estimated mass of the squared error outside the grid.
  double grid_truncation = 0.0;
  std::vector<std::string> warnings;
};

//! Seed of replication `rep` at sample size n.
std::uint64_t replication_seed(std::uint64_t seed, std::size_t n, int rep);

//! Root mean of squared losses with a delta-method standard error.
std::pair<double, double> rms_with_stderr(const std::vector<double>& losses);

RiskEstimate pointwise_risk(const TestDensity& f,
                            const ErrorModel& model,
                            double x0,
                            std::size_t n,
                            int reps,
                            std::uint64_t seed,
                            const RiskSettings& settings = {});

//! Grid for the L2 loss: step <= h/8 over the central f_Y mass widened by the
//! kernel reach.
std::vector<double> l2_grid(const TestDensity& f,
                            const ErrorModel& model,
                            const Estimator& estimator);

RiskEstimate l2_risk(const TestDensity& f,
                     const ErrorModel& model,
                     std::size_t n,
                     int reps,
                     std::uint64_t seed,
                     const RiskSettings& settings = {},
                     std::optional<std::vector<double>> grid = std::nullopt);

//! Trapezoid integral of (estimate - truth)^2 on a grid.
double l2_loss(const std::vector<double>& grid,
               const std::vector<double>& estimate,
               const std::function<double(double)>& truth);

struct RateExperiment
{
  ErrorModel model;
  TestDensity density;
  RiskSettings settings;
  std::vector<std::size_t> n_grid;
  int reps = 100;
  std::uint64_t seed = 0;
  int bootstrap = 500;
};

struct RiskReport
{
  std::vector<std::size_t> n_values;
  std::vector<double> risks;
  std::vector<double> stderrs;
  std::vector<double> bandwidths;
  std::vector<int> caps;
  double slope;
  std::pair<double, double> slope_ci;
  double theoretical_slope;
  std::vector<std::string> warnings;
};

struct LineFit
{
  double slope;
  double intercept;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

//! -alpha / (2 alpha + 2 gamma + 1).
double theoretical_slope(const ErrorModel& model, double alpha);

RiskReport rate_experiment(const RateExperiment& experiment);

//! Log-log risk curve with the reference slope.
std::string render_svg(const RiskReport& report, const std::string& title);

} // namespace deconv
