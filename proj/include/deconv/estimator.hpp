#pragma once

#include "deconv/error_model.hpp"
#include "deconv/kernel.hpp"
#include "deconv/reconstruction.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace deconv {

enum class RiskKind
{
  pointwise,
  l2
};

struct TuningOptions
{
  int max_cap = 4096;
  std::uint64_t budget = 10'000'000;
};

struct Tuning
{
  double h;
  int n_cap;
  //! N before clamping and capping.
  double n_raw;
  std::vector<std::string> warnings;
};

//! Moment order the rate theorems need for this model and risk.
double moment_threshold(const ErrorModel& model, RiskKind risk);
//! Default p sitting just past the threshold.
double default_moment_order(const ErrorModel& model, RiskKind risk);

Tuning select_tuning(const ErrorModel& model,
                     double alpha,
                     double p,
                     double a_const,
                     double b_const,
                     std::size_t n,
                     RiskKind risk = RiskKind::pointwise,
                     const TuningOptions& options = {});

struct EstimatorSpec
{
  ErrorModel model;
  FlatKernel kernel;
  double h;
  int n_cap;
  double alpha = 2.0;
  double p = 1.0;
  double a_const = 1.0;
  double b_const = 1.0;
};

//! Observations kept in ascending order.
class Sample
{
public:
  explicit Sample(std::vector<double> values);
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

private:
  std::vector<double> values_;
};

class Estimator
{
public:
  explicit Estimator(EstimatorSpec spec);

  const EstimatorSpec& spec() const { return spec_; }
  const DeconvolutionKernel& kernel(Side side) const
  {
    return side == Side::plus ? plus_ : minus_;
  }
  const std::vector<std::string>& warnings() const { return warnings_; }

  //! Plus side for x0 >= 0, minus side otherwise.
  static Side side_for(double x0) { return x0 >= 0.0 ? Side::plus : Side::minus; }

  double estimate_point(const Sample& sample, double x0) const;
  std::vector<double> estimate_grid(const Sample& sample, const std::vector<double>& grid) const;

private:
  EstimatorSpec spec_;
  DeconvolutionKernel plus_, minus_;
  std::vector<std::string> warnings_;
};

//! Spec with theorem tuning for a sample of size n; k0 defaults to
//! ceil(alpha) + 1.
EstimatorSpec tuned_spec(const ErrorModel& model,
                         double alpha,
                         std::optional<double> p,
                         double a_const,
                         double b_const,
                         std::size_t n,
                         RiskKind risk,
                         std::optional<int> k0 = std::nullopt,
                         const TuningOptions& options = {});

} // namespace deconv
