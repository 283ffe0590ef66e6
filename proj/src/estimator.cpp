#include "deconv/estimator.hpp"
#include "deconv/errors.hpp"
#include "deconv/quadrature.hpp"
#include "deconv/zero_set.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace deconv {

namespace {

int total_multiplicity(const ErrorModel& model)
{
  int m = 0;
  for (const auto& d : model.zeros())
    m += d.m;
  return m;
}

// m-fold uniform and single-datum lattice laws have sharper thresholds
std::optional<int> specialised_order(const ErrorModel& model)
{
  if (const auto* law = std::get_if<UniformLaw>(&model.law()))
    if (law->thetas.size() == 1)
      return law->mults[0];
  if (std::holds_alternative<DiscreteLaw>(model.law()) && model.zeros().size() == 1 &&
      model.gamma() == 0.0)
    return model.zeros()[0].m;
  return std::nullopt;
}

DeconvolutionKernel make_side(const EstimatorSpec& spec, Side side)
{
  auto seq = build_sequence(spec.model, spec.n_cap);
  return build_deconvolution_kernel(seq, make_base(spec.model, spec.kernel, spec.h), side);
}

} // namespace

double moment_threshold(const ErrorModel& model, RiskKind risk)
{
  if (auto m = specialised_order(model)) {
    if (risk == RiskKind::pointwise)
      return *m > 1 ? 2.0 * *m - 2.0 : 0.0;
    return 2.0 * *m - 1.0;
  }
  double nu = std::max(1.0, static_cast<double>(total_multiplicity(model)));
  return risk == RiskKind::pointwise ? 2.0 * nu : 2.0 * nu + 1.0;
}

double default_moment_order(const ErrorModel& model, RiskKind risk)
{
  double threshold = moment_threshold(model, risk);
  if (risk == RiskKind::pointwise)
    return threshold > 0.0 ? threshold : 0.1;
  return threshold + 0.1;
}

Tuning select_tuning(const ErrorModel& model,
                     double alpha,
                     double p,
                     double a_const,
                     double b_const,
                     std::size_t n,
                     RiskKind risk,
                     const TuningOptions& options)
{
  if (n < 2)
    throw invalid_parameter("sample size must be at least 2");
  if (!(alpha > 0) || !(p > 0) || !(a_const > 0) || !(b_const > 0))
    throw invalid_parameter("alpha, p, A and B must be positive");
  double gamma = model.gamma();
  double denom = 2.0 * alpha + 2.0 * gamma + 1.0;
  auto nn = static_cast<double>(n);

  Tuning out;
  out.h = std::pow(b_const / (a_const * a_const * nn), 1.0 / denom);
  double base = std::pow(a_const, 1.0 - 2.0 * gamma) *
                std::pow(b_const, 2.0 * gamma + alpha) * std::pow(nn, alpha + 1.0);
  double exponent = risk == RiskKind::pointwise ? 1.0 / (p * denom)
                                                : 2.0 / ((2.0 * p - 1.0) * denom);
  if (risk == RiskKind::l2 && p <= 0.5)
    throw invalid_parameter("L2 tuning needs p > 1/2");
  out.n_raw = std::pow(base, exponent);

  double threshold = moment_threshold(model, risk);
  bool strict = risk == RiskKind::l2 || threshold == 0.0;
  if (strict ? p <= threshold : p < threshold) {
    std::ostringstream msg;
    msg << "p = " << p << " is below the moment order " << (strict ? "> " : ">= ")
        << threshold << " the rate theorem assumes; rates are not guaranteed";
    out.warnings.push_back(msg.str());
  }

  double n_cap = std::max(1.0, std::ceil(out.n_raw - 1e-9));
  int cap = options.max_cap;
  int q = static_cast<int>(model.zeros().size());
  if (q >= 2)
    cap = std::min(cap, max_cap_for_budget(q, options.budget));
  if (n_cap > cap) {
    std::ostringstream msg;
    msg << "truncation N = " << n_cap << " capped at " << cap;
    out.warnings.push_back(msg.str());
    n_cap = cap;
  }
  out.n_cap = static_cast<int>(n_cap);
  return out;
}

Sample::Sample(std::vector<double> values)
  : values_(std::move(values))
{
  if (values_.empty())
    throw invalid_parameter("sample must be nonempty");
  std::sort(values_.begin(), values_.end());
}

Estimator::Estimator(EstimatorSpec spec)
  : spec_(std::move(spec))
  , plus_(make_side(spec_, Side::plus))
  , minus_(make_side(spec_, Side::minus))
{
  if (spec_.kernel.k0() < spec_.alpha + 1.0)
    throw invalid_parameter("kernel order k0 = " + std::to_string(spec_.kernel.k0()) +
                            " must be at least alpha + 1");
  if (spec_.n_cap < 0)
    throw invalid_parameter("truncation cap must be nonnegative");
  if (!spec_.model.zeros().empty() && spec_.h >= spec_.model.min_period())
    warnings_.push_back("bandwidth is not below the smallest period; translates overlap");
}

double Estimator::estimate_point(const Sample& sample, double x0) const
{
  return estimate_grid(sample, { x0 }).front();
}

std::vector<double> Estimator::estimate_grid(const Sample& sample,
                                             const std::vector<double>& grid) const
{
  const auto& ys = sample.values();
  std::vector<double> out;
  out.reserve(grid.size());
  for (double x0 : grid) {
    const auto& L = kernel(side_for(x0));
    const auto& base = L.base();
    auto [lo, hi] = base.support();
    NeumaierSum acc;
    for (const auto& tr : L.translates()) {
      // observations with lo <= y - x0 - offset <= hi
      double shift = x0 + tr.offset;
      auto first = std::lower_bound(ys.begin(), ys.end(), shift + lo);
      for (auto it = first; it != ys.end() && *it <= shift + hi; ++it)
        acc.add(tr.coef * base(*it - shift));
    }
    out.push_back(acc.value() / static_cast<double>(ys.size()));
  }
  return out;
}

EstimatorSpec tuned_spec(const ErrorModel& model,
                         double alpha,
                         std::optional<double> p,
                         double a_const,
                         double b_const,
                         std::size_t n,
                         RiskKind risk,
                         std::optional<int> k0,
                         const TuningOptions& options)
{
  double order = p ? *p : default_moment_order(model, risk);
  auto tuning = select_tuning(model, alpha, order, a_const, b_const, n, risk, options);
  int kernel_order = k0 ? *k0 : static_cast<int>(std::ceil(alpha)) + 1;
  return EstimatorSpec{ model,   build_kernel(kernel_order), tuning.h, tuning.n_cap,
                        alpha,   order,                      a_const,  b_const };
}

} // namespace deconv
