#include "deconv/errors.hpp"
#include "deconv/estimator.hpp"
#include "deconv/simulation.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace deconv;

namespace {

Estimator uniform_estimator(double h, int n_cap, int k0 = 3)
{
  return Estimator(EstimatorSpec{ make_uniform(1.0), build_kernel(k0), h, n_cap });
}

std::vector<double> draw(std::size_t n, std::uint64_t seed)
{
  return sample_observations(density_cauchy_power(3.0), make_uniform(1.0), n, seed);
}

bool has_warning(const std::vector<std::string>& ws, const std::string& needle)
{
  return std::any_of(ws.begin(), ws.end(), [&](const std::string& w) {
    return w.find(needle) != std::string::npos;
  });
}

} // namespace

TEST(tuning, bandwidth_examples)
{
  auto u = select_tuning(make_uniform(1.0), 2.0, 4.0, 1.0, 1.0, 100000);
  EXPECT_NEAR(u.h, 0.1931, 5e-5);
  auto b = select_tuning(make_binomial(1), 2.0, 4.0, 1.0, 1.0, 100000);
  EXPECT_NEAR(b.h, 0.1000, 5e-5);
}

TEST(tuning, bandwidth_scaling_in_constants)
{
  // doubling B scales h by 2^{1/d}; doubling A by 2^{-2/d}
  auto model = make_uniform(0.5);
  double d = 2.0 * 1.5 + 2.0 + 1.0;
  auto base = select_tuning(model, 1.5, 3.0, 1.0, 1.0, 5000);
  auto bb = select_tuning(model, 1.5, 3.0, 1.0, 2.0, 5000);
  auto aa = select_tuning(model, 1.5, 3.0, 2.0, 1.0, 5000);
  EXPECT_NEAR(bb.h / base.h, std::pow(2.0, 1.0 / d), 1e-12);
  EXPECT_NEAR(aa.h / base.h, std::pow(2.0, -2.0 / d), 1e-12);
}

TEST(tuning, truncation_examples)
{
  // (65536^3)^{1/(4.9 * 7)} = 2.638..
  auto t = select_tuning(make_uniform(1.0), 2.0, 4.9, 1.0, 1.0, 65536);
  EXPECT_NEAR(t.n_raw, std::exp(3.0 * std::log(65536.0) / 34.3), 1e-9);
  EXPECT_EQ(t.n_cap, 3);
  // L2 exponent 2 / ((2p - 1) d)
  auto l = select_tuning(make_uniform(1.0), 2.0, 1.5, 1.0, 1.0, 1000, RiskKind::l2);
  EXPECT_NEAR(l.n_raw, std::pow(1e9, 2.0 / (2.0 * 7.0)), 1e-6);
  EXPECT_EQ(l.n_cap, static_cast<int>(std::ceil(l.n_raw)));
}

TEST(tuning, truncation_clamped_to_one)
{
  // A^{1 - 2 gamma} with gamma = 1 pushes the base below one
  auto t = select_tuning(make_uniform(1.0), 2.0, 3.0, 100.0, 1.0, 2);
  EXPECT_LT(t.n_raw, 1.0);
  EXPECT_EQ(t.n_cap, 1);
}

TEST(tuning, cap_warns)
{
  TuningOptions opts;
  opts.max_cap = 5;
  auto t = select_tuning(make_uniform(1.0), 2.0, 0.2, 1.0, 1.0, 100000, RiskKind::pointwise, opts);
  EXPECT_GT(t.n_raw, 5.0);
  EXPECT_EQ(t.n_cap, 5);
  EXPECT_TRUE(has_warning(t.warnings, "capped"));
}

TEST(tuning, moment_warnings)
{
  auto two = make_uniform_convolution({ 1.0 }, { 2 });
  EXPECT_TRUE(has_warning(select_tuning(two, 2, 1.3, 1, 1, 1000).warnings, "moment"));
  EXPECT_TRUE(select_tuning(two, 2, 2.0, 1, 1, 1000).warnings.empty());
  EXPECT_TRUE(has_warning(select_tuning(two, 2, 3.0, 1, 1, 1000, RiskKind::l2).warnings, "moment"));
  EXPECT_TRUE(select_tuning(two, 2, 3.1, 1, 1, 1000, RiskKind::l2).warnings.empty());
  EXPECT_FALSE(has_warning(select_tuning(make_binomial(1), 2, 0.1, 1, 1, 1000).warnings, "moment"));
  EXPECT_FALSE(has_warning(select_tuning(make_uniform(1.0), 2, 0.1, 1, 1, 1000).warnings, "moment"));
}

TEST(tuning, default_order_clears_threshold)
{
  for (auto model : { make_uniform(1.0), make_uniform_convolution({ 1.0 }, { 3 }), make_binomial(2),
                      make_uniform_smooth_convolution(1.0, 2.0, 1.0) })
    for (auto risk : { RiskKind::pointwise, RiskKind::l2 }) {
      double p = default_moment_order(model, risk);
      EXPECT_FALSE(has_warning(select_tuning(model, 2.0, p, 1, 1, 1000, risk).warnings, "moment"))
        << model.tag();
    }
}

TEST(tuning, rejects_bad_input)
{
  auto m = make_uniform(1.0);
  EXPECT_THROW(select_tuning(m, 2, 1, 1, 1, 1), invalid_parameter);
  EXPECT_THROW(select_tuning(m, 0, 1, 1, 1, 100), invalid_parameter);
  EXPECT_THROW(select_tuning(m, 2, 0.4, 1, 1, 100, RiskKind::l2), invalid_parameter);
}

TEST(estimator, kernel_order_too_low)
{
  EXPECT_THROW(uniform_estimator(0.2, 3, 2), invalid_parameter);
}

TEST(estimator, bandwidth_above_period_warns)
{
  EXPECT_TRUE(uniform_estimator(0.2, 3).warnings().empty());
  EXPECT_FALSE(uniform_estimator(2.5, 3).warnings().empty());
}

TEST(estimator, side_rule)
{
  EXPECT_EQ(Estimator::side_for(0.0), Side::plus);
  EXPECT_EQ(Estimator::side_for(1e-300), Side::plus);
  EXPECT_EQ(Estimator::side_for(-1e-300), Side::minus);
}

TEST(estimator, matches_direct_sum)
{
  auto est = uniform_estimator(0.25, 4);
  auto ys = draw(300, 7);
  Sample s(ys);
  for (double x0 : { -1.3, -0.2, 0.0, 0.4, 2.0 }) {
    const auto& L = est.kernel(Estimator::side_for(x0));
    double direct = 0.0;
    for (double y : ys)
      direct += L.eval_direct(y - x0);
    direct /= static_cast<double>(ys.size());
    EXPECT_NEAR(est.estimate_point(s, x0), direct, 1e-12) << x0;
  }
}

TEST(estimator, singleton_grid_equals_point)
{
  auto est = uniform_estimator(0.3, 2);
  Sample s(draw(200, 3));
  for (double x0 : { -0.7, 0.0, 1.1 })
    EXPECT_EQ(est.estimate_grid(s, { x0 }).front(), est.estimate_point(s, x0));
}

TEST(estimator, permutation_invariant)
{
  auto est = uniform_estimator(0.3, 3);
  auto ys = draw(500, 11);
  auto shuffled = ys;
  std::mt19937 g(5);
  std::shuffle(shuffled.begin(), shuffled.end(), g);
  std::vector<double> grid{ -1.0, -0.1, 0.0, 0.35, 1.7 };
  EXPECT_EQ(est.estimate_grid(Sample(ys), grid), est.estimate_grid(Sample(shuffled), grid));
}

TEST(estimator, pooled_sample_is_weighted_average)
{
  auto est = uniform_estimator(0.3, 3);
  auto a = draw(300, 1), b = draw(100, 2);
  auto pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  for (double x0 : { -0.5, 0.2 }) {
    double fa = est.estimate_point(Sample(a), x0);
    double fb = est.estimate_point(Sample(b), x0);
    double fp = est.estimate_point(Sample(pooled), x0);
    EXPECT_NEAR(fp, (300.0 * fa + 100.0 * fb) / 400.0, 1e-13);
  }
}

TEST(estimator, empty_support_gives_zero)
{
  auto est = uniform_estimator(0.2, 2);
  auto [lo, hi] = est.kernel(Side::plus).reach();
  Sample s({ hi + 10.0, hi + 11.0, lo - 5.0 });
  EXPECT_EQ(est.estimate_point(s, 0.0), 0.0);
}

TEST(estimator, single_observation)
{
  auto est = uniform_estimator(0.2, 2);
  for (double y : { 0.05, 1.03, 2.9 }) {
    Sample s({ y });
    EXPECT_NEAR(est.estimate_point(s, 0.0), est.kernel(Side::plus)(y), 1e-14);
  }
}

TEST(estimator, far_observations_do_not_matter)
{
  auto est = uniform_estimator(0.2, 2);
  auto ys = draw(100, 4);
  auto [lo, hi] = est.kernel(Side::plus).reach();
  auto a = ys, b = ys;
  a.push_back(hi + 3.0);
  b.push_back(hi + 40.0);
  EXPECT_EQ(est.estimate_point(Sample(a), 0.5), est.estimate_point(Sample(b), 0.5));
}

TEST(estimator, symmetric_model_symmetric_in_mean)
{
  // uniform error and an even density: E f(x0) = E f(-x0) up to MC error
  auto f = density_cauchy_power(3.0);
  auto model = make_uniform(1.0);
  auto est = uniform_estimator(0.3, 3);
  double x0 = 0.6;
  std::vector<double> diff;
  for (int r = 0; r < 200; ++r) {
    Sample s(sample_observations(f, model, 400, 1000 + r));
    diff.push_back(est.estimate_point(s, x0) - est.estimate_point(s, -x0));
  }
  double mean = 0.0, sq = 0.0;
  for (double d : diff)
    mean += d;
  mean /= diff.size();
  for (double d : diff)
    sq += (d - mean) * (d - mean);
  double se = std::sqrt(sq / (diff.size() - 1) / diff.size());
  EXPECT_LT(std::abs(mean), 4.0 * se + 1e-3);
}

TEST(estimator, tuned_spec_defaults)
{
  auto spec = tuned_spec(make_uniform(1.0), 2.0, std::nullopt, 1, 1, 4096, RiskKind::pointwise);
  EXPECT_EQ(spec.kernel.k0(), 3);
  EXPECT_DOUBLE_EQ(spec.p, default_moment_order(make_uniform(1.0), RiskKind::pointwise));
  auto t = select_tuning(make_uniform(1.0), 2.0, spec.p, 1, 1, 4096);
  EXPECT_EQ(spec.h, t.h);
  EXPECT_EQ(spec.n_cap, t.n_cap);
}
