#include "deconv/error_model.hpp"
#include "deconv/errors.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <gtest/gtest.h>
#include <numbers>

using namespace deconv;

namespace {

const double pi = std::numbers::pi;
const cplx I(0.0, 1.0);

double sinc(double x)
{
  return x == 0.0 ? 1.0 : std::sin(x) / x;
}

// characteristic functions written directly from the distributions
cplx direct_uniform(const std::vector<double>& thetas,
                    const std::vector<int>& mults,
                    double w)
{
  cplx r = 1.0;
  for (size_t k = 0; k < thetas.size(); ++k)
    r *= std::pow(sinc(thetas[k] * w), mults[k]);
  return r;
}

cplx direct_discrete(double step, int first, const std::vector<double>& p, double w)
{
  cplx r = 0.0;
  for (size_t i = 0; i < p.size(); ++i)
    r += p[i] * std::exp(-I * w * step * double(first + int(i)));
  return r;
}

cplx direct_uniform_gamma(double theta, double shape, double rate, double w)
{
  return sinc(theta * w) * std::pow(rate / (rate + I * w), shape);
}

double max_reconstruction_error(const ErrorModel& model,
                                const std::function<cplx(double)>& direct)
{
  double worst = 0.0;
  for (int i = 0; i <= 4000; ++i) {
    double w = -50.0 + 100.0 * i / 4000.0;
    worst = std::max(worst, std::abs(model.g_hat(w) - direct(w)));
  }
  return worst;
}

} // namespace

TEST(uniform, paper_example_values)
{
  auto model = make_uniform(1.0);
  EXPECT_LT(std::abs(model.g_hat(pi)), 1e-15);
  EXPECT_NEAR(std::abs(model.g_hat(0.0) - 1.0), 0.0, 1e-14);
  EXPECT_NEAR(model.g_hat(pi / 2).real(), 2.0 / pi, 1e-15);
  EXPECT_NEAR(std::abs(model.psi(3.0)), 6.0, 1e-13);
  EXPECT_EQ(model.gamma(), 1.0);
  EXPECT_EQ(model.smooth().d1, 2.0);
  EXPECT_EQ(model.smooth().d2, 2.0);
  ASSERT_EQ(model.zeros().size(), 1u);
  EXPECT_EQ(model.zeros()[0].a, 2.0);
  EXPECT_EQ(model.zeros()[0].lambda, cplx(1.0));
  EXPECT_EQ(model.zeros()[0].m, 1);
}

TEST(uniform, rejects_nonpositive_theta)
{
  EXPECT_THROW(make_uniform(0.0), invalid_parameter);
  EXPECT_THROW(make_uniform(-1.0), invalid_parameter);
}

TEST(uniform, removable_point_is_smooth)
{
  auto model = make_uniform(1.0);
  for (double w : { 1e-12, 1e-9, 3e-7, 5e-7, 2e-6, 1e-5 })
    EXPECT_NEAR(model.g_hat(w).real(), sinc(w), 1e-12) << w;
}

TEST(uniform_convolution, gamma_and_zero_sets)
{
  EXPECT_EQ(make_uniform_convolution({ 1.0 }, { 3 }).gamma(), 3.0);
  auto two = make_uniform_convolution({ 1.0, 2.0 }, { 1, 1 });
  for (int k = 1; k <= 6; ++k) {
    EXPECT_LT(std::abs(two.g_hat(pi * k)), 1e-8);
    EXPECT_LT(std::abs(two.g_hat(pi * k / 2)), 1e-8);
  }
  EXPECT_NEAR(std::abs(two.g_hat(1.3) - sinc(1.3) * sinc(2.6)), 0.0, 1e-14);
  EXPECT_THROW(make_uniform_convolution({ 1.0, 1.0 }, { 1, 2 }), invalid_parameter);
  EXPECT_THROW(make_uniform_convolution({ 1.0 }, { 1, 2 }), invalid_parameter);
}

TEST(uniform_convolution, single_factor_equals_uniform)
{
  auto a = make_uniform(1.0);
  auto b = make_uniform_convolution({ 1.0 }, { 1 });
  for (double w = -20; w <= 20; w += 0.37) {
    EXPECT_EQ(a.g_hat(w), b.g_hat(w));
    EXPECT_EQ(a.psi(w), b.psi(w));
  }
}

TEST(discrete, bernoulli_in_both_orientations)
{
  // mass on {-1, 0}: transform (1 + e^z)/2, smooth part constant 2
  auto left = make_discrete(1.0, { 0.5, 0.5 }, -1);
  ASSERT_EQ(left.zeros().size(), 1u);
  EXPECT_EQ(left.zeros()[0].lambda, cplx(-1.0, 0.0));
  EXPECT_EQ(left.zeros()[0].m, 1);
  EXPECT_EQ(left.zeros()[0].a, 1.0);
  EXPECT_NEAR(std::abs(left.psi(0.7) - 2.0), 0.0, 1e-14);
  cplx z(0.3, 0.8);
  EXPECT_NEAR(std::abs(left.laplace(z) - 0.5 * (1.0 + std::exp(z))), 0.0, 1e-14);
  EXPECT_LT(std::abs(left.g_hat(pi)), 1e-15);

  // mass on {0, 1}: the extra e^{-z} moves into the smooth part
  auto right = make_discrete(1.0, { 0.5, 0.5 }, 0);
  EXPECT_NEAR(std::abs(right.psi(0.7) - 2.0 * std::exp(I * 0.7)), 0.0, 1e-14);
  EXPECT_LT(std::abs(right.g_hat(pi)), 1e-15);
}

TEST(discrete, binomial_zero_datum)
{
  for (int m = 1; m <= 6; ++m) {
    auto model = make_binomial(m);
    ASSERT_EQ(model.zeros().size(), 1u) << m;
    EXPECT_EQ(model.zeros()[0].lambda, cplx(-1.0, 0.0));
    EXPECT_EQ(model.zeros()[0].m, m);
    EXPECT_EQ(model.gamma(), 0.0);
    EXPECT_NEAR(std::abs(model.psi(0.4) - std::pow(2.0, m) * std::exp(I * 0.4 * double(m))),
                0.0,
                1e-11);
    // support {-m..0} gives the constant smooth part 2^m
    std::vector<double> p(m + 1);
    for (int k = 0; k <= m; ++k)
      p[k] = std::tgamma(m + 1.0) / (std::tgamma(k + 1.0) * std::tgamma(m - k + 1.0)) /
             std::pow(2.0, m);
    auto flipped = make_discrete(1.0, p, -m);
    EXPECT_NEAR(std::abs(flipped.psi(1.1) - std::pow(2.0, m)), 0.0, 1e-11);
  }
}

TEST(discrete, mixed_roots_against_companion_oracle)
{
  std::vector<double> p{ 0.2, 0.5, 0.3 };
  auto model = make_discrete(1.0, p);
  // P(x) = 1 + (0.5/0.3) x + (0.2/0.3) x^2
  Eigen::Matrix2d companion;
  companion << 0.0, -1.0 / (0.2 / 0.3), 1.0, -(0.5 / 0.3) / (0.2 / 0.3);
  Eigen::EigenSolver<Eigen::Matrix2d> solver(companion);
  int on_circle = 0;
  for (int i = 0; i < 2; ++i) {
    cplx r = solver.eigenvalues()[i];
    cplx value = 1.0 + (0.5 / 0.3) * r + (0.2 / 0.3) * r * r;
    EXPECT_LT(std::abs(value), 1e-8);
    if (std::abs(std::abs(r) - 1.0) < 1e-8)
      ++on_circle;
  }
  ASSERT_EQ(on_circle, 1);
  ASSERT_EQ(model.zeros().size(), 1u);
  EXPECT_EQ(model.zeros()[0].lambda, cplx(-1.0, 0.0));
  EXPECT_NEAR(std::abs(model.g_hat(0.0) - 1.0), 0.0, 1e-13);
  EXPECT_NEAR(model.strip().sigma_plus, std::log(1.5), 1e-12);
  EXPECT_LT(max_reconstruction_error(
              model, [&](double w) { return direct_discrete(1.0, -1, p, w); }),
            1e-9);
}

TEST(discrete, complex_unit_roots)
{
  auto model = make_discrete(0.5, { 1.0 / 3, 1.0 / 3, 1.0 / 3 });
  ASSERT_EQ(model.zeros().size(), 2u);
  for (const auto& z : model.zeros()) {
    EXPECT_NEAR(std::abs(std::arg(z.lambda)), 2.0 * pi / 3.0, 1e-12);
    EXPECT_EQ(z.a, 0.5);
  }
  EXPECT_TRUE(model.is_real());
  EXPECT_LT(std::abs(model.g_hat(2.0 * pi / 3.0 / 0.5)), 1e-12);
}

TEST(discrete, rejects_bad_probabilities)
{
  EXPECT_THROW(make_discrete(1.0, { 0.5, 0.6 }, 0), invalid_parameter);
  EXPECT_THROW(make_discrete(1.0, { 0.5, 0.5, 0.0 }, 0), invalid_parameter);
  EXPECT_THROW(make_discrete(-1.0, { 1.0 }, 0), invalid_parameter);
}

TEST(root_clusters, multiplicities)
{
  // (x - 2)^2 (x + 0.5) = x^3 - 3.5 x^2 + 2 x + 2
  auto c = polynomial_root_clusters({ 2.0, 2.0, -3.5, 1.0 });
  ASSERT_EQ(c.size(), 2u);
  int total = 0;
  for (const auto& r : c) {
    total += r.multiplicity;
    if (r.multiplicity == 2)
      EXPECT_NEAR(std::abs(r.root - 2.0), 0.0, 1e-12);
    else
      EXPECT_NEAR(std::abs(r.root + 0.5), 0.0, 1e-12);
  }
  EXPECT_EQ(total, 3);
  // (1 + x)^6
  auto b = polynomial_root_clusters({ 1, 6, 15, 20, 15, 6, 1 });
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0].multiplicity, 6);
  EXPECT_NEAR(std::abs(b[0].root + 1.0), 0.0, 1e-12);
  // close but distinct roots stay apart: (x - 1)(x - 1.001)
  auto d = polynomial_root_clusters({ 1.001, -2.001, 1.0 });
  EXPECT_EQ(d.size(), 2u);
}

TEST(uniform_gamma, example_values)
{
  auto model = make_uniform_smooth_convolution(1.0, 1.0, 1.0);
  for (double w : { 0.5, 2.0, 7.0 })
    EXPECT_NEAR(std::abs(model.psi(w) - (-2.0 * I * w * std::exp(I * w) * (I * w + 1.0))),
                0.0,
                1e-12);
  EXPECT_EQ(model.gamma(), 2.0);
  EXPECT_NEAR(std::abs(model.psi(1e4)) / (2.0 * 1e8), 1.0, 1e-7);
  EXPECT_NEAR(std::abs(model.g_hat(0.0) - 1.0), 0.0, 1e-13);
  EXPECT_THROW(make_uniform_smooth_convolution(1.0, 0.0, 1.0), invalid_parameter);
}

TEST(reconstruction, all_builtin_models)
{
  EXPECT_LT(max_reconstruction_error(make_uniform(1.3),
                                     [](double w) { return direct_uniform({ 1.3 }, { 1 }, w); }),
            1e-9);
  EXPECT_LT(max_reconstruction_error(
              make_uniform_convolution({ 1.0, 0.5, 0.3 }, { 2, 1, 3 }),
              [](double w) { return direct_uniform({ 1.0, 0.5, 0.3 }, { 2, 1, 3 }, w); }),
            1e-9);
  EXPECT_LT(max_reconstruction_error(make_binomial(4),
                                     [](double w) {
                                       return std::exp(-2.0 * I * w) *
                                              std::pow(std::cos(w / 2), 4);
                                     }),
            1e-9);
  std::vector<double> p{ 0.1, 0.2, 0.3, 0.15, 0.25 };
  EXPECT_LT(max_reconstruction_error(make_discrete(0.7, p),
                                     [&](double w) { return direct_discrete(0.7, -2, p, w); }),
            1e-9);
  EXPECT_LT(max_reconstruction_error(
              make_uniform_smooth_convolution(0.8, 2.5, 1.7),
              [](double w) { return direct_uniform_gamma(0.8, 2.5, 1.7, w); }),
            1e-9);
}

TEST(zero_placement, predicted_zeros_and_margins)
{
  std::vector<ErrorModel> models{ make_uniform(1.0),
                                  make_uniform_convolution({ 1.0, 0.7 }, { 1, 1 }),
                                  make_binomial(3),
                                  make_discrete(0.5, { 1.0 / 3, 1.0 / 3, 1.0 / 3 }),
                                  make_uniform_smooth_convolution(1.0, 1.5, 2.0) };
  for (const auto& model : models) {
    std::vector<double> zeros;
    for (const auto& d : model.zeros())
      for (int j = -40; j <= 40; ++j) {
        double w = (std::arg(d.lambda) + 2.0 * pi * j) / d.a;
        if (std::abs(w) > 1e-9 && std::abs(w) <= 12.0)
          zeros.push_back(w);
      }
    for (double w : zeros)
      EXPECT_LT(std::abs(model.g_hat(w)), 1e-8) << model.tag() << " " << w;
    for (int i = 0; i <= 2000; ++i) {
      double w = -10.0 + 20.0 * i / 2000.0;
      bool far = true;
      for (double z : zeros)
        far = far && std::abs(w - z) >= 0.1;
      if (far) {
        EXPECT_GT(std::abs(model.g_hat(w)), 1e-4) << model.tag() << " " << w;
      }
    }
  }
}

TEST(symmetry_and_growth, builtin_models)
{
  std::vector<ErrorModel> models{ make_uniform(2.0),
                                  make_uniform_convolution({ 1.0, 0.4 }, { 2, 1 }),
                                  make_binomial(2),
                                  make_discrete(1.0, { 0.2, 0.5, 0.3 }),
                                  make_uniform_smooth_convolution(1.0, 1.0, 1.0) };
  for (const auto& model : models) {
    const auto& s = model.smooth();
    for (double w = 0.05; w < 60.0; w += 0.173) {
      EXPECT_NEAR(std::abs(model.g_hat(-w) - std::conj(model.g_hat(w))), 0.0, 1e-14);
      EXPECT_NEAR(std::abs(model.psi(-w) - std::conj(model.psi(w))),
                  0.0,
                  1e-12 * std::abs(model.psi(w)));
      if (w >= s.omega0) {
        double v = std::abs(model.psi(w)), g = std::pow(w, s.gamma);
        EXPECT_GE(v, s.d1 * g * (1 - 1e-12)) << model.tag();
        EXPECT_LE(v, s.d2 * g * (1 + 1e-12)) << model.tag();
      }
    }
  }
}

TEST(psi_derivative, analytic_and_fallback)
{
  auto model = make_uniform(1.0);
  EXPECT_NEAR(std::abs(model.psi_derivative(0, 2.0) - (-4.0 * I * std::exp(2.0 * I))),
              0.0,
              1e-14);
  // d/dz of -2 z e^z is -2 e^z (1 + z)
  for (double w : { 0.0, 1.5, -4.0 }) {
    cplx z = I * w;
    EXPECT_NEAR(std::abs(model.psi_derivative(1, w) - (-2.0 * std::exp(z) * (1.0 + z))),
                0.0,
                1e-13);
    EXPECT_LE(std::abs(model.psi_derivative(1, w)), 2.0 * (1.0 + std::abs(w)) + 1e-12);
  }
  EXPECT_THROW(model.psi_derivative(7, 1.0), unsupported_order);

  // Cauchy-integral derivatives against symbolic ones
  auto smooth = make_uniform_smooth_convolution(1.0, 2.0, 1.5);
  double scale = -2.0 * std::pow(1.5, -2.0);
  auto d1 = [&](cplx z) {
    return scale * std::exp(z) *
           ((z + 1.5) * (z + 1.5) + z * (z + 1.5) * (z + 1.5) + 2.0 * z * (z + 1.5));
  };
  for (double w : { 0.0, 2.0, 9.0 })
    EXPECT_NEAR(std::abs(smooth.psi_derivative(1, w) - d1(I * w)),
                0.0,
                1e-10 * std::abs(d1(I * w)));

  // user-supplied part without derivative falls back to differences
  SmoothPart custom = make_uniform(1.0).smooth();
  custom.derivative = nullptr;
  ErrorModel fd(make_uniform(1.0).zeros(), custom, { -10.0, 10.0 }, "custom");
  for (double w : { 0.3, 3.0 })
    EXPECT_NEAR(std::abs(fd.psi_derivative(1, w) - model.psi_derivative(1, w)),
                0.0,
                1e-6 * (1.0 + std::abs(w)));
}

TEST(error_model, invariant_checks)
{
  SmoothPart s = make_uniform(1.0).smooth();
  EXPECT_THROW(ErrorModel({ { 2.0, cplx(0.9, 0.0), 1 } }, s, { -1, 1 }, "bad"),
               invalid_parameter);
  EXPECT_THROW(ErrorModel({ { 2.0, 1.0, 1 }, { 2.0, 1.0, 1 } }, s, { -1, 1 }, "dup"),
               invalid_parameter);
  EXPECT_THROW(ErrorModel({ { 1.0, 1.0, 1 } }, s, { -1, 1 }, "not normalized"),
               numerical_failure);
}
