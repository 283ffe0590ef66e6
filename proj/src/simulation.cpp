#include "deconv/simulation.hpp"
#include "deconv/errors.hpp"
#include "deconv/kernel.hpp"
#include "deconv/quadrature.hpp"

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace deconv {

namespace {

constexpr double pi = std::numbers::pi;
constexpr double inf = std::numeric_limits<double>::infinity();

// Inverse CDF on a uniform grid in u, stored as angles so the heavy tails stay
// bounded; monotone cubic between nodes, exact quantile in the outer cells.
struct QuantileTable
{
  static constexpr int cells = 100000;
  static constexpr int exact_cells = 64;
  std::vector<double> angle, slope;
  std::function<double(double)> exact;

  double operator()(double u) const
  {
    double s = u * cells;
    auto i = static_cast<int>(s);
    if (i < exact_cells || i >= cells - exact_cells)
      return exact(u);
    double t = s - i;
    double t2 = t * t, t3 = t2 * t;
    double a = (2 * t3 - 3 * t2 + 1) * angle[i] + (t3 - 2 * t2 + t) * slope[i] +
               (-2 * t3 + 3 * t2) * angle[i + 1] + (t3 - t2) * slope[i + 1];
    return std::tan(a);
  }
};

std::shared_ptr<const QuantileTable> build_table(std::function<double(double)> quantile)
{
  auto table = std::make_shared<QuantileTable>();
  int n = QuantileTable::cells;
  table->exact = quantile;
  table->angle.resize(n + 1);
  table->angle[0] = -pi / 2;
  table->angle[n] = pi / 2;
  for (int i = 1; i < n; ++i)
    table->angle[i] = std::atan(quantile(static_cast<double>(i) / n));
  // Fritsch-Carlson slopes, per unit cell
  std::vector<double> delta(n);
  for (int i = 0; i < n; ++i)
    delta[i] = table->angle[i + 1] - table->angle[i];
  auto& m = table->slope;
  m.assign(n + 1, 0.0);
  m[0] = delta[0];
  m[n] = delta[n - 1];
  for (int i = 1; i < n; ++i)
    m[i] = (delta[i - 1] * delta[i] <= 0) ? 0.0 : 0.5 * (delta[i - 1] + delta[i]);
  for (int i = 0; i < n; ++i) {
    if (delta[i] == 0.0) {
      m[i] = m[i + 1] = 0.0;
      continue;
    }
    double a = m[i] / delta[i], b = m[i + 1] / delta[i];
    double r = a * a + b * b;
    if (r > 9.0) {
      double tau = 3.0 / std::sqrt(r);
      m[i] = tau * a * delta[i];
      m[i + 1] = tau * b * delta[i];
    }
  }
  return table;
}

std::shared_ptr<const QuantileTable> cached_table(double r,
                                                  const std::function<double(double)>& quantile)
{
  static std::mutex mutex;
  static std::map<double, std::shared_ptr<const QuantileTable>> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(r);
  if (it != cache.end())
    return it->second;
  auto table = build_table(quantile);
  cache.emplace(r, table);
  return table;
}

template<typename Job>
void run_parallel(int count, int workers, Job job)
{
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i)
      job(i);
    return;
  }
  std::atomic<int> next{ 0 };
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure)
            failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool)
    t.join();
  if (failure)
    std::rethrow_exception(failure);
}

// f convolved with Uniform(-theta, theta), given f and its CDF
std::pair<Density, Density> smooth_uniform(Density cdf, double theta)
{
  Density next = [cdf, theta](double y) {
    return (cdf(y + theta) - cdf(y - theta)) / (2.0 * theta);
  };
  Density next_cdf = [cdf, theta](double y) {
    // integral of the averaged CDF
    std::function<double(double)> g = cdf;
    return integrate_panels(g, y - theta, y + theta, 2, 20) / (2.0 * theta);
  };
  return { next, next_cdf };
}

} // namespace

std::uint64_t replication_seed(std::uint64_t seed, std::size_t n, int rep)
{
  return stream_seed(stream_seed(seed, n), static_cast<std::uint64_t>(rep));
}

TestDensity density_cauchy_power(double r)
{
  if (!(r > 0.5))
    throw invalid_parameter("Cauchy power r must exceed 1/2");
  double nu = 2.0 * r - 1.0;
  double norm = std::exp(std::lgamma(r) - std::lgamma(r - 0.5)) / std::sqrt(pi);
  double scale = std::sqrt(nu);
  boost::math::students_t_distribution<double> t(nu);

  TestDensity d;
  std::ostringstream name;
  name << "cauchy_power(" << r << ")";
  d.name = name.str();
  d.pdf = [norm, r](double x) { return norm * std::pow(1.0 + x * x, -r); };
  d.cdf = [t, scale](double x) {
    if (std::isinf(x))
      return x > 0 ? 1.0 : 0.0;
    return boost::math::cdf(t, x * scale);
  };
  d.quantile = [t, scale](double u) {
    if (u <= 0.0)
      return -inf;
    if (u >= 1.0)
      return inf;
    return boost::math::quantile(t, u) / scale;
  };
  auto table = cached_table(r, d.quantile);
  d.sampler = [table](Rng& rng) {
    double u = rng.uniform();
    while (u == 0.0)
      u = rng.uniform();
    return (*table)(u);
  };
  d.alpha_doc = inf;
  d.p_doc = 2.0 * r - 1.0 - 0.1;
  return d;
}

TestDensity density_smooth_compact(double center, double width)
{
  if (!(width > 0))
    throw invalid_parameter("width must be positive");
  std::function<double(double)> b = bump;
  double z = integrate_adaptive(b, -1.0, 1.0, 1e-15);
  TestDensity d;
  std::ostringstream name;
  name << "smooth_compact(" << center << "," << width << ")";
  d.name = name.str();
  d.pdf = [=](double x) { return bump((x - center) / width) / (width * z); };
  d.cdf = [=](double x) {
    double u = (x - center) / width;
    if (u <= -1)
      return 0.0;
    if (u >= 1)
      return 1.0;
    return integrate_adaptive(b, -1.0, u, 1e-14) / z;
  };
  auto cdf = d.cdf;
  d.quantile = [=](double u) {
    if (u <= 0)
      return center - width;
    if (u >= 1)
      return center + width;
    double lo = center - width, hi = center + width;
    for (int i = 0; i < 60; ++i) {
      double mid = 0.5 * (lo + hi);
      (cdf(mid) < u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  double top = std::exp(-1.0);
  d.sampler = [=](Rng& rng) {
    while (true) {
      double u = rng.uniform(-1.0, 1.0);
      if (rng.uniform() * top < bump(u))
        return center + width * u;
    }
  };
  d.alpha_doc = inf;
  d.p_doc = inf;
  return d;
}

double sample_error(const ErrorModel& model, Rng& rng)
{
  const auto& law = model.law();
  if (const auto* u = std::get_if<UniformLaw>(&law)) {
    double e = 0.0;
    for (size_t k = 0; k < u->thetas.size(); ++k)
      for (int j = 0; j < u->mults[k]; ++j)
        e += rng.uniform(-u->thetas[k], u->thetas[k]);
    return e;
  }
  if (const auto* dl = std::get_if<DiscreteLaw>(&law)) {
    double v = rng.uniform(), acc = 0.0;
    size_t i = 0;
    for (; i + 1 < dl->probs.size(); ++i) {
      acc += dl->probs[i];
      if (v < acc)
        break;
    }
    return dl->step * (dl->first_index + static_cast<int>(i));
  }
  if (const auto* ug = std::get_if<UniformGammaLaw>(&law))
    return rng.uniform(-ug->theta, ug->theta) + rng.gamma(ug->shape, ug->rate);
  throw invalid_parameter("no sampler for error law " + model.tag());
}

std::vector<double> sample_observations(const TestDensity& f,
                                        const ErrorModel& model,
                                        std::size_t n,
                                        std::uint64_t seed)
{
  if (n < 1)
    throw invalid_parameter("sample size must be positive");
  Rng rng(seed);
  std::vector<double> ys(n);
  for (auto& y : ys) {
    double x = f.sampler(rng);
    y = x + sample_error(model, rng);
  }
  return ys;
}

Density observation_density(const TestDensity& f, const ErrorModel& model)
{
  const auto& law = model.law();
  if (const auto* u = std::get_if<UniformLaw>(&law)) {
    Density pdf = f.pdf, cdf = f.cdf;
    for (size_t k = 0; k < u->thetas.size(); ++k)
      for (int j = 0; j < u->mults[k]; ++j)
        std::tie(pdf, cdf) = smooth_uniform(cdf, u->thetas[k]);
    return pdf;
  }
  if (const auto* dl = std::get_if<DiscreteLaw>(&law)) {
    auto pdf = f.pdf;
    DiscreteLaw copy = *dl;
    return [pdf, copy](double y) {
      double acc = 0.0;
      for (size_t i = 0; i < copy.probs.size(); ++i)
        acc += copy.probs[i] * pdf(y - copy.step * (copy.first_index + static_cast<int>(i)));
      return acc;
    };
  }
  if (const auto* ug = std::get_if<UniformGammaLaw>(&law)) {
    auto pdf = smooth_uniform(f.cdf, ug->theta).first;
    boost::math::gamma_distribution<double> g(ug->shape, 1.0 / ug->rate);
    double top = boost::math::quantile(boost::math::complement(g, 1e-15));
    return [pdf, g, top](double y) {
      std::function<double(double)> integrand = [&](double s) {
        return s <= 0 ? 0.0 : pdf(y - s) * boost::math::pdf(g, s);
      };
      return integrate_adaptive(integrand, 0.0, top, 1e-12);
    };
  }
  throw invalid_parameter("no observation density for error law " + model.tag());
}

std::pair<double, double> rms_with_stderr(const std::vector<double>& losses)
{
  if (losses.empty())
    throw invalid_parameter("no losses");
  NeumaierSum sum;
  for (double l : losses)
    sum.add(l);
  double n = static_cast<double>(losses.size());
  double mean = sum.value() / n;
  double risk = std::sqrt(mean);
  if (losses.size() < 2 || risk == 0.0)
    return { risk, 0.0 };
  NeumaierSum var;
  for (double l : losses)
    var.add((l - mean) * (l - mean));
  double se_mean = std::sqrt(var.value() / (n - 1.0) / n);
  return { risk, se_mean / (2.0 * risk) };
}

RiskEstimate pointwise_risk(const TestDensity& f,
                            const ErrorModel& model,
                            double x0,
                            std::size_t n,
                            int reps,
                            std::uint64_t seed,
                            const RiskSettings& settings)
{
  if (reps < 1)
    throw invalid_parameter("need at least one replication");
  auto spec = tuned_spec(model,
                         settings.alpha,
                         settings.p,
                         settings.a_const,
                         settings.b_const,
                         n,
                         RiskKind::pointwise,
                         settings.k0,
                         settings.tuning);
  auto tuning = select_tuning(
    model, settings.alpha, spec.p, settings.a_const, settings.b_const, n, RiskKind::pointwise,
    settings.tuning);
  Estimator est(spec);
  double truth = f.pdf(x0);
  RiskEstimate out;
  out.losses.assign(reps, 0.0);
  run_parallel(reps, settings.workers, [&](int rep) {
    Sample sample(sample_observations(f, model, n, replication_seed(seed, n, rep)));
    double e = est.estimate_point(sample, x0) - truth;
    out.losses[rep] = e * e;
  });
  std::tie(out.risk, out.stderr_risk) = rms_with_stderr(out.losses);
  out.h = spec.h;
  out.n_cap = spec.n_cap;
  out.warnings = tuning.warnings;
  out.warnings.insert(out.warnings.end(), est.warnings().begin(), est.warnings().end());
  return out;
}

std::vector<double> l2_grid(const TestDensity& f,
                            const ErrorModel& model,
                            const Estimator& estimator)
{
  double lo = f.quantile(0.0005), hi = f.quantile(0.9995);
  // error range
  double e_lo = 0.0, e_hi = 0.0;
  const auto& law = model.law();
  if (const auto* u = std::get_if<UniformLaw>(&law)) {
    for (size_t k = 0; k < u->thetas.size(); ++k) {
      e_lo -= u->thetas[k] * u->mults[k];
      e_hi += u->thetas[k] * u->mults[k];
    }
  } else if (const auto* dl = std::get_if<DiscreteLaw>(&law)) {
    e_lo = dl->step * dl->first_index;
    e_hi = dl->step * (dl->first_index + static_cast<int>(dl->probs.size()) - 1);
  } else if (const auto* ug = std::get_if<UniformGammaLaw>(&law)) {
    boost::math::gamma_distribution<double> g(ug->shape, 1.0 / ug->rate);
    e_lo = -ug->theta;
    e_hi = ug->theta + boost::math::quantile(g, 0.9995);
  }
  // x with y - x inside some kernel reach
  auto [p_lo, p_hi] = estimator.kernel(Side::plus).reach();
  auto [m_lo, m_hi] = estimator.kernel(Side::minus).reach();
  double a = std::min(lo + e_lo - p_hi, lo + e_lo - m_hi);
  double b = std::max(hi + e_hi - p_lo, hi + e_hi - m_lo);
  a = std::min(a, lo);
  b = std::max(b, hi);
  double step = estimator.spec().h / 8.0;
  auto count = static_cast<std::size_t>(std::ceil((b - a) / step));
  std::vector<double> grid(count + 1);
  for (std::size_t i = 0; i <= count; ++i)
    grid[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(count);
  return grid;
}

double l2_loss(const std::vector<double>& grid,
               const std::vector<double>& estimate,
               const std::function<double(double)>& truth)
{
  NeumaierSum acc;
  double prev = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double e = estimate[i] - truth(grid[i]);
    double sq = e * e;
    if (i > 0)
      acc.add(0.5 * (grid[i] - grid[i - 1]) * (sq + prev));
    prev = sq;
  }
  return acc.value();
}

RiskEstimate l2_risk(const TestDensity& f,
                     const ErrorModel& model,
                     std::size_t n,
                     int reps,
                     std::uint64_t seed,
                     const RiskSettings& settings,
                     std::optional<std::vector<double>> grid)
{
  if (reps < 1)
    throw invalid_parameter("need at least one replication");
  auto spec = tuned_spec(model,
                         settings.alpha,
                         settings.p,
                         settings.a_const,
                         settings.b_const,
                         n,
                         RiskKind::l2,
                         settings.k0,
                         settings.tuning);
  auto tuning = select_tuning(
    model, settings.alpha, spec.p, settings.a_const, settings.b_const, n, RiskKind::l2,
    settings.tuning);
  Estimator est(spec);
  std::vector<double> points = grid ? *grid : l2_grid(f, model, est);
  if (points.size() < 2 || !std::is_sorted(points.begin(), points.end()))
    throw invalid_parameter("L2 grid must be sorted with at least two points");
  std::vector<double> truth(points.size());
  for (size_t i = 0; i < points.size(); ++i)
    truth[i] = f.pdf(points[i]);

  RiskEstimate out;
  out.losses.assign(reps, 0.0);
  run_parallel(reps, settings.workers, [&](int rep) {
    Sample sample(sample_observations(f, model, n, replication_seed(seed, n, rep)));
    auto values = est.estimate_grid(sample, points);
    NeumaierSum acc;
    double prev = 0.0;
    for (size_t i = 0; i < points.size(); ++i) {
      double e = values[i] - truth[i];
      double sq = e * e;
      if (i > 0)
        acc.add(0.5 * (points[i] - points[i - 1]) * (sq + prev));
      prev = sq;
    }
    out.losses[rep] = acc.value();
  });
  std::tie(out.risk, out.stderr_risk) = rms_with_stderr(out.losses);
  out.h = spec.h;
  out.n_cap = spec.n_cap;
  out.warnings = tuning.warnings;
  out.warnings.insert(out.warnings.end(), est.warnings().begin(), est.warnings().end());

  // squared mass of f outside the grid bounds the missed loss from below
  double left = f.cdf(points.front()), right = 1.0 - f.cdf(points.back());
  double f_edge = std::max(f.pdf(points.front()), f.pdf(points.back()));
  out.grid_truncation = std::sqrt(f_edge * (left + right));
  if (out.grid_truncation > 0.1 * out.risk)
    out.warnings.push_back("L2 grid truncation error exceeds 10% of the risk");
  return out;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y)
{
  if (x.size() != y.size() || x.size() < 2)
    throw invalid_parameter("line fit needs at least two matching points");
  double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0)
    throw invalid_parameter("line fit needs distinct abscissae");
  double slope = sxy / sxx;
  return { slope, my - slope * mx };
}

double theoretical_slope(const ErrorModel& model, double alpha)
{
  return -alpha / (2.0 * alpha + 2.0 * model.gamma() + 1.0);
}

RiskReport rate_experiment(const RateExperiment& ex)
{
  if (ex.n_grid.size() < 2)
    throw invalid_parameter("rate experiment needs at least two sample sizes");
  RiskReport report;
  double span = std::log10(static_cast<double>(ex.n_grid.back()) /
                           static_cast<double>(ex.n_grid.front()));
  if (ex.n_grid.size() < 4)
    report.warnings.push_back("fewer than 4 sample sizes; the fitted slope is fragile");
  if (span < 2.0) {
    std::ostringstream msg;
    msg << "sample sizes span " << std::setprecision(2) << span
        << " decades (< 2); the fitted slope is fragile";
    report.warnings.push_back(msg.str());
  }

  std::vector<std::vector<double>> losses;
  std::vector<double> log_n, log_risk;
  for (auto n : ex.n_grid) {
    RiskEstimate r = ex.settings.kind == RiskKind::pointwise
                       ? pointwise_risk(ex.density, ex.model, ex.settings.x0, n, ex.reps, ex.seed,
                                        ex.settings)
                       : l2_risk(ex.density, ex.model, n, ex.reps, ex.seed, ex.settings,
                                 ex.settings.grid);
    report.n_values.push_back(n);
    report.risks.push_back(r.risk);
    report.stderrs.push_back(r.stderr_risk);
    report.bandwidths.push_back(r.h);
    report.caps.push_back(r.n_cap);
    for (const auto& w : r.warnings)
      if (std::find(report.warnings.begin(), report.warnings.end(), w) == report.warnings.end())
        report.warnings.push_back(w);
    losses.push_back(std::move(r.losses));
    log_n.push_back(std::log(static_cast<double>(n)));
    log_risk.push_back(std::log(r.risk));
  }
  report.slope = fit_line(log_n, log_risk).slope;
  report.theoretical_slope = theoretical_slope(ex.model, ex.settings.alpha);

  // percentile bootstrap over replications
  Rng rng(stream_seed(ex.seed, 0xb0075ULL));
  std::vector<double> slopes;
  for (int b = 0; b < ex.bootstrap; ++b) {
    std::vector<double> resampled;
    for (const auto& l : losses) {
      NeumaierSum acc;
      for (size_t i = 0; i < l.size(); ++i)
        acc.add(l[static_cast<size_t>(rng.uniform() * static_cast<double>(l.size()))]);
      resampled.push_back(0.5 * std::log(acc.value() / static_cast<double>(l.size())));
    }
    slopes.push_back(fit_line(log_n, resampled).slope);
  }
  if (slopes.empty()) {
    report.slope_ci = { report.slope, report.slope };
  } else {
    std::sort(slopes.begin(), slopes.end());
    auto pick = [&](double q) {
      double pos = q * static_cast<double>(slopes.size() - 1);
      auto i = static_cast<size_t>(pos);
      double t = pos - static_cast<double>(i);
      return i + 1 < slopes.size() ? slopes[i] * (1 - t) + slopes[i + 1] * t : slopes[i];
    };
    report.slope_ci = { pick(0.025), pick(0.975) };
  }
  return report;
}

std::string render_svg(const RiskReport& report, const std::string& title)
{
  const double width = 640, height = 440, margin = 60;
  std::vector<double> xs, ys;
  for (size_t i = 0; i < report.n_values.size(); ++i) {
    xs.push_back(std::log10(static_cast<double>(report.n_values[i])));
    ys.push_back(std::log10(report.risks[i]));
  }
  double x0 = *std::min_element(xs.begin(), xs.end()), x1 = *std::max_element(xs.begin(), xs.end());
  double y0 = *std::min_element(ys.begin(), ys.end()), y1 = *std::max_element(ys.begin(), ys.end());
  // reference line through the centroid
  double cx = 0, cy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    cx += xs[i];
    cy += ys[i];
  }
  cx /= static_cast<double>(xs.size());
  cy /= static_cast<double>(xs.size());
  double r0 = cy + report.theoretical_slope * (x0 - cx), r1 = cy + report.theoretical_slope * (x1 - cx);
  y0 = std::min({ y0, r0, r1 }) - 0.05;
  y1 = std::max({ y1, r0, r1 }) + 0.05;
  if (x1 == x0)
    x1 = x0 + 1;
  auto px = [&](double x) { return margin + (x - x0) / (x1 - x0) * (width - 2 * margin); };
  auto py = [&](double y) { return height - margin - (y - y0) / (y1 - y0) * (height - 2 * margin); };

  std::ostringstream svg;
  svg << std::setprecision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title
      << "</text>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"" << height - 15
      << "\" text-anchor=\"middle\" font-size=\"13\">log10 n</text>\n";
  svg << "<text x=\"18\" y=\"" << height / 2 << "\" font-size=\"13\" transform=\"rotate(-90 18 "
      << height / 2 << ")\" text-anchor=\"middle\">log10 risk</text>\n";
  svg << "<line x1=\"" << px(x0) << "\" y1=\"" << py(r0) << "\" x2=\"" << px(x1) << "\" y2=\""
      << py(r1) << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
  svg << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (size_t i = 0; i < xs.size(); ++i)
    svg << px(xs[i]) << "," << py(ys[i]) << " ";
  svg << "\"/>\n";
  for (size_t i = 0; i < xs.size(); ++i)
    svg << "<circle cx=\"" << px(xs[i]) << "\" cy=\"" << py(ys[i])
        << "\" r=\"4\" fill=\"steelblue\"/>\n";
  svg << "<text x=\"" << width - margin << "\" y=\"" << margin
      << "\" text-anchor=\"end\" font-size=\"12\">fitted " << report.slope << ", reference "
      << report.theoretical_slope << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

} // namespace deconv
