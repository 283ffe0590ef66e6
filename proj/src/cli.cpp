#include "deconv/cli.hpp"
#include "deconv/config.hpp"
#include "deconv/errors.hpp"
#include "deconv/quadrature.hpp"
#include "deconv/reconstruction.hpp"
#include "deconv/zero_set.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

namespace deconv {

namespace {

namespace fs = std::filesystem;

struct ErrorFlags
{
  std::string config;
  std::string kind;
  double theta = 1.0;
  std::vector<double> thetas;
  std::vector<int> mults;
  std::vector<double> probs;
  double step = 1.0;
  std::optional<int> first_index;
  int m = 1;
  double shape = 1.0;
  double rate = 1.0;
};

void add_error_flags(CLI::App* cmd, ErrorFlags& f)
{
  cmd->add_option("--config", f.config, "take the error model from a config file");
  cmd->add_option("--error", f.kind, "uniform | uniform_convolution | discrete | binomial | uniform_gamma");
  cmd->add_option("--theta", f.theta, "uniform half-width");
  cmd->add_option("--thetas", f.thetas, "half-widths (comma separated)")->delimiter(',');
  cmd->add_option("--mults", f.mults, "multiplicities (comma separated)")->delimiter(',');
  cmd->add_option("--probs", f.probs, "lattice probabilities (comma separated)")->delimiter(',');
  cmd->add_option("--step", f.step, "lattice step");
  cmd->add_option("--first-index", f.first_index, "lattice index of the first probability");
  cmd->add_option("--m", f.m, "binomial size");
  cmd->add_option("--shape", f.shape, "gamma shape");
  cmd->add_option("--rate", f.rate, "gamma rate");
}

ErrorModel model_from_flags(const ErrorFlags& f)
{
  if (!f.config.empty()) {
    if (!f.kind.empty())
      throw invalid_parameter("give either --config or --error, not both");
    return make_error_model(load_config(f.config).error);
  }
  if (f.kind.empty())
    throw invalid_parameter("an error model is required (--error or --config)");
  ErrorDecl d;
  d.kind = f.kind;
  d.theta = f.theta;
  d.thetas = f.thetas;
  d.mults = f.mults;
  d.probs = f.probs;
  d.step = f.step;
  d.first_index = f.first_index;
  d.m = f.m;
  d.shape = f.shape;
  d.rate = f.rate;
  try {
    return make_error_model(d);
  } catch (const invalid_parameter& e) {
    throw invalid_parameter(std::string("--error ") + f.kind + ": " + e.what());
  }
}

std::string join_args(const std::vector<std::string>& args)
{
  std::string out;
  for (const auto& a : args)
    out += (out.empty() ? "" : " ") + a;
  return out;
}

void write_header(std::ostream& os, const std::string& hash, const std::string& columns)
{
  os << "# config_hash=" << hash << " version=" << tool_version << "\n" << columns << "\n";
}

// writes to `path`, or to `fallback` when path is empty
template <typename F>
void emit(const std::string& path, std::ostream& fallback, F body)
{
  if (path.empty()) {
    body(fallback);
    return;
  }
  std::ofstream file(path);
  if (!file)
    throw std::runtime_error("cannot open '" + path + "' for writing");
  body(file);
  if (!file)
    throw std::runtime_error("write to '" + path + "' failed");
}

std::vector<double> linspace(double a, double b, int points)
{
  if (points < 2)
    throw invalid_parameter("--points must be at least 2");
  if (!(a < b))
    throw invalid_parameter("grid needs from < to");
  std::vector<double> out(static_cast<size_t>(points));
  for (int i = 0; i < points; ++i)
    out[static_cast<size_t>(i)] = a + (b - a) * i / (points - 1);
  return out;
}

int cmd_kernel(const std::string& hash,
               int k0,
               int derivs,
               int points,
               bool deconv,
               const ErrorFlags& ef,
               double h,
               int n_cap,
               const std::string& side_name,
               std::optional<double> from,
               std::optional<double> to,
               const std::string& out_path,
               std::ostream& out)
{
  if (derivs < 0 || derivs > 8)
    throw invalid_parameter("--derivs must lie in 0..8");
  FlatKernel K = build_kernel(k0);
  if (!deconv) {
    auto grid = linspace(from.value_or(-1.0), to.value_or(1.0), points);
    std::string cols = "t,K";
    for (int d = 1; d <= derivs; ++d)
      cols += ",K" + std::to_string(d);
    emit(out_path, out, [&](std::ostream& os) {
      write_header(os, hash, cols);
      for (double t : grid) {
        os << format_number(t);
        for (int d = 0; d <= derivs; ++d)
          os << "," << format_number(K.eval(d, t));
        os << "\n";
      }
    });
    return 0;
  }
  if (side_name != "plus" && side_name != "minus")
    throw invalid_parameter("--side must be plus or minus");
  if (!(h > 0))
    throw invalid_parameter("--bandwidth must be positive");
  auto model = model_from_flags(ef);
  Side side = side_name == "plus" ? Side::plus : Side::minus;
  DeconvolutionKernel L(build_sequence(model, n_cap), make_base(model, K, h), side);
  auto [lo, hi] = L.reach();
  auto grid = linspace(from.value_or(lo), to.value_or(hi), points);
  emit(out_path, out, [&](std::ostream& os) {
    write_header(os, hash, "t,L");
    for (double t : grid)
      os << format_number(t) << "," << format_number(L(t)) << "\n";
  });
  return 0;
}

int cmd_coeffs(const std::string& hash, const ErrorFlags& ef, int n_cap, const std::string& out_path, std::ostream& out)
{
  if (n_cap < 0)
    throw invalid_parameter("--n must be nonnegative");
  auto seq = build_sequence(model_from_flags(ef), n_cap);
  emit(out_path, out, [&](std::ostream& os) {
    write_header(os, hash, "ell,c_plus_re,c_plus_im,c_minus_re,c_minus_im");
    for (const auto& e : seq.entries)
      os << format_number(e.ell) << "," << format_number(e.c_plus.real()) << ","
         << format_number(e.c_plus.imag()) << "," << format_number(e.c_minus.real()) << ","
         << format_number(e.c_minus.imag()) << "\n";
  });
  return 0;
}

int cmd_estimate(const std::string& config_path,
                 const std::string& sample_path,
                 std::optional<double> from,
                 std::optional<double> to,
                 int points,
                 std::optional<double> h,
                 std::optional<int> n_cap,
                 const std::string& out_path,
                 std::ostream& out,
                 std::ostream& err)
{
  auto config = load_config(config_path);
  auto ys = read_column(sample_path);
  if (ys.size() < 2)
    throw invalid_parameter("sample '" + sample_path + "' needs at least two values");
  auto model = make_error_model(config.error);
  TuningOptions opts;
  opts.max_cap = config.max_cap;
  double order = config.p ? *config.p : default_moment_order(model, config.risk.kind);
  auto tuning = select_tuning(model, config.alpha, order, config.a_const, config.b_const, ys.size(),
                              config.risk.kind, opts);
  auto spec = tuned_spec(model, config.alpha, config.p, config.a_const, config.b_const, ys.size(),
                         config.risk.kind, config.k0, opts);
  if (h)
    spec.h = *h;
  if (n_cap)
    spec.n_cap = *n_cap;
  Estimator est(spec);
  for (const auto& w : tuning.warnings)
    err << "warning: " << w << "\n";
  for (const auto& w : est.warnings())
    err << "warning: " << w << "\n";

  Sample sample(std::move(ys));
  auto grid = linspace(from.value_or(sample.values().front()), to.value_or(sample.values().back()), points);
  auto values = est.estimate_grid(sample, grid);
  std::string hash = fnv1a_hex(serialize_config(config) + "\n" + fnv1a_hex(join_args({ sample_path })));
  emit(out_path, out, [&](std::ostream& os) {
    write_header(os, hash, "x,f_hat");
    for (size_t i = 0; i < grid.size(); ++i)
      os << format_number(grid[i]) << "," << format_number(values[i]) << "\n";
  });
  return 0;
}

int cmd_simulate(const std::string& config_path,
                 bool plot,
                 std::optional<int> workers,
                 const std::string& out_dir_flag,
                 std::ostream& out,
                 std::ostream& err)
{
  auto config = load_config(config_path);
  std::string hash = config_hash(config);
  if (workers) {
    if (*workers < 1)
      throw invalid_parameter("--workers must be at least 1");
    config.workers = *workers;
  }
  std::string dir = out_dir_flag.empty() ? resolved_output_dir(config) : out_dir_flag;
  fs::create_directories(dir);

  auto report = rate_experiment(make_experiment(config));
  for (const auto& w : report.warnings)
    err << "warning: " << w << "\n";

  emit((fs::path(dir) / "rates.csv").string(), out, [&](std::ostream& os) {
    write_header(os, hash, "n,risk,stderr,h,n_cap");
    for (size_t i = 0; i < report.n_values.size(); ++i)
      os << report.n_values[i] << "," << format_number(report.risks[i]) << ","
         << format_number(report.stderrs[i]) << "," << format_number(report.bandwidths[i]) << ","
         << report.caps[i] << "\n";
  });
  emit((fs::path(dir) / "report.csv").string(), out, [&](std::ostream& os) {
    write_header(os, hash, "slope,ci_lo,ci_hi,theoretical_slope");
    os << format_number(report.slope) << "," << format_number(report.slope_ci.first) << ","
       << format_number(report.slope_ci.second) << "," << format_number(report.theoretical_slope)
       << "\n";
  });
  if (plot || config.plot) {
    std::string title = config.error.kind + " error, " + config.density.kind + " density";
    emit((fs::path(dir) / "plot.svg").string(), out,
         [&](std::ostream& os) { os << render_svg(report, title); });
  }
  out << "slope " << format_number(report.slope) << " [" << format_number(report.slope_ci.first)
      << ", " << format_number(report.slope_ci.second) << "], theoretical "
      << format_number(report.theoretical_slope) << "\n";
  out << "wrote " << (fs::path(dir) / "rates.csv").string() << "\n";
  return 0;
}

int cmd_check(std::ostream& out)
{
  bool ok = true;
  for (const auto& r : run_checks()) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.detail << ")\n";
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

double sup_gap(const BaseFunction& a, const BaseFunction& b)
{
  auto [lo, hi] = a.support();
  double pad = 0.5 * (hi - lo);
  double gap = 0.0;
  const int count = 20000;
  for (int i = 0; i <= count; ++i) {
    double t = lo - pad + (hi - lo + 2 * pad) * i / count;
    gap = std::max(gap, std::abs(a(t) - b(t)));
  }
  return gap;
}

std::string sci(double v)
{
  std::ostringstream s;
  s.precision(3);
  s << std::scientific << v;
  return s.str();
}

} // namespace

std::string format_number(double v)
{
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<double> read_column(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open sample file '" + path + "'");
  std::vector<double> out;
  std::string line;
  int lineno = 0;
  bool seen_row = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#')
      continue;
    auto last = line.find_last_not_of(" \t\r");
    std::string cell = line.substr(first, last - first + 1);
    if (cell.find(',') != std::string::npos)
      throw invalid_parameter(path + ":" + std::to_string(lineno) + ": expected a single column");
    double v = 0.0;
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    bool numeric = res.ec == std::errc() && res.ptr == cell.data() + cell.size();
    if (!numeric) {
      // a header is allowed as the first row only
      if (!seen_row && out.empty()) {
        seen_row = true;
        continue;
      }
      throw invalid_parameter(path + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
    }
    if (!std::isfinite(v))
      throw invalid_parameter(path + ":" + std::to_string(lineno) + ": value is not finite");
    seen_row = true;
    out.push_back(v);
  }
  return out;
}

std::vector<CheckResult> run_checks()
{
  std::vector<CheckResult> results;
  auto record = [&](const std::string& name, auto body) {
    try {
      auto [passed, detail] = body();
      results.push_back({ name, passed, detail });
    } catch (const std::exception& e) {
      results.push_back({ name, false, std::string("exception: ") + e.what() });
    }
  };

  record("kernel moments", [] {
    double worst = 0.0;
    for (int k0 : { 1, 3, 5 }) {
      FlatKernel K = build_kernel(k0);
      for (int j = 0; j <= k0; ++j) {
        double m = integrate_gl([&](double t) { return std::pow(t, j) * K(t); }, -1.0, 1.0, 200);
        worst = std::max(worst, std::abs(m - (j == 0 ? 1.0 : 0.0)));
      }
    }
    return std::pair{ worst < 1e-8, "max moment error " + sci(worst) };
  });

  record("uniform coefficients", [] {
    auto seq = build_sequence(make_uniform(1.0), 20);
    bool ok = seq.entries.size() == 21;
    for (size_t j = 0; j < seq.entries.size(); ++j) {
      const auto& e = seq.entries[j];
      ok = ok && e.ell == 2.0 * static_cast<double>(j) && e.c_plus == cplx(1.0) &&
           e.c_minus == cplx(-1.0);
    }
    return std::pair{ ok, std::string("c_plus = 1, c_minus = -1 on ell = 2j") };
  });

  record("m-fold uniform coefficients", [] {
    auto seq = build_sequence(make_uniform_convolution({ 1.0 }, { 3 }), 30);
    bool ok = true;
    for (size_t j = 0; j < seq.entries.size(); ++j)
      ok = ok && seq.entries[j].c_plus.real() ==
                   static_cast<double>(weak_composition_count(j, 3));
    return std::pair{ ok, std::string("c_plus = binom(j + 2, 2)") };
  });

  record("closed form vs fft", [] {
    FlatKernel K = build_kernel(3);
    double worst = 0.0;
    for (const auto& model : { make_uniform(1.0), make_binomial(2) })
      worst = std::max(worst, sup_gap(base_closed_form(model, K, 0.1), base_fft(model, K, 0.1)));
    return std::pair{ worst < 1e-6, "sup gap " + sci(worst) };
  });

  record("bias identity", [] {
    auto model = make_uniform(1.0);
    FlatKernel K = build_kernel(3);
    const double h = 0.1;
    const int n_cap = 100;
    auto f = density_cauchy_power(3.0);
    auto fy = observation_density(f, model);
    DeconvolutionKernel L(build_sequence(model, n_cap), make_base(model, K, h), Side::plus);
    double worst = 0.0;
    for (double x0 : { 0.0, 0.5, 2.0 }) {
      double lhs = kernel_expectation(L, fy, x0);
      double rhs = smoothed_density(K, h, f.pdf, x0) +
                   truncation_term(model, K, h, n_cap, f.pdf, x0, Side::plus);
      worst = std::max(worst, std::abs(lhs - rhs));
    }
    return std::pair{ worst < 1e-4, "max gap " + sci(worst) };
  });

  record("moment conditions", [] {
    auto two = make_uniform_convolution({ 1.0 }, { 2 });
    bool below = !select_tuning(two, 2.0, 1.0, 1, 1, 1000).warnings.empty();
    bool at = select_tuning(two, 2.0, 2.0, 1, 1, 1000).warnings.empty();
    bool l2 = !select_tuning(two, 2.0, 3.0, 1, 1, 1000, RiskKind::l2).warnings.empty();
    return std::pair{ below && at && l2, std::string("threshold warnings for a double uniform zero") };
  });
  return results;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{ "Deconvolution estimators for errors whose characteristic function vanishes",
                "deconv" };
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version);

  auto* kernel = app.add_subcommand("kernel", "tabulate the flat-top kernel or a deconvolution kernel");
  int k0 = 3, derivs = 2, points = 201, n_cap = 3;
  bool deconv = false;
  double h = 0.2;
  std::string side = "plus", out_path;
  std::optional<double> from, to;
  ErrorFlags kernel_flags;
  kernel->add_option("--k0", k0, "kernel order")->capture_default_str();
  kernel->add_option("--derivs", derivs, "derivative columns")->capture_default_str();
  kernel->add_option("--points", points, "grid points")->capture_default_str();
  kernel->add_option("--from", from, "grid start");
  kernel->add_option("--to", to, "grid end");
  kernel->add_flag("--deconv", deconv, "tabulate the deconvolution kernel instead");
  kernel->add_option("--bandwidth", h, "bandwidth (with --deconv)")->capture_default_str();
  kernel->add_option("--n", n_cap, "truncation N (with --deconv)")->capture_default_str();
  kernel->add_option("--side", side, "plus | minus (with --deconv)")->capture_default_str();
  kernel->add_option("--out", out_path, "output file (stdout by default)");
  add_error_flags(kernel, kernel_flags);

  auto* coeffs = app.add_subcommand("coeffs", "dump the zero-set coefficient sequence");
  ErrorFlags coeff_flags;
  int coeff_n = 0;
  std::string coeff_out;
  add_error_flags(coeffs, coeff_flags);
  coeffs->add_option("--n", coeff_n, "truncation N")->required();
  coeffs->add_option("--out", coeff_out, "output file (stdout by default)");

  auto* estimate = app.add_subcommand("estimate", "estimate the density from a sample");
  std::string est_config, est_sample, est_out;
  std::optional<double> est_from, est_to, est_h;
  std::optional<int> est_n;
  int est_points = 201;
  estimate->add_option("--config", est_config, "config file with the error model and tuning")->required();
  estimate->add_option("--sample", est_sample, "single-column CSV of observations")->required();
  estimate->add_option("--from", est_from, "grid start (sample minimum by default)");
  estimate->add_option("--to", est_to, "grid end (sample maximum by default)");
  estimate->add_option("--points", est_points, "grid points")->capture_default_str();
  estimate->add_option("--bandwidth", est_h, "bandwidth override");
  estimate->add_option("--n", est_n, "truncation override");
  estimate->add_option("--out", est_out, "output file (stdout by default)");

  auto* simulate = app.add_subcommand("simulate", "run a Monte Carlo rate experiment");
  std::string sim_config, sim_dir;
  bool sim_plot = false;
  std::optional<int> sim_workers;
  simulate->add_option("config", sim_config, "experiment config file")->required();
  simulate->add_flag("--plot", sim_plot, "also write plot.svg");
  simulate->add_option("--workers", sim_workers, "worker threads");
  simulate->add_option("--output-dir", sim_dir, "output directory override");

  auto* check = app.add_subcommand("check", "run the oracle checks");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    std::string hash = fnv1a_hex(join_args(args));
    if (kernel->parsed())
      return cmd_kernel(hash, k0, derivs, points, deconv, kernel_flags, h, n_cap, side, from, to,
                        out_path, out);
    if (coeffs->parsed())
      return cmd_coeffs(hash, coeff_flags, coeff_n, coeff_out, out);
    if (estimate->parsed())
      return cmd_estimate(est_config, est_sample, est_from, est_to, est_points, est_h, est_n, est_out,
                          out, err);
    if (simulate->parsed())
      return cmd_simulate(sim_config, sim_plot, sim_workers, sim_dir, out, err);
    if (check->parsed())
      return cmd_check(out);
  } catch (const config_error& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const invalid_parameter& e) {
    err << "invalid parameter: " << e.what() << "\n";
    return 2;
  } catch (const numerical_failure& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

} // namespace deconv
