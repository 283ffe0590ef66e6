#include "deconv/cli.hpp"
#include "deconv/config.hpp"
#include "deconv/errors.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <unistd.h>

using namespace deconv;
namespace fs = std::filesystem;

namespace {

struct Outcome
{
  int code;
  std::string out;
  std::string err;
};

Outcome call(const std::vector<std::string>& args)
{
  std::ostringstream out, err;
  int code = run(args, out, err);
  return { code, out.str(), err.str() };
}

std::vector<std::string> lines_of(const std::string& text)
{
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    out.push_back(line);
  return out;
}

std::vector<double> split_numbers(const std::string& line)
{
  std::vector<double> out;
  std::istringstream in(line);
  for (std::string cell; std::getline(in, cell, ',');)
    out.push_back(std::stod(cell));
  return out;
}

std::string slurp(const fs::path& p)
{
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class TempDir
{
public:
  TempDir()
  {
    path_ = fs::temp_directory_path() /
            ("deconv_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

private:
  fs::path path_;
  static inline int counter_ = 0;
};

void write(const fs::path& p, const std::string& text)
{
  std::ofstream(p) << text;
}

} // namespace

TEST(cli, coeffs_uniform_example)
{
  auto r = call({ "coeffs", "--error", "uniform", "--theta", "1", "--n", "5" });
  ASSERT_EQ(r.code, 0) << r.err;
  auto lines = lines_of(r.out);
  ASSERT_EQ(lines.size(), 8u);
  EXPECT_EQ(lines[0].rfind("# config_hash=", 0), 0u);
  EXPECT_NE(lines[0].find("version="), std::string::npos);
  EXPECT_EQ(lines[1], "ell,c_plus_re,c_plus_im,c_minus_re,c_minus_im");
  for (int j = 0; j <= 5; ++j) {
    auto row = split_numbers(lines[static_cast<size_t>(j) + 2]);
    EXPECT_EQ(row[0], 2.0 * j);
    EXPECT_EQ(row[1], 1.0);
    EXPECT_EQ(row[2], 0.0);
    EXPECT_EQ(row[3], -1.0);
  }
}

TEST(cli, coeffs_binomial_and_lists)
{
  auto r = call({ "coeffs", "--error", "binomial", "--m", "2", "--n", "3" });
  ASSERT_EQ(r.code, 0) << r.err;
  auto lines = lines_of(r.out);
  ASSERT_EQ(lines.size(), 6u);
  std::vector<double> expected{ 1, -2, 3, -4 };
  for (size_t i = 0; i < 4; ++i)
    EXPECT_EQ(std::abs(split_numbers(lines[i + 2])[1]), std::abs(expected[i]));

  auto conv = call({ "coeffs", "--error", "uniform_convolution", "--thetas", "1,2", "--mults", "1,1",
                     "--n", "2" });
  ASSERT_EQ(conv.code, 0) << conv.err;
  EXPECT_GT(lines_of(conv.out).size(), 3u);
}

TEST(cli, usage_errors)
{
  EXPECT_NE(call({}).code, 0);
  EXPECT_NE(call({ "frobnicate" }).code, 0);
  EXPECT_NE(call({ "coeffs", "--error", "uniform" }).code, 0);
  auto bad = call({ "coeffs", "--error", "uniform", "--theta", "-1", "--n", "3" });
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("theta"), std::string::npos) << bad.err;
  EXPECT_EQ(call({ "coeffs", "--n", "3" }).code, 2);
  EXPECT_EQ(call({ "--help" }).code, 0);
}

TEST(cli, kernel_table)
{
  auto r = call({ "kernel", "--k0", "3", "--derivs", "2", "--points", "11" });
  ASSERT_EQ(r.code, 0) << r.err;
  auto lines = lines_of(r.out);
  ASSERT_EQ(lines.size(), 13u);
  EXPECT_EQ(lines[1], "t,K,K1,K2");
  FlatKernel K = build_kernel(3);
  for (size_t i = 2; i < lines.size(); ++i) {
    auto row = split_numbers(lines[i]);
    ASSERT_EQ(row.size(), 4u);
    for (int d = 0; d <= 2; ++d)
      EXPECT_EQ(row[static_cast<size_t>(d) + 1], K.eval(d, row[0]));
  }
}

TEST(cli, kernel_deconv_dump)
{
  auto r = call({ "kernel", "--deconv", "--error", "uniform", "--theta", "1", "--bandwidth", "0.3",
                  "--n", "2", "--points", "101", "--side", "minus" });
  ASSERT_EQ(r.code, 0) << r.err;
  auto lines = lines_of(r.out);
  EXPECT_EQ(lines[1], "t,L");
  EXPECT_EQ(lines.size(), 103u);
  bool nonzero = false;
  for (size_t i = 2; i < lines.size(); ++i)
    nonzero = nonzero || split_numbers(lines[i])[1] != 0.0;
  EXPECT_TRUE(nonzero);
  EXPECT_EQ(call({ "kernel", "--deconv", "--error", "uniform", "--side", "up" }).code, 2);
}

TEST(cli, estimate_matches_library)
{
  TempDir dir;
  auto cfg = dir.path() / "c.toml";
  write(cfg, "error = { kind = \"uniform\", theta = 1 }\n"
             "density = { kind = \"cauchy_power\", r = 3 }\n"
             "n_grid = [100, 200]\np = 4\n");
  auto f = density_cauchy_power(3.0);
  auto ys = sample_observations(f, make_uniform(1.0), 500, 4);
  {
    std::ofstream s(dir.path() / "y.csv");
    s << "# sample\ny\n";
    for (double y : ys)
      s << format_number(y) << "\n";
  }
  auto r = call({ "estimate", "--config", cfg.string(), "--sample", (dir.path() / "y.csv").string(),
                  "--from", "-2", "--to", "2", "--points", "9" });
  ASSERT_EQ(r.code, 0) << r.err;
  auto lines = lines_of(r.out);
  ASSERT_EQ(lines.size(), 11u);
  EXPECT_EQ(lines[1], "x,f_hat");

  Estimator est(tuned_spec(make_uniform(1.0), 2.0, 4.0, 1, 1, ys.size(), RiskKind::pointwise));
  Sample sample(ys);
  for (size_t i = 2; i < lines.size(); ++i) {
    auto row = split_numbers(lines[i]);
    EXPECT_EQ(row[1], est.estimate_point(sample, row[0])) << row[0];
  }
}

TEST(cli, estimate_input_errors)
{
  TempDir dir;
  auto cfg = dir.path() / "c.toml";
  write(cfg, "error = { kind = \"uniform\", theta = 1 }\n"
             "density = { kind = \"cauchy_power\", r = 3 }\nn_grid = [100, 200]\n");
  auto missing = call({ "estimate", "--config", cfg.string(), "--sample", "/nonexistent.csv" });
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("cannot open"), std::string::npos);

  write(dir.path() / "bad.csv", "y\n0.5\nabc\n");
  auto bad = call({ "estimate", "--config", cfg.string(), "--sample", (dir.path() / "bad.csv").string() });
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find(":3:"), std::string::npos) << bad.err;

  auto nocfg = call({ "estimate", "--config", (dir.path() / "none.toml").string(), "--sample", "x" });
  EXPECT_EQ(nocfg.code, 2);
}

TEST(cli, read_column_rules)
{
  TempDir dir;
  write(dir.path() / "a.csv", "value\n# note\n1.5\n\n-2\n  3e-1 \n");
  EXPECT_EQ(read_column((dir.path() / "a.csv").string()), (std::vector<double>{ 1.5, -2.0, 0.3 }));
  write(dir.path() / "b.csv", "1,2\n");
  EXPECT_THROW(read_column((dir.path() / "b.csv").string()), invalid_parameter);
  write(dir.path() / "c.csv", "1\nnan\n");
  EXPECT_THROW(read_column((dir.path() / "c.csv").string()), invalid_parameter);
}

TEST(cli, format_number_round_trips)
{
  std::mt19937_64 g(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    double v = u(g) * std::pow(10.0, static_cast<int>(g() % 40) - 20);
    EXPECT_EQ(std::stod(format_number(v)), v);
  }
  EXPECT_EQ(format_number(1.0), "1");
  EXPECT_EQ(format_number(-0.25), "-0.25");
}

TEST(cli, simulate_writes_outputs_deterministically)
{
  TempDir dir;
  auto cfg = dir.path() / "sim.toml";
  write(cfg, "error = { kind = \"binomial\", m = 1 }\n"
             "density = { kind = \"cauchy_power\", r = 3 }\n"
             "n_grid = [128, 512, 2048]\nreps = 8\np = 4.9\nk0 = 3\nbootstrap = 50\n"
             "output_dir = \"" + (dir.path() / "a").string() + "\"\n");
  auto first = call({ "simulate", cfg.string(), "--plot" });
  ASSERT_EQ(first.code, 0) << first.err;
  auto rates = slurp(dir.path() / "a" / "rates.csv");
  auto report = slurp(dir.path() / "a" / "report.csv");
  EXPECT_TRUE(fs::exists(dir.path() / "a" / "plot.svg"));

  auto rate_lines = lines_of(rates);
  ASSERT_EQ(rate_lines.size(), 5u);
  EXPECT_EQ(rate_lines[0], "# config_hash=" + config_hash(load_config(cfg.string())) +
                             " version=" + tool_version);
  EXPECT_EQ(rate_lines[1].rfind("n,risk,stderr", 0), 0u);
  EXPECT_EQ(split_numbers(rate_lines[2])[0], 128.0);
  auto report_lines = lines_of(report);
  ASSERT_EQ(report_lines.size(), 3u);
  EXPECT_EQ(report_lines[1], "slope,ci_lo,ci_hi,theoretical_slope");
  EXPECT_EQ(split_numbers(report_lines[2])[3], -0.4);

  auto second = call({ "simulate", cfg.string(), "--workers", "3", "--output-dir",
                       (dir.path() / "b").string() });
  ASSERT_EQ(second.code, 0) << second.err;
  EXPECT_EQ(slurp(dir.path() / "b" / "rates.csv"), rates);
  EXPECT_EQ(slurp(dir.path() / "b" / "report.csv"), report);
  EXPECT_FALSE(fs::exists(dir.path() / "b" / "plot.svg"));

  setenv("DECONV_OUTPUT_DIR", (dir.path() / "env").string().c_str(), 1);
  auto third = call({ "simulate", cfg.string() });
  unsetenv("DECONV_OUTPUT_DIR");
  ASSERT_EQ(third.code, 0) << third.err;
  EXPECT_EQ(slurp(dir.path() / "env" / "rates.csv"), rates);
}

TEST(cli, simulate_config_errors)
{
  TempDir dir;
  auto cfg = dir.path() / "bad.toml";
  write(cfg, "error = { kind = \"uniform\", theta = 1 }\nn_grid = [10, 20]\n");
  auto r = call({ "simulate", cfg.string() });
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("density"), std::string::npos) << r.err;
  EXPECT_NE(call({ "simulate", (dir.path() / "missing.toml").string() }).code, 0);
}

TEST(cli, check_passes)
{
  auto r = call({ "check" });
  EXPECT_EQ(r.code, 0) << r.out;
  auto lines = lines_of(r.out);
  EXPECT_GE(lines.size(), 5u);
  for (const auto& l : lines)
    EXPECT_EQ(l.rfind("PASS ", 0), 0u) << l;
}
