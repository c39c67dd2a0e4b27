#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "pseig/errors.hpp"
#include "pseig/pipeline.hpp"

using namespace pseig;
using std::numbers::pi;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pseig_test_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::string first_line(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  return line;
}

ExperimentConfig small_laplace(const fs::path& out) {
  ExperimentConfig c = default_config(Experiment::laplace_gap);
  c.lengths = {1, 2, 4};
  c.cells_per_unit = 12;
  c.out_dir = out.string();
  return c;
}

ExperimentConfig small_chain(int cpp) {
  ExperimentConfig c = default_config(Experiment::chain);
  c.chain_cells_per_period = cpp;
  return c;
}

} // namespace

TEST(Config, Names) {
  for (Experiment e : {Experiment::laplace_gap, Experiment::precond_compare, Experiment::homog_study,
                       Experiment::chain, Experiment::kronig_penney, Experiment::factorization_check}) {
    EXPECT_EQ(parse_experiment(to_string(e)), e);
    EXPECT_NO_THROW(default_config(e).validate());
  }
  EXPECT_EQ(parse_solver("ip"), SolverKind::ip);
  EXPECT_EQ(parse_shift_mode("good"), ShiftMode::good);
  EXPECT_THROW(parse_experiment("nope"), ConfigError);
  EXPECT_THROW(parse_solver("rqi"), ConfigError);
  EXPECT_THROW(parse_shift_mode("best"), ConfigError);
}

TEST(Config, TextSectionsAndPrecedence) {
  ExperimentConfig c = default_config(Experiment::precond_compare);
  load_config_text(c,
                   "# comment\n"
                   "tol = 1e-8\n"
                   "cells = 40   # trailing comment\n"
                   "[chain]\n"
                   "cells = 7\n"
                   "[precond-compare]\n"
                   "L = 1, 2\n"
                   "shift_mode = good\n"
                   "fraction = 0.5\n"
                   "solver = ip\n");
  EXPECT_EQ(c.tol, 1e-8);
  EXPECT_EQ(c.cells_per_unit, 40);
  EXPECT_EQ(c.lengths, (std::vector<double>{1, 2}));
  EXPECT_EQ(c.shift_mode, ShiftMode::good);
  EXPECT_EQ(c.good_fraction, 0.5);
  EXPECT_EQ(c.solver, SolverKind::ip);
}

TEST(Config, Errors) {
  ExperimentConfig c = default_config(Experiment::laplace_gap);
  EXPECT_THROW(apply_setting(c, "bogus", "1"), ConfigError);
  EXPECT_THROW(apply_setting(c, "cells", "many"), ConfigError);
  EXPECT_THROW(load_config_text(c, "[unknown]\n"), ConfigError);
  EXPECT_THROW(load_config_text(c, "no equals sign\n"), ConfigError);
  EXPECT_THROW(load_config_file(c, "/nonexistent/pseig.cfg"), IoError);
  apply_setting(c, "fraction", "1.5");
  EXPECT_THROW(c.validate(), ConfigError);
  c = default_config(Experiment::laplace_gap);
  apply_setting(c, "potential", "coulomb_chain");
  EXPECT_THROW(c.validate(), ConfigError);
  c = default_config(Experiment::laplace_gap);
  c.tol = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Shift, LaplaceCell) {
  const int cells[2] = {20, 20};
  const ShiftReport r = compute_quasi_optimal_shift({1, 1, 1.0, 1.0}, cells, 1, {});
  EXPECT_NEAR(r.sigma, pi * pi, 0.03);
  EXPECT_GT(r.sigma, pi * pi);
  EXPECT_GT(r.cell_dofs, 0u);
}

TEST(Shift, KronigPenneyCell) {
  ExperimentConfig c = default_config(Experiment::kronig_penney);
  const ShiftReport r = experiment_shift(c);
  EXPECT_NEAR(r.sigma, 57.60485, 5e-3);
  EXPECT_EQ(r.cell_dofs, 10u * 10u * 9u);
}

TEST(Shift, ChainCell) {
  const ShiftReport r = experiment_shift(small_chain(36));
  EXPECT_NEAR(r.lambda_inf, 1.08784, 5e-2);
  EXPECT_NEAR(r.sigma, r.lambda_inf * (1.0 - 1e-4), 1e-12);
}

TEST(Shift, Modes) {
  ExperimentConfig c = default_config(Experiment::precond_compare);
  ShiftReport r;
  r.lambda_inf = 10.0;
  c.shift_mode = ShiftMode::none;
  EXPECT_EQ(applied_shift(c, r), 0.0);
  c.shift_mode = ShiftMode::good;
  EXPECT_DOUBLE_EQ(applied_shift(c, r), 9.9);
  c.shift_mode = ShiftMode::optimal;
  EXPECT_EQ(applied_shift(c, r), 10.0);
  c.shift_mode = ShiftMode::manual;
  c.sigma = 3.0;
  EXPECT_EQ(applied_shift(c, r), 3.0);
}

TEST(Expanding, LaplaceLengthTwo) {
  ExperimentConfig c = default_config(Experiment::laplace_gap);
  c.cells_per_unit = 32;
  c.m = 1;
  const ExpandingResult r = solve_expanding_problem(c, 2.0);
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.pairs[0].eigenvalue, 5 * pi * pi / 4, 0.02 * 5 * pi * pi / 4);
  EXPECT_GE(r.pairs[0].eigenvalue, 5 * pi * pi / 4);
  EXPECT_EQ(r.n_nodes, 65u * 33u);
}

TEST(Expanding, UnshiftedStagnationIsReported) {
  ExperimentConfig c = default_config(Experiment::precond_compare);
  c.cells_per_unit = 10;
  c.shift_mode = ShiftMode::none;
  c.k_max = 5;
  const ExpandingResult r = solve_expanding_problem(c, 16.0);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.pairs[0].iterations, 5);
}

TEST(Properties, ShiftValidity) {
  std::vector<std::pair<ExperimentConfig, double>> cases;
  ExperimentConfig lap = default_config(Experiment::laplace_gap);
  lap.cells_per_unit = 16;
  lap.m = 1;
  cases.emplace_back(lap, 4.0);
  ExperimentConfig pre = default_config(Experiment::precond_compare);
  pre.cells_per_unit = 16;
  cases.emplace_back(pre, 1.0);
  cases.emplace_back(pre, 8.0);
  ExperimentConfig kp = default_config(Experiment::kronig_penney);
  cases.emplace_back(kp, 2.0);
  ExperimentConfig fac = default_config(Experiment::factorization_check);
  fac.cells_per_unit = 16;
  fac.m = 1;
  cases.emplace_back(fac, 4.0);
  ExperimentConfig ch = small_chain(18);
  cases.emplace_back(ch, 2.0);
  for (const auto& [cfg, L] : cases) {
    const ShiftReport s = experiment_shift(cfg);
    EXPECT_GT(s.sigma, 0.0) << to_string(cfg.experiment);
    const ExpandingResult r = solve_expanding_problem(cfg, L, s.sigma);
    ASSERT_TRUE(r.converged) << to_string(cfg.experiment);
    EXPECT_LE(r.sigma, r.pairs[0].eigenvalue + 1e-8) << to_string(cfg.experiment) << " L=" << L;
  }
}

TEST(Properties, DefectInvariance) {
  // Growing margins around the chain enlarge the domain, so the ground state
  // decreases, and the shifted solver keeps its iteration budget.
  const double cell = 1.8;
  std::vector<double> lambda;
  std::vector<int> its;
  for (double delta : {0.0, 0.1 * cell, 0.5 * cell}) {
    ExperimentConfig c = small_chain(18);
    c.defect_margin = delta;
    const ExpandingResult r = solve_expanding_problem(c, 3.0);
    ASSERT_TRUE(r.converged);
    lambda.push_back(r.pairs[0].eigenvalue);
    its.push_back(r.pairs[0].iterations);
  }
  for (std::size_t i = 1; i < lambda.size(); ++i) {
    EXPECT_LE(lambda[i], lambda[i - 1] + 1e-10);
    EXPECT_LE(its[i], its[0] + 3);
  }
}

TEST(Factorization, LaplaceSeparates) {
  PotentialSpec zero;
  zero.kind = PotentialKind::zero;
  const auto rep = factorization_check(zero, 2.0, 1.0, 16, 2);
  ASSERT_EQ(rep.rows.size(), 2u);
  const double exact[2] = {pi * pi * (1.0 + 0.25), pi * pi * (1.0 + 1.0)};
  for (std::size_t m = 0; m < 2; ++m) {
    EXPECT_NEAR(rep.rows[m].lambda, exact[m], 0.02 * exact[m]);
    EXPECT_LE(rep.rows[m].relative_defect, 5e-3);
  }
  EXPECT_EQ(rep.rows[0].lambda_phi_y, rep.rows[1].lambda_phi_y);
  EXPECT_GT(rep.rows[1].lambda_u_y2, rep.rows[0].lambda_u_y2);
}

TEST(Experiments, CsvHeadersAndFiles) {
  const fs::path out = scratch("headers");
  const ExperimentReport rep = run_experiment(small_laplace(out));
  EXPECT_TRUE(rep.converged);
  EXPECT_EQ(first_line(out / "summary.csv"), "L,n_nodes,lambda1,max_phi1,k_it,t_eig");
  EXPECT_EQ(first_line(out / "history_L2.csv"), "k,residual,rayleigh");
  EXPECT_TRUE(fs::exists(out / "shift.txt"));
  const auto ratios = read_csv(out / "ratios.csv");
  ASSERT_EQ(ratios.size(), 4u);
  for (std::size_t i = 1; i < ratios.size(); ++i) EXPECT_NEAR(std::stod(ratios[i][6]), 0.25, 0.01);
  fs::remove_all(out);
}

TEST(Experiments, SerialCsvIsDeterministic) {
  std::vector<std::vector<std::vector<std::string>>> runs;
  for (int k = 0; k < 2; ++k) {
    const fs::path out = scratch("determinism" + std::to_string(k));
    ExperimentConfig c = small_laplace(out);
    c.exec = Exec::serial;
    c.parallel_sweep = false;
    run_experiment(c);
    auto rows = read_csv(out / "summary.csv");
    for (auto& r : rows) r.pop_back(); // drop t_eig
    runs.push_back(rows);
    const auto hist = read_csv(out / "history_L4.csv");
    runs.push_back(hist);
    fs::remove_all(out);
  }
  EXPECT_EQ(runs[0], runs[2]);
  EXPECT_EQ(runs[1], runs[3]);
}

TEST(Experiments, FileRowsMatchParallelSweep) {
  const fs::path a = scratch("sweep_serial"), b = scratch("sweep_parallel");
  ExperimentConfig c = small_laplace(a);
  c.parallel_sweep = false;
  run_experiment(c);
  c.out_dir = b.string();
  c.parallel_sweep = true;
  run_experiment(c);
  auto ra = read_csv(a / "summary.csv"), rb = read_csv(b / "summary.csv");
  ASSERT_EQ(ra.size(), rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ra[i].pop_back();
    rb[i].pop_back();
  }
  EXPECT_EQ(ra, rb);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Slope, LogLog) {
  const std::vector<double> x{1, 2, 4, 8}, y{1, 0.25, 0.0625, 0.015625};
  EXPECT_NEAR(loglog_slope(x, y), -2.0, 1e-12);
}

#ifdef PSEIG_CLI_PATH
namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PSEIG_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST(Cli, ExitCodes) {
  const fs::path out = scratch("cli");
  const std::string o = " --out " + out.string();
  EXPECT_EQ(run_cli("laplace-gap --L 1,2 --cells 8 --m 1" + o), 0);
  EXPECT_TRUE(fs::exists(out / "summary.csv"));
  EXPECT_EQ(run_cli("no-such-experiment" + o), 2);
  EXPECT_EQ(run_cli("laplace-gap --set bogus=1" + o), 2);
  EXPECT_EQ(run_cli("laplace-gap --shift-mode sideways" + o), 2);
  EXPECT_EQ(run_cli("laplace-gap --config /nonexistent.cfg" + o), 4);
  EXPECT_EQ(run_cli("precond-compare --L 8 --cells 8 --shift-mode none --kmax 2" + o), 3);
  std::ofstream(out / "blocker") << "x";
  EXPECT_EQ(run_cli("laplace-gap --L 1 --cells 8 --m 1 --out " + (out / "blocker" / "sub").string()), 4);
  fs::remove_all(out);
}
#endif
