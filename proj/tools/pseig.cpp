// Command line runner for the experiment suite.
//
//   pseig <experiment-id> [--config FILE] [--L 1,2,4] [--cells N] [--shift-mode MODE]
//         [--sigma X] [--tol X] [--kmax N] [--solver ip|lopcg] [--m N] [--out DIR]
//
// Exit codes: 0 success, 2 configuration error, 3 solver non-convergence, 4 I/O.

#include <cstdio>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "pseig/errors.hpp"
#include "pseig/pipeline.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kNotConverged = 3;
constexpr int kIoError = 4;

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shifted eigensolvers for periodic Schroedinger problems on expanding domains"};
  std::string experiment;
  std::string config;
  std::vector<std::pair<std::string, std::string>> flags;
  app.add_option("experiment", experiment,
                 "laplace-gap | precond-compare | homog-study | chain | kronig-penney | factorization-check")
      ->required();
  app.add_option("--config", config, "key = value file with optional [experiment] sections");

  std::string lengths, shift_mode, solver, out, exec, backend;
  std::string cells, sigma, tol, kmax, m, order, fraction, backoff;
  struct Flag {
    const char* name;
    const char* key;
    std::string* value;
    const char* help;
  };
  const Flag table[] = {
      {"--L", "L", &lengths, "comma separated lengths (disk counts for chain)"},
      {"--cells", "cells", &cells, "cells per unit length"},
      {"--order", "order", &order, "element order (1 or 2)"},
      {"--shift-mode", "shift_mode", &shift_mode, "none | good | optimal | manual"},
      {"--fraction", "fraction", &fraction, "fraction of lambda_inf for the good shift"},
      {"--backoff", "backoff", &backoff, "relative back-off of the optimal shift"},
      {"--sigma", "sigma", &sigma, "shift for --shift-mode manual"},
      {"--tol", "tol", &tol, "residual tolerance"},
      {"--kmax", "kmax", &kmax, "iteration limit"},
      {"--solver", "solver", &solver, "ip | lopcg"},
      {"--m", "m", &m, "number of eigenpairs"},
      {"--out", "out", &out, "output directory"},
      {"--exec", "exec", &exec, "serial | parallel"},
      {"--backend", "backend", &backend, "cholesky | cg"},
  };
  for (const auto& f : table) app.add_option(f.name, *f.value, f.help);
  std::vector<std::string> sets;
  app.add_option("--set", sets, "extra key=value settings");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    pseig::ExperimentConfig cfg = pseig::default_config(pseig::parse_experiment(experiment));
    if (!config.empty()) pseig::load_config_file(cfg, config);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw pseig::ConfigError("--set expects key=value");
      pseig::apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& f : table) {
      if (!f.value->empty()) pseig::apply_setting(cfg, f.key, *f.value);
    }
    const pseig::ExperimentReport rep = pseig::run_experiment(cfg);
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
    for (const auto& f : rep.files) std::cout << f << '\n';
    if (!rep.converged) {
      std::cerr << "error: solver did not converge\n";
      return kNotConverged;
    }
    return 0;
  } catch (const pseig::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfigError;
  } catch (const pseig::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIoError;
  } catch (const pseig::SolverError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kNotConverged;
  } catch (const pseig::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
}
