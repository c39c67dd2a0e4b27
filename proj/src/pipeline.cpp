#include "pseig/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <omp.h>

#include "pseig/errors.hpp"

namespace pseig {

namespace {

constexpr double kPi = std::numbers::pi;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string secs(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string normalize_key(std::string_view k) {
  std::string out = trim(k);
  std::replace(out.begin(), out.end(), '-', '_');
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  const std::string s = trim(v);
  char* end = nullptr;
  const double d = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(d))
    throw ConfigError("bad number for '" + std::string(key) + "': '" + s + "'");
  return d;
}

int to_int(std::string_view key, std::string_view v) {
  const double d = to_double(key, v);
  if (d != std::floor(d) || std::abs(d) > 1e9)
    throw ConfigError("expected an integer for '" + std::string(key) + "'");
  return static_cast<int>(d);
}

bool to_bool(std::string_view key, std::string_view v) {
  const std::string s = normalize_key(v);
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("expected a boolean for '" + std::string(key) + "'");
}

std::vector<double> to_list(std::string_view key, std::string_view v) {
  std::vector<double> out;
  std::string item;
  std::stringstream ss{std::string(v)};
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(to_double(key, item));
  }
  if (out.empty()) throw ConfigError("empty list for '" + std::string(key) + "'");
  return out;
}

PotentialKind parse_potential(std::string_view s) {
  const std::string k = normalize_key(s);
  if (k == "zero") return PotentialKind::zero;
  if (k == "product_sine") return PotentialKind::product_sine;
  if (k == "sine_y2") return PotentialKind::sine_y2;
  if (k == "optical_lattice") return PotentialKind::optical_lattice;
  if (k == "coulomb_chain") return PotentialKind::coulomb_chain;
  if (k == "kronig_penney") return PotentialKind::kronig_penney;
  throw ConfigError("unknown potential '" + std::string(s) + "'");
}

/// Potential with its dimension fields matched to the domain.
PotentialSpec synced(const ExperimentConfig& cfg) {
  PotentialSpec v = cfg.potential;
  v.p = cfg.domain.p;
  v.dim = cfg.domain.dim();
  return v;
}

int count_cells(double length, int per_unit) {
  return std::max(1, static_cast<int>(std::lround(length * per_unit)));
}

std::size_t nodes_in_use(const Mesh& mesh) {
  if (!mesh.masked()) return mesh.n_nodes();
  std::size_t n = 0;
  for (std::size_t i = 0; i < mesh.n_nodes(); ++i) n += mesh.node_in_use(i) ? 1 : 0;
  return n;
}

/// CSV file that flushes every row.
class CsvFile {
public:
  CsvFile(const std::filesystem::path& path, const std::string& header) : path_(path.string()) {
    out_.open(path);
    if (!out_) throw IoError("cannot open " + path_ + " for writing");
    line(header);
  }
  void line(const std::string& s) {
    out_ << s << '\n';
    out_.flush();
    if (!out_) throw IoError("write failed: " + path_);
  }
  const std::string& path() const { return path_; }

private:
  std::string path_;
  std::ofstream out_;
};

std::string join(std::initializer_list<std::string> items) {
  std::string s;
  for (const auto& it : items) {
    if (!s.empty()) s += ',';
    s += it;
  }
  return s;
}

std::string summary_row(const ExpandingResult& r) {
  const EigResult& e = r.pairs.front();
  return join({num(r.L), std::to_string(r.n_nodes), num(e.eigenvalue), num(r.max_phi),
               std::to_string(e.iterations), secs(r.t_eig)});
}

constexpr const char* kSummaryHeader = "L,n_nodes,lambda1,max_phi1,k_it,t_eig";

void write_shift(const std::filesystem::path& path, const ShiftReport& s, double applied) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "lambda_inf = " << num(s.lambda_inf) << '\n'
      << "sigma = " << num(applied) << '\n'
      << "backoff = " << num(s.backoff) << '\n'
      << "cell_dofs = " << s.cell_dofs << '\n'
      << "cell_iterations = " << s.cell_iterations << '\n'
      << "cell_seconds = " << secs(s.seconds) << '\n'
      << "cell_mesh = " << s.cell_summary << '\n';
  for (const auto& w : s.warnings) out << "warning = " << w << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::string history_name(const std::string& tag, double L) {
  return "history_" + (tag.empty() ? std::string() : tag + "_") + "L" + num(L) + ".csv";
}

/// Runs over cfg.lengths in parallel (outer level only); results come back in
/// input order. Completed runs are returned before a failure is rethrown.
std::vector<ExpandingResult> sweep(const ExperimentConfig& cfg, double sigma,
                                   const std::function<void(const ExpandingResult&)>& emit) {
  const auto& ls = cfg.lengths;
  const int n = static_cast<int>(ls.size());
  std::vector<ExpandingResult> results(ls.size());
  std::vector<std::exception_ptr> errors(ls.size());
  const bool par = cfg.parallel_sweep && n > 1 && omp_get_max_threads() > 1;
  if (par) {
#pragma omp parallel for schedule(dynamic, 1)
    for (int i = 0; i < n; ++i) {
      try {
        results[i] = solve_expanding_problem(cfg, ls[i], sigma);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    for (int i = 0; i < n; ++i) {
      if (errors[i]) std::rethrow_exception(errors[i]);
      emit(results[i]);
    }
  } else {
    for (int i = 0; i < n; ++i) {
      results[i] = solve_expanding_problem(cfg, ls[i], sigma);
      emit(results[i]);
    }
  }
  return results;
}

void note_warnings(ExperimentReport& rep, const std::vector<std::string>& w) {
  rep.warnings.insert(rep.warnings.end(), w.begin(), w.end());
}

} // namespace

// ---------------------------------------------------------------- names

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::laplace_gap: return "laplace-gap";
    case Experiment::precond_compare: return "precond-compare";
    case Experiment::homog_study: return "homog-study";
    case Experiment::chain: return "chain";
    case Experiment::kronig_penney: return "kronig-penney";
    case Experiment::factorization_check: return "factorization-check";
  }
  return "unknown";
}

std::string to_string(SolverKind s) { return s == SolverKind::ip ? "ip" : "lopcg"; }

std::string to_string(ShiftMode m) {
  switch (m) {
    case ShiftMode::none: return "none";
    case ShiftMode::good: return "good";
    case ShiftMode::optimal: return "optimal";
    case ShiftMode::manual: return "manual";
  }
  return "unknown";
}

Experiment parse_experiment(std::string_view s) {
  for (auto e : {Experiment::laplace_gap, Experiment::precond_compare, Experiment::homog_study,
                 Experiment::chain, Experiment::kronig_penney, Experiment::factorization_check}) {
    if (to_string(e) == s) return e;
  }
  throw ConfigError("unknown experiment '" + std::string(s) + "'");
}

SolverKind parse_solver(std::string_view s) {
  const std::string k = normalize_key(s);
  if (k == "ip") return SolverKind::ip;
  if (k == "lopcg") return SolverKind::lopcg;
  throw ConfigError("unknown solver '" + std::string(s) + "'");
}

ShiftMode parse_shift_mode(std::string_view s) {
  const std::string k = normalize_key(s);
  if (k == "none") return ShiftMode::none;
  if (k == "good") return ShiftMode::good;
  if (k == "optimal") return ShiftMode::optimal;
  if (k == "manual") return ShiftMode::manual;
  throw ConfigError("unknown shift mode '" + std::string(s) + "'");
}

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
  domain.validate();
  if (cells_per_unit < 1) throw ConfigError("cells must be >= 1");
  if (order != 1 && order != 2) throw ConfigError("order must be 1 or 2");
  if (!(good_fraction >= 0.0 && good_fraction <= 1.0)) throw ConfigError("fraction must lie in [0,1]");
  if (!(shift_backoff >= 0.0 && shift_backoff < 1.0)) throw ConfigError("backoff must lie in [0,1)");
  if (!(tol > 0.0)) throw ConfigError("tol must be > 0");
  if (k_max < 1) throw ConfigError("kmax must be >= 1");
  if (m < 1) throw ConfigError("m must be >= 1");
  if (out_dir.empty()) throw ConfigError("empty output directory");
  for (double L : lengths) {
    if (!(L > 0.0)) throw ConfigError("lengths must be positive");
  }
  if (experiment == Experiment::chain) {
    if (domain.p != 1 || domain.q != 1) throw ConfigError("chain: p = q = 1 required");
    if (potential.kind != PotentialKind::coulomb_chain) throw ConfigError("chain: coulomb_chain potential required");
    for (double n : lengths) {
      if (n != std::floor(n)) throw ConfigError("chain: lengths are disk counts");
    }
    if (chain_cells_per_period < 2) throw ConfigError("chain_cells must be >= 2");
  }
  if (experiment == Experiment::homog_study) {
    if (domain.p != 2 || domain.q != 1) throw ConfigError("homog-study: p = 2, q = 1 required");
    if (cell_intervals < 1 || intervals_per_period < 1 || y_intervals < 1)
      throw ConfigError("homog-study: interval counts must be >= 1");
  }
  if (potential.kind == PotentialKind::coulomb_chain && experiment != Experiment::chain)
    throw ConfigError("coulomb_chain potential is only resolvable on the chain geometry");
}

ExperimentConfig default_config(Experiment e) {
  ExperimentConfig c;
  c.experiment = e;
  switch (e) {
    case Experiment::laplace_gap:
      c.domain = {1, 1, 1.0, 1.0};
      c.lengths = {1, 2, 4, 8, 16, 32};
      c.cells_per_unit = 64;
      c.potential.kind = PotentialKind::zero;
      c.m = 2;
      break;
    case Experiment::precond_compare:
      c.domain = {1, 1, 1.0, 1.0};
      c.lengths = {1, 2, 4, 8, 16, 32};
      c.cells_per_unit = 100;
      c.potential.kind = PotentialKind::sine_y2;
      c.potential.amplitude = 100.0;
      break;
    case Experiment::homog_study:
      c.domain = {2, 1, 1.0, 1.0};
      c.lengths = {1, 2, 4, 8};
      c.order = 2;
      c.m = 3;
      c.k_max = 200;
      c.potential.kind = PotentialKind::zero;
      break;
    case Experiment::chain:
      c.domain = {1, 1, 1.0, 2.0};
      c.lengths = {1, 2, 4, 8};
      c.potential.kind = PotentialKind::coulomb_chain;
      c.shift_backoff = 1e-4;
      break;
    case Experiment::kronig_penney:
      c.domain = {2, 1, 1.0, 1.0};
      c.lengths = {1, 2, 4, 8};
      c.cells_per_unit = 10;
      c.potential.kind = PotentialKind::kronig_penney;
      c.potential.amplitude = 100.0;
      break;
    case Experiment::factorization_check:
      c.domain = {1, 1, 4.0, 1.0};
      c.lengths = {4};
      c.cells_per_unit = 64;
      c.potential.kind = PotentialKind::product_sine;
      c.potential.amplitude = 100.0;
      c.potential.frequency = 1.0;
      c.m = 2;
      break;
  }
  c.out_dir = "out/" + to_string(e);
  return c;
}

void apply_setting(ExperimentConfig& c, std::string_view raw_key, std::string_view raw_value) {
  const std::string key = normalize_key(raw_key);
  const std::string value = trim(raw_value);
  if (key == "l" || key == "lengths") {
    c.lengths = to_list(key, value);
    c.domain.L = c.lengths.front();
  } else if (key == "cells") {
    c.cells_per_unit = to_int(key, value);
  } else if (key == "order") {
    c.order = to_int(key, value);
  } else if (key == "p") {
    c.domain.p = to_int(key, value);
  } else if (key == "q") {
    c.domain.q = to_int(key, value);
  } else if (key == "ell") {
    c.domain.ell = to_double(key, value);
  } else if (key == "solver") {
    c.solver = parse_solver(value);
  } else if (key == "shift_mode") {
    c.shift_mode = parse_shift_mode(value);
  } else if (key == "sigma") {
    c.sigma = to_double(key, value);
  } else if (key == "fraction") {
    c.good_fraction = to_double(key, value);
  } else if (key == "backoff") {
    c.shift_backoff = to_double(key, value);
  } else if (key == "tol") {
    c.tol = to_double(key, value);
  } else if (key == "kmax" || key == "k_max") {
    c.k_max = to_int(key, value);
  } else if (key == "m") {
    c.m = to_int(key, value);
  } else if (key == "out") {
    c.out_dir = value;
  } else if (key == "exec") {
    const std::string v = normalize_key(value);
    if (v == "serial") c.exec = Exec::serial;
    else if (v == "parallel") c.exec = Exec::parallel;
    else throw ConfigError("exec must be serial or parallel");
  } else if (key == "backend") {
    const std::string v = normalize_key(value);
    if (v == "cholesky") c.backend.backend = Backend::cholesky;
    else if (v == "cg") c.backend.backend = Backend::cg;
    else throw ConfigError("backend must be cholesky or cg");
  } else if (key == "parallel_sweep") {
    c.parallel_sweep = to_bool(key, value);
  } else if (key == "potential") {
    c.potential.kind = parse_potential(value);
  } else if (key == "amplitude") {
    c.potential.amplitude = to_double(key, value);
  } else if (key == "frequency") {
    c.potential.frequency = to_double(key, value);
  } else if (key == "lift") {
    c.potential.lift = to_double(key, value);
  } else if (key == "well_norm") {
    const std::string v = normalize_key(value);
    if (v == "l1") c.potential.kronig.norm = WellNorm::l1;
    else if (v == "linf") c.potential.kronig.norm = WellNorm::linf;
    else throw ConfigError("well_norm must be l1 or linf");
  } else if (key == "half_width") {
    c.potential.kronig.half_width = to_double(key, value);
  } else if (key == "charge") {
    c.potential.coulomb.charge = to_double(key, value);
  } else if (key == "cutoff") {
    c.potential.coulomb.cutoff = to_double(key, value);
  } else if (key == "cell_intervals") {
    c.cell_intervals = to_int(key, value);
  } else if (key == "intervals_per_period") {
    c.intervals_per_period = to_int(key, value);
  } else if (key == "y_intervals") {
    c.y_intervals = to_int(key, value);
  } else if (key == "y_scale_power") {
    c.y_scale_power = to_double(key, value);
  } else if (key == "chain_cells") {
    c.chain_cells_per_period = to_int(key, value);
  } else if (key == "defect_margin") {
    c.defect_margin = to_double(key, value);
  } else {
    throw ConfigError("unknown key '" + std::string(raw_key) + "'");
  }
}

void load_config_text(ExperimentConfig& cfg, std::string_view text) {
  std::vector<std::pair<std::string, std::string>> global, section;
  std::string current;
  std::stringstream ss{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": bad section header");
      current = trim(std::string_view(t).substr(1, t.size() - 2));
      parse_experiment(current); // validates the name
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    auto kv = std::make_pair(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
    if (current.empty()) global.push_back(std::move(kv));
    else if (current == to_string(cfg.experiment)) section.push_back(std::move(kv));
  }
  for (const auto& [k, v] : global) apply_setting(cfg, k, v);
  for (const auto& [k, v] : section) apply_setting(cfg, k, v);
}

void load_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  load_config_text(cfg, ss.str());
}

double potential_period(const PotentialSpec& spec) {
  switch (spec.kind) {
    case PotentialKind::product_sine:
      return kPi / std::abs(spec.frequency);
    case PotentialKind::optical_lattice: {
      const auto& o = spec.optical;
      return 4.0 * (o.radius - o.overlap) / o.omega;
    }
    case PotentialKind::coulomb_chain:
      return 2.0 * spec.coulomb.half_period;
    default:
      return spec.period;
  }
}

// ---------------------------------------------------------------- geometry

std::shared_ptr<const Mesh> chain_cell_mesh(const CoulombParams& c, int cells_per_period, int order) {
  const double period = 2.0 * c.half_period;
  const double h = period / cells_per_period;
  const int ny = std::max(1, static_cast<int>(std::ceil(2.0 * c.radius / h - 1e-9)));
  const DomainSpec d{1, 1, period, ny * h};
  const int cells[3] = {cells_per_period, ny, 1};
  const Point origin{c.radius - c.half_period, -0.5 * ny * h, 0.0};
  Mesh mesh = build_box_mesh(d, std::span<const int>(cells, static_cast<std::size_t>(d.dim())), order, origin);
  const double cx = c.radius;
  mesh = mask_cells(std::move(mesh), [cx, r = c.radius](const Point& z) {
    return std::hypot(z[0] - cx, z[1]) < r;
  });
  return std::make_shared<const Mesh>(std::move(mesh));
}

std::shared_ptr<const Mesh> chain_mesh(const CoulombParams& c, int n, int cells_per_period, int order,
                                       double margin) {
  if (n < 1) throw ConfigError("chain: at least one disk required");
  const double period = 2.0 * c.half_period;
  const double h = period / cells_per_period;
  const double left = c.radius - c.half_period; // left edge of the first cell
  const double extent = margin < 0.0 ? left : margin;
  const int pad = std::max(0, static_cast<int>(std::ceil(extent / h - 1e-9)));
  const int nx = n * cells_per_period + 2 * pad;
  const int ny = std::max(1, static_cast<int>(std::ceil(2.0 * c.radius / h - 1e-9)));
  const DomainSpec d{1, 1, nx * h, ny * h};
  const int cells[3] = {nx, ny, 1};
  const Point origin{left - pad * h, -0.5 * ny * h, 0.0};
  Mesh mesh = build_box_mesh(d, std::span<const int>(cells, static_cast<std::size_t>(d.dim())), order, origin);

  CoulombParams geo = c;
  geo.count = n;
  geo.ghosts = margin >= 0.0;
  const auto centers = chain_centers(geo);
  const double lo = left - std::max(margin, 0.0);
  const double hi = left + n * period + std::max(margin, 0.0);
  mesh = mask_cells(std::move(mesh), [centers, r = c.radius, margin, lo, hi](const Point& z) {
    if (margin >= 0.0 && (z[0] < lo || z[0] > hi)) return false;
    for (const auto& ctr : centers) {
      if (std::hypot(z[0] - ctr[0], z[1] - ctr[1]) < r) return true;
    }
    return false;
  });
  return std::make_shared<const Mesh>(std::move(mesh));
}

std::shared_ptr<const Mesh> cell_mesh(const ExperimentConfig& cfg) {
  if (cfg.experiment == Experiment::chain)
    return chain_cell_mesh(cfg.potential.coulomb, cfg.chain_cells_per_period, cfg.order);
  const double period = potential_period(cfg.potential);
  const DomainSpec d{cfg.domain.p, cfg.domain.q, period, cfg.domain.ell};
  int cells[3] = {1, 1, 1};
  for (int i = 0; i < d.dim(); ++i) cells[i] = count_cells(d.length(i), cfg.cells_per_unit);
  return std::make_shared<const Mesh>(build_box_mesh(d, std::span<const int>(cells, static_cast<std::size_t>(d.dim())), cfg.order));
}

std::shared_ptr<const Mesh> expanding_mesh(const ExperimentConfig& cfg, double L) {
  if (cfg.experiment == Experiment::chain)
    return chain_mesh(cfg.potential.coulomb, static_cast<int>(L), cfg.chain_cells_per_period, cfg.order,
                      cfg.defect_margin);
  const DomainSpec d{cfg.domain.p, cfg.domain.q, L, cfg.domain.ell};
  int cells[3] = {1, 1, 1};
  for (int i = 0; i < d.dim(); ++i) cells[i] = count_cells(d.length(i), cfg.cells_per_unit);
  return std::make_shared<const Mesh>(build_box_mesh(d, std::span<const int>(cells, static_cast<std::size_t>(d.dim())), cfg.order));
}

PotentialSpec expanding_potential(const ExperimentConfig& cfg, double L) {
  PotentialSpec v = synced(cfg);
  if (v.kind == PotentialKind::coulomb_chain) v.coulomb.count = static_cast<int>(L);
  return v;
}

// ---------------------------------------------------------------- shift

ShiftReport compute_quasi_optimal_shift(std::shared_ptr<const Mesh> cell, const ScalarFunction& v, double tol,
                                        int k_max, Exec exec) {
  const auto t0 = Clock::now();
  auto dofs = std::make_shared<const DofMap>(
      build_dof_map(*cell, {Boundary::periodic, Boundary::dirichlet}));
  if (dofs->n_free == 0) throw ConfigError("cell problem has no free degrees of freedom");
  CoefficientSpec coeff;
  coeff.potential = v;
  const Pencil pen = assemble_pencil(*cell, *dofs, coeff, exec);
  SolverConfig sc;
  sc.sigma = 0.0;
  sc.tol = tol;
  sc.k_max = k_max;
  sc.exec = exec;
  EigResult r = lopcg(pen.a, pen.b, sc);
  if (!r.converged) {
    std::string msg = "cell eigensolver stagnated after " + std::to_string(r.iterations) + " iterations; residuals:";
    const std::size_t n = r.residual_history.size();
    for (std::size_t k = n > 5 ? n - 5 : 0; k < n; ++k) msg += " " + num(r.residual_history[k]);
    throw SolverError(msg);
  }
  ShiftReport rep;
  rep.sigma = r.eigenvalue;
  rep.lambda_inf = r.eigenvalue;
  rep.cell_dofs = dofs->n_free;
  rep.cell_summary = summary(*cell, dofs.get());
  rep.cell_iterations = r.iterations;
  rep.phi = ScalarField(cell, dofs, std::move(r.eigenvector), true);
  rep.seconds = seconds_since(t0);
  return rep;
}

ShiftReport compute_quasi_optimal_shift(const DomainSpec& cell, std::span<const int> cells, int order,
                                        const ScalarFunction& v) {
  auto mesh = std::make_shared<const Mesh>(build_box_mesh(cell, cells, order));
  return compute_quasi_optimal_shift(mesh, v);
}

ShiftReport experiment_shift(const ExperimentConfig& cfg) {
  PotentialSpec v = synced(cfg);
  if (v.kind == PotentialKind::coulomb_chain) v.coulomb.count = 1;
  ShiftReport rep = compute_quasi_optimal_shift(cell_mesh(cfg), as_function(v), cfg.tol,
                                                std::max(cfg.k_max, 200), cfg.exec);
  rep.backoff = cfg.shift_backoff;
  rep.sigma = applied_shift(cfg, rep);
  return rep;
}

double applied_shift(const ExperimentConfig& cfg, const ShiftReport& cell) {
  switch (cfg.shift_mode) {
    case ShiftMode::none: return 0.0;
    case ShiftMode::good: return cfg.good_fraction * cell.lambda_inf;
    case ShiftMode::optimal: return cell.lambda_inf * (1.0 - cfg.shift_backoff);
    case ShiftMode::manual: return cfg.sigma;
  }
  return 0.0;
}

// ---------------------------------------------------------------- expanding problem

namespace {

struct SolveOutcome {
  std::vector<EigResult> pairs;
  bool converged = false;
  double sigma = 0.0;
};

/// Shift-invert solve with back-off when sigma lies above the discrete ground
/// state and a switch to CG when the factorisation does not fit.
SolveOutcome shifted_solve(const Pencil& pen, double sigma, const ExperimentConfig& cfg,
                           std::vector<std::string>& warnings) {
  ShiftInvertOptions opts = cfg.backend;
  double s = sigma;
  double step = std::max(1e-3 * std::abs(sigma), 1e-8);
  for (int attempt = 0;; ++attempt) {
    try {
      const ShiftInvert p(pen.a, pen.b, s, opts);
      SolverConfig sc;
      sc.sigma = s;
      sc.tol = cfg.tol;
      sc.k_max = cfg.k_max;
      sc.exec = cfg.exec;
      sc.backend = opts;
      SolveOutcome out;
      out.sigma = s;
      if (cfg.m == 1) {
        EigResult r = cfg.solver == SolverKind::ip ? inverse_power(pen.a, pen.b, p, sc) : lopcg(pen.a, pen.b, p, sc);
        out.converged = r.converged;
        out.pairs.push_back(std::move(r));
      } else {
        DeflatedResult d = deflated_smallest_k(pen.a, pen.b, p, sc, cfg.m);
        out.converged = d.converged;
        out.pairs = std::move(d.pairs);
      }
      return out;
    } catch (const ShiftTooLargeError&) {
      if (s <= 0.0 || attempt >= 40) throw;
      warnings.push_back("shift " + num(s) + " exceeds the discrete ground state (pre-asymptotic); backing off");
      s = std::max(0.0, s - step);
      step *= 2.0;
    } catch (const SolverError& e) {
      if (opts.backend != Backend::cholesky) throw;
      warnings.push_back(std::string("direct factorisation unavailable (") + e.what() + "); using CG");
      opts.backend = Backend::cg;
    }
  }
}

} // namespace

ExpandingResult solve_expanding_problem(const ExperimentConfig& cfg, double L, double sigma) {
  cfg.validate();
  ExpandingResult res;
  res.L = L;
  const auto t0 = Clock::now();
  const auto mesh = expanding_mesh(cfg, L);
  const DofMap dofs = build_dof_map(*mesh, {Boundary::dirichlet, Boundary::dirichlet});
  if (dofs.n_free == 0) throw ConfigError("expanding problem has no free degrees of freedom");
  CoefficientSpec coeff;
  coeff.potential = as_function(expanding_potential(cfg, L));
  const Pencil pen = assemble_pencil(*mesh, dofs, coeff, cfg.exec);
  res.t_assembly = seconds_since(t0);
  res.n_nodes = nodes_in_use(*mesh);
  res.n_dofs = dofs.n_free;

  const auto t1 = Clock::now();
  SolveOutcome out = shifted_solve(pen, sigma, cfg, res.warnings);
  res.t_eig = seconds_since(t1);
  res.pairs = std::move(out.pairs);
  res.converged = out.converged;
  res.sigma = out.sigma;
  if (res.sigma > 0.0 && res.pairs.front().eigenvalue < res.sigma - 1e-8) {
    res.warnings.push_back("L=" + num(L) + ": shift " + num(res.sigma) + " above lambda_h " +
                           num(res.pairs.front().eigenvalue));
  }
  for (double v : res.pairs.front().eigenvector) res.max_phi = std::max(res.max_phi, std::abs(v));
  return res;
}

ExpandingResult solve_expanding_problem(const ExperimentConfig& cfg, double L) {
  const ShiftReport s = experiment_shift(cfg);
  ExpandingResult r = solve_expanding_problem(cfg, L, s.sigma);
  r.warnings.insert(r.warnings.begin(), s.warnings.begin(), s.warnings.end());
  return r;
}

// ---------------------------------------------------------------- factorization

FactorizationReport factorization_check(const PotentialSpec& v_in, double L, double ell, int cells_per_unit,
                                        int m, int order, Exec exec) {
  if (m < 1) throw ConfigError("factorization_check: m must be >= 1");
  const int p = std::max(1, v_in.dim - 1);
  PotentialSpec v = v_in;
  v.p = p;
  v.dim = p + 1;
  const ScalarFunction vf = as_function(v);

  const double period = potential_period(v);
  const DomainSpec cd{p, 1, period, ell};
  int ccells[3] = {1, 1, 1};
  for (int i = 0; i < cd.dim(); ++i) ccells[i] = count_cells(cd.length(i), cells_per_unit);
  auto cmesh = std::make_shared<const Mesh>(build_box_mesh(cd, std::span<const int>(ccells, static_cast<std::size_t>(cd.dim())), order));
  const ShiftReport cell = compute_quasi_optimal_shift(cmesh, vf, 1e-11, 300, exec);

  const DomainSpec d{p, 1, L, ell};
  int cells[3] = {1, 1, 1};
  for (int i = 0; i < d.dim(); ++i) cells[i] = count_cells(d.length(i), cells_per_unit);
  const Mesh mesh = build_box_mesh(d, std::span<const int>(cells, static_cast<std::size_t>(d.dim())), order);

  SolverConfig sc;
  sc.tol = 1e-11;
  sc.k_max = 300;
  sc.exec = exec;

  const DofMap dd = build_dof_map(mesh, {Boundary::dirichlet, Boundary::dirichlet});
  CoefficientSpec full;
  full.potential = vf;
  const Pencil pf = assemble_pencil(mesh, dd, full, exec);
  const DeflatedResult rf = deflated_smallest_k(pf.a, pf.b, sc, m);

  const DofMap dn = build_dof_map(mesh, {Boundary::dirichlet, Boundary::neumann});
  CoefficientSpec weighted;
  const ScalarField& phi = cell.phi;
  weighted.rho = [&phi](const Point& z) {
    const double u = phi.value(z);
    return u * u;
  };
  const Pencil pw = assemble_pencil(mesh, dn, weighted, exec);
  const DeflatedResult rw = deflated_smallest_k(pw.a, pw.b, sc, m);
  if (!rf.converged || !rw.converged) throw SolverError("factorization_check: eigensolver did not converge");

  FactorizationReport rep;
  rep.cells_per_unit = cells_per_unit;
  for (int i = 0; i < m; ++i) {
    FactorizationRow row;
    row.m = i + 1;
    row.lambda = rf.pairs[static_cast<std::size_t>(i)].eigenvalue;
    row.lambda_phi_y = cell.lambda_inf;
    row.lambda_u_y2 = rw.pairs[static_cast<std::size_t>(i)].eigenvalue;
    row.defect = std::abs(row.lambda - row.lambda_phi_y - row.lambda_u_y2);
    row.relative_defect = row.defect / std::abs(row.lambda);
    rep.rows.push_back(row);
  }
  return rep;
}

// ---------------------------------------------------------------- homogenization study

double study_weight(const Point& z) {
  const double c1 = std::cos(kPi * z[0]);
  const double c2 = std::cos(kPi * z[1]);
  const double s = std::sin(kPi * z[2]);
  const double y = z[2];
  const double v = 27.0 / 4.0 * y * y * (1.0 - y) * (10.0 * c1 * c1 + 10.0 * c2 * c2 + 1.1 - s * s);
  return v * v;
}

ScaledPencil scaled_homogenization_pencil(const ScalarFunction& rho, int p, int q, double L,
                                          int intervals_per_period, int y_intervals, int order,
                                          double y_scale_power, Exec exec) {
  const DomainSpec d{p, q, 1.0, 1.0};
  int cells[3] = {1, 1, 1};
  for (int i = 0; i < d.dim(); ++i) {
    cells[i] = i < p ? std::max(1, static_cast<int>(std::lround(intervals_per_period * L))) : y_intervals;
  }
  ScaledPencil out;
  out.mesh = std::make_shared<const Mesh>(build_box_mesh(d, std::span<const int>(cells, static_cast<std::size_t>(d.dim())), order));
  out.dofs = std::make_shared<const DofMap>(build_dof_map(*out.mesh, {Boundary::dirichlet, Boundary::neumann}));
  CoefficientSpec coeff;
  coeff.rho = [rho, L, p](const Point& z) {
    Point s = z;
    for (int i = 0; i < p; ++i) s[static_cast<std::size_t>(i)] *= L;
    return rho(s);
  };
  const double ys = std::pow(L, y_scale_power);
  for (int i = p; i < d.dim(); ++i) coeff.diffusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = ys;
  out.pencil = assemble_pencil(*out.mesh, *out.dofs, coeff, exec);
  return out;
}

HomogStudy homogenization_study(const ExperimentConfig& cfg) {
  cfg.validate();
  const int p = cfg.domain.p;
  const int q = cfg.domain.q;
  HomogStudy study;
  const DomainSpec cd{p, q, 1.0, 1.0};
  int ccells[3] = {1, 1, 1};
  for (int i = 0; i < cd.dim(); ++i) ccells[i] = cfg.cell_intervals;
  auto cmesh = std::make_shared<const Mesh>(build_box_mesh(cd, std::span<const int>(ccells, static_cast<std::size_t>(cd.dim())), cfg.order));
  CorrectorOptions co;
  co.exec = cfg.exec;
  study.model = homogenize(cmesh, study_weight, cfg.m, co);
  const auto& limit = study.model.limit;

  SolverConfig sc;
  sc.tol = cfg.tol;
  sc.k_max = cfg.k_max;
  sc.exec = cfg.exec;
  sc.backend = cfg.backend;
  for (double L : cfg.lengths) {
    const ScaledPencil sp = scaled_homogenization_pencil(study_weight, p, q, L, cfg.intervals_per_period,
                                                         cfg.y_intervals, cfg.order, cfg.y_scale_power, cfg.exec);
    DeflatedResult dr = deflated_smallest_k(sp.pencil.a, sp.pencil.b, sc, cfg.m);
    if (!dr.converged) study.converged = false;
    const int found = static_cast<int>(dr.pairs.size());

    std::vector<ScalarField> targets;
    for (int k = 0; k < found; ++k) {
      const auto& lp = limit[static_cast<std::size_t>(k)];
      targets.push_back(interpolate(sp.mesh, sp.dofs, [&lp](const Point& z) { return lp.value(z); }));
    }
    const SparseMatrix& b = sp.pencil.b;
    for (int k = 0; k < found;) {
      auto& xk = dr.pairs[static_cast<std::size_t>(k)].eigenvector;
      if (k + 1 < found && degenerate(limit[static_cast<std::size_t>(k)].nu, limit[static_cast<std::size_t>(k) + 1].nu)) {
        auto& xn = dr.pairs[static_cast<std::size_t>(k) + 1].eigenvector;
        try {
          auto [a2, a3] = align_degenerate_pair(xk, xn, targets[static_cast<std::size_t>(k)].coeffs(),
                                                targets[static_cast<std::size_t>(k) + 1].coeffs(), b);
          xk = std::move(a2);
          xn = std::move(a3);
          k += 2;
          continue;
        } catch (const SolverError&) {
          study.warnings.push_back("L=" + num(L) + ": eigenpairs " + std::to_string(k + 1) + "," +
                                   std::to_string(k + 2) + " do not resolve the degenerate limit pair; sign alignment only");
        }
      }
      if (bilinear(b, xk, targets[static_cast<std::size_t>(k)].coeffs()) < 0.0) {
        for (double& v : xk) v = -v;
      }
      k += 1;
    }
    for (int k = 0; k < found; ++k) {
      const auto& e = dr.pairs[static_cast<std::size_t>(k)];
      HomogErrorRow row;
      row.L = L;
      row.m = k + 1;
      row.lambda = e.eigenvalue;
      row.nu = limit[static_cast<std::size_t>(k)].nu;
      row.eig_rel_error = std::abs(e.eigenvalue - row.nu) / row.nu;
      const ScalarField u(sp.mesh, sp.dofs, e.eigenvector);
      row.fun_rel_error = field_norms(u, targets[static_cast<std::size_t>(k)]).relative_error;
      study.rows.push_back(row);
    }
  }
  return study;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("loglog_slope: need two or more points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DataError("loglog_slope: non-positive value");
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---------------------------------------------------------------- experiments

namespace {

namespace fs = std::filesystem;

ExperimentReport run_sweep_experiment(const ExperimentConfig& cfg, const fs::path& dir) {
  ExperimentReport rep;
  const ShiftReport shift = experiment_shift(cfg);
  write_shift(dir / "shift.txt", shift, shift.sigma);
  rep.files.push_back((dir / "shift.txt").string());
  note_warnings(rep, shift.warnings);

  CsvFile summary(dir / "summary.csv", kSummaryHeader);
  const bool per_cell = cfg.experiment == Experiment::chain || cfg.experiment == Experiment::kronig_penney;
  std::unique_ptr<CsvFile> scaling;
  if (per_cell) scaling = std::make_unique<CsvFile>(dir / "scaling.csv", "L,n_nodes,n_cells,t_eig,t_eig_per_cell");
  std::unique_ptr<CsvFile> ratios;
  if (cfg.experiment == Experiment::laplace_gap) {
    ratios = std::make_unique<CsvFile>(
        dir / "ratios.csv", "L,lambda1,lambda2,exact1,exact2,sigma,ratio,ratio_pi2");
  }
  const double ell = cfg.domain.ell;
  auto emit = [&](const ExpandingResult& r) {
    summary.line(summary_row(r));
    write_history_csv((dir / history_name("", r.L)).string(), r.pairs.front());
    rep.files.push_back((dir / history_name("", r.L)).string());
    rep.converged = rep.converged && r.converged;
    note_warnings(rep, r.warnings);
    if (scaling) {
      const double n_cells = cfg.experiment == Experiment::chain ? r.L : std::pow(r.L, cfg.domain.p);
      scaling->line(join({num(r.L), std::to_string(r.n_nodes), num(n_cells), secs(r.t_eig), secs(r.t_eig / n_cells)}));
    }
    if (ratios && r.pairs.size() >= 2) {
      const double l1 = r.pairs[0].eigenvalue;
      const double l2 = r.pairs[1].eigenvalue;
      const double lim = kPi * kPi / (ell * ell);
      const double e1 = cfg.domain.p * kPi * kPi / (r.L * r.L) + lim;
      const double e2 = (cfg.domain.p + 3) * kPi * kPi / (r.L * r.L) + lim;
      ratios->line(join({num(r.L), num(l1), num(l2), num(e1), num(e2), num(r.sigma),
                         num((l1 - r.sigma) / (l2 - r.sigma)), num((l1 - lim) / (l2 - lim))}));
    }
  };
  sweep(cfg, shift.sigma, emit);
  rep.files.push_back(summary.path());
  if (scaling) rep.files.push_back(scaling->path());
  if (ratios) rep.files.push_back(ratios->path());
  return rep;
}

ExperimentReport run_precond_compare(const ExperimentConfig& cfg, const fs::path& dir) {
  ExperimentReport rep;
  ExperimentConfig base = cfg;
  base.shift_mode = ShiftMode::optimal;
  const ShiftReport cell = experiment_shift(base);
  write_shift(dir / "shift.txt", cell, cell.sigma);
  rep.files.push_back((dir / "shift.txt").string());

  for (SolverKind s : {SolverKind::ip, SolverKind::lopcg}) {
    for (ShiftMode mode : {ShiftMode::none, ShiftMode::good, ShiftMode::optimal}) {
      ExperimentConfig run = cfg;
      run.solver = s;
      run.shift_mode = mode;
      run.m = 1;
      const std::string tag = to_string(s) + "_" + to_string(mode);
      CsvFile summary(dir / ("summary_" + tag + ".csv"), kSummaryHeader);
      const bool primary = s == cfg.solver && mode == cfg.shift_mode;
      std::unique_ptr<CsvFile> main;
      if (primary) main = std::make_unique<CsvFile>(dir / "summary.csv", kSummaryHeader);
      auto emit = [&](const ExpandingResult& r) {
        summary.line(summary_row(r));
        if (main) main->line(summary_row(r));
        const fs::path h = dir / history_name(tag, r.L);
        write_history_csv(h.string(), r.pairs.front());
        rep.files.push_back(h.string());
        if (primary) rep.converged = rep.converged && r.converged;
        note_warnings(rep, r.warnings);
      };
      sweep(run, applied_shift(run, cell), emit);
      rep.files.push_back(summary.path());
      if (main) rep.files.push_back(main->path());
    }
  }
  return rep;
}

ExperimentReport run_homog_study(const ExperimentConfig& cfg, const fs::path& dir) {
  ExperimentReport rep;
  const HomogStudy study = homogenization_study(cfg);
  {
    std::ofstream out(dir / "homog_model.txt");
    if (!out) throw IoError("cannot open homog_model.txt");
    out << serialize(study.model);
    if (!out) throw IoError("write failed: homog_model.txt");
  }
  rep.files.push_back((dir / "homog_model.txt").string());
  CsvFile errors(dir / "homog_errors.csv", "L,m,lambda,nu,eig_rel_error,fun_rel_error");
  for (const auto& r : study.rows) {
    errors.line(join({num(r.L), std::to_string(r.m), num(r.lambda), num(r.nu), num(r.eig_rel_error),
                      num(r.fun_rel_error)}));
  }
  rep.files.push_back(errors.path());
  CsvFile rates(dir / "homog_rates.csv", "m,eig_slope,fun_slope");
  for (int m = 1; m <= cfg.m; ++m) {
    std::vector<double> ls, ee, fe;
    for (const auto& r : study.rows) {
      if (r.m != m) continue;
      ls.push_back(r.L);
      ee.push_back(r.eig_rel_error);
      fe.push_back(r.fun_rel_error);
    }
    if (ls.size() < 2) continue;
    rates.line(join({std::to_string(m), num(loglog_slope(ls, ee)), num(loglog_slope(ls, fe))}));
  }
  rep.files.push_back(rates.path());
  rep.converged = study.converged;
  note_warnings(rep, study.warnings);
  return rep;
}

ExperimentReport run_factorization(const ExperimentConfig& cfg, const fs::path& dir) {
  ExperimentReport rep;
  CsvFile out(dir / "factorization.csv", "cells,h,L,m,lambda,lambda_phi_y,lambda_u_y2,defect,relative_defect");
  const PotentialSpec v = synced(cfg);
  std::vector<int> levels{std::max(1, cfg.cells_per_unit / 2), cfg.cells_per_unit};
  for (double L : cfg.lengths) {
    for (int cpu : levels) {
      const FactorizationReport fr = factorization_check(v, L, cfg.domain.ell, cpu, cfg.m, cfg.order, cfg.exec);
      for (const auto& r : fr.rows) {
        out.line(join({std::to_string(cpu), num(1.0 / cpu), num(L), std::to_string(r.m), num(r.lambda),
                       num(r.lambda_phi_y), num(r.lambda_u_y2), num(r.defect), num(r.relative_defect)}));
      }
    }
  }
  rep.files.push_back(out.path());
  return rep;
}

} // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  if (cfg.lengths.empty()) cfg.lengths = {cfg.domain.L};
  cfg.validate();
  const fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  switch (cfg.experiment) {
    case Experiment::laplace_gap:
    case Experiment::chain:
    case Experiment::kronig_penney:
      return run_sweep_experiment(cfg, dir);
    case Experiment::precond_compare:
      return run_precond_compare(cfg, dir);
    case Experiment::homog_study:
      return run_homog_study(cfg, dir);
    case Experiment::factorization_check:
      return run_factorization(cfg, dir);
  }
  return {};
}

} // namespace pseig
