#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "pseig/assembly.hpp"
#include "pseig/eigensolve.hpp"
#include "pseig/grid.hpp"
#include "pseig/homogenize.hpp"
#include "pseig/potentials.hpp"

namespace pseig {

enum class Experiment : std::uint8_t {
  laplace_gap,
  precond_compare,
  homog_study,
  chain,
  kronig_penney,
  factorization_check,
};

enum class SolverKind : std::uint8_t { ip, lopcg };

/// none: sigma = 0; good: fraction * lambda_inf; optimal: lambda_inf; manual: given.
enum class ShiftMode : std::uint8_t { none, good, optimal, manual };

std::string to_string(Experiment e);
std::string to_string(SolverKind s);
std::string to_string(ShiftMode m);
Experiment parse_experiment(std::string_view s);
SolverKind parse_solver(std::string_view s);
ShiftMode parse_shift_mode(std::string_view s);

struct ExperimentConfig {
  Experiment experiment = Experiment::precond_compare;
  DomainSpec domain{};
  std::vector<double> lengths;   // L sweep (disk count N for the chain); empty: domain.L
  int cells_per_unit = 100;      // h = 1 / cells_per_unit
  int order = 1;
  PotentialSpec potential{};
  SolverKind solver = SolverKind::lopcg;
  ShiftMode shift_mode = ShiftMode::optimal;
  double good_fraction = 0.99;
  double sigma = 0.0;            // manual shift
  double shift_backoff = 0.0;    // relative back-off applied to lambda_inf
  double tol = 1e-10;
  int k_max = 100;
  int m = 1;
  std::string out_dir = "out";
  Exec exec = Exec::parallel;
  ShiftInvertOptions backend{};
  bool parallel_sweep = true;

  // homog-study
  int cell_intervals = 20;       // corrector mesh, per direction
  int intervals_per_period = 4;  // scaled problem, x-intervals per period
  int y_intervals = 4;
  double y_scale_power = 2.0;    // operator diag(1,...,1, L^power)

  // chain
  int chain_cells_per_period = 36;
  double defect_margin = -1.0;   // < 0: plain union of disks

  void validate() const;
};

/// Paper settings for each experiment.
ExperimentConfig default_config(Experiment e);

/// Apply one key = value setting. Throws ConfigError for unknown keys or bad values.
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// Read a flat key = value file with optional [experiment-id] sections. Global
/// keys apply first, then the section matching cfg.experiment. '#' starts a comment.
void load_config_file(ExperimentConfig& cfg, const std::string& path);
void load_config_text(ExperimentConfig& cfg, std::string_view text);

/// x-period of the potential (product_sine: pi / frequency, optical lattice:
/// its lattice constant, otherwise spec.period).
double potential_period(const PotentialSpec& spec);

struct ShiftReport {
  double sigma = 0.0;      // shift actually used
  double lambda_inf = 0.0; // cell ground state
  std::size_t cell_dofs = 0;
  std::string cell_summary;
  int cell_iterations = 0;
  double seconds = 0.0;
  double backoff = 0.0;
  ScalarField phi;         // cell ground state, periodically extended in x
  std::vector<std::string> warnings;
};

/// Ground state of the (periodic-x, Dirichlet-y) cell pencil via LOPCG with
/// sigma = 0. Throws SolverError with the residual history on stagnation.
ShiftReport compute_quasi_optimal_shift(std::shared_ptr<const Mesh> cell, const ScalarFunction& v,
                                        double tol = 1e-10, int k_max = 200, Exec exec = Exec::parallel);
ShiftReport compute_quasi_optimal_shift(const DomainSpec& cell, std::span<const int> cells, int order,
                                        const ScalarFunction& v);

/// Cell mesh of the experiment, built from the Omega_L spacing.
std::shared_ptr<const Mesh> cell_mesh(const ExperimentConfig& cfg);
/// Omega_L mesh of the experiment (L = disk count for the chain).
std::shared_ptr<const Mesh> expanding_mesh(const ExperimentConfig& cfg, double L);
/// Potential of the experiment on Omega_L.
PotentialSpec expanding_potential(const ExperimentConfig& cfg, double L);

/// Cell shift for the experiment's potential, before the shift mode is applied.
ShiftReport experiment_shift(const ExperimentConfig& cfg);
/// sigma for the configured shift mode.
double applied_shift(const ExperimentConfig& cfg, const ShiftReport& cell);

struct ExpandingResult {
  double L = 0.0;
  std::size_t n_nodes = 0;
  std::size_t n_dofs = 0;
  std::vector<EigResult> pairs;
  bool converged = false;
  double sigma = 0.0;
  double max_phi = 0.0;
  double t_assembly = 0.0;
  double t_eig = 0.0;
  std::vector<std::string> warnings;
};

/// Assemble the Omega_L pencil and run the configured solver with the given
/// shift. A shift above the discrete ground state is backed off and reported.
ExpandingResult solve_expanding_problem(const ExperimentConfig& cfg, double L, double sigma);
/// Same, computing the cell shift first.
ExpandingResult solve_expanding_problem(const ExperimentConfig& cfg, double L);

struct FactorizationRow {
  int m = 0;
  double lambda = 0.0;       // Dirichlet-Dirichlet, weight 1, potential V
  double lambda_phi_y = 0.0; // cell ground state
  double lambda_u_y2 = 0.0;  // Dirichlet-Neumann, weight (E phi_y)^2, no potential
  double defect = 0.0;
  double relative_defect = 0.0;
};

struct FactorizationReport {
  int cells_per_unit = 0;
  std::vector<FactorizationRow> rows;
};

FactorizationReport factorization_check(const PotentialSpec& v, double L, double ell, int cells_per_unit,
                                        int m, int order = 1, Exec exec = Exec::parallel);

/// Scaled problem on the unit box: -div(rho(Lx,y) diag(1,..,L^power) grad u) = lambda rho(Lx,y) u.
struct ScaledPencil {
  std::shared_ptr<const Mesh> mesh;
  std::shared_ptr<const DofMap> dofs;
  Pencil pencil;
};
ScaledPencil scaled_homogenization_pencil(const ScalarFunction& rho, int p, int q, double L,
                                          int intervals_per_period, int y_intervals, int order,
                                          double y_scale_power, Exec exec = Exec::parallel);

/// Weight of the two-direction homogenization study on (0,1)^3.
double study_weight(const Point& z);

struct HomogErrorRow {
  double L = 0.0;
  int m = 0;
  double lambda = 0.0;
  double nu = 0.0;
  double eig_rel_error = 0.0;
  double fun_rel_error = 0.0;
};

struct HomogStudy {
  HomogenizedModel model;
  std::vector<HomogErrorRow> rows;
  bool converged = true;
  std::vector<std::string> warnings;
};

HomogStudy homogenization_study(const ExperimentConfig& cfg);

/// Chain geometry: masked grid over the disks B_R((R + 2(i-1) r, 0)).
std::shared_ptr<const Mesh> chain_mesh(const CoulombParams& c, int n, int cells_per_period, int order,
                                       double margin);
std::shared_ptr<const Mesh> chain_cell_mesh(const CoulombParams& c, int cells_per_period, int order);

struct ExperimentReport {
  bool converged = true;
  std::vector<std::string> files;
  std::vector<std::string> warnings;
};

/// Run one experiment and write its CSV files into cfg.out_dir. Rows are
/// flushed as they are produced.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

} // namespace pseig
