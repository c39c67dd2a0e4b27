#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pseig/assembly.hpp"
#include "pseig/grid.hpp"

namespace pseig {

enum class PotentialKind : std::uint8_t {
  zero,
  product_sine,    // A * prod_d sin(f z_d)^2
  sine_y2,         // A * prod_{i<p} sin(pi x_i)^2 * prod_{j>=p} y_j^2
  optical_lattice, // A * (1 - sin(w pi (x-d) / (2(R-d))) sin(w pi (y-(R-d)) / (2(R-d))))
  coulomb_chain,   // truncated Coulomb wells on a chain of centres
  kronig_penney,   // 0 inside the well around the cell centre, A outside
  custom,
};

enum class WellNorm : std::uint8_t { l1, linf };

struct CoulombParams {
  double charge = 1.0;   // Z
  double cutoff = 1e-4;  // b
  double radius = 1.0;   // R, also the truncation radius
  double half_period = 0.9; // r
  int count = 1;         // N real centres at (R + 2(i-1) r, 0)
  bool ghosts = true;    // add c_1 - (2r,0) and c_N + (2r,0)
};

struct OpticalParams {
  double omega = 9.0;
  double radius = 1.0;
  double overlap = 0.1;
};

struct KronigPenneyParams {
  double half_width = 0.25;
  WellNorm norm = WellNorm::linf;
};

struct PotentialSpec {
  PotentialKind kind = PotentialKind::zero;
  double amplitude = 100.0;
  double frequency = 1.0;
  int p = 1;              // expanding directions (sine_y2)
  int dim = 2;            // total dimension (kronig_penney, product_sine)
  double period = 1.0;    // declared x-period
  double lift = 0.0;      // constant added everywhere
  CoulombParams coulomb{};
  OpticalParams optical{};
  KronigPenneyParams kronig{};
  ScalarFunction custom;
  // barrier: a * indicator(outside) added on top
  CellPredicate barrier_outside;
  double barrier_a = 0.0;

  std::string name() const;
};

double eval_potential(const PotentialSpec& spec, const Point& z);

/// Chain centres; with ghosts the first and last entries are the ghost centres.
std::vector<Point> chain_centers(const CoulombParams& c);

/// Sum of -Z / max(|z - c|, b) over centres with |z - c| < R.
double coulomb_chain(const Point& z, std::span<const Point> centers, double charge, double cutoff,
                     double radius);

/// V + a * outside(z). Throws ConfigError for a < 0. Repeated wrapping adds up.
PotentialSpec barrier_wrap(PotentialSpec v, CellPredicate outside, double a);

ScalarFunction as_function(const PotentialSpec& spec);

/// Analytic bound on |V| used by the boundedness property.
double potential_bound(const PotentialSpec& spec);

} // namespace pseig
