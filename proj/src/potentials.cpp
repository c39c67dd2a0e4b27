#include "pseig/potentials.hpp"

#include <cmath>
#include <numbers>

#include "pseig/errors.hpp"

namespace pseig {

namespace {

constexpr double kPi = std::numbers::pi;

double frac(double t) { return t - std::floor(t); }

double base_value(const PotentialSpec& s, const Point& z) {
  switch (s.kind) {
    case PotentialKind::zero:
      return 0.0;
    case PotentialKind::product_sine: {
      double v = s.amplitude;
      for (int d = 0; d < s.dim; ++d) {
        const double t = std::sin(s.frequency * z[static_cast<std::size_t>(d)]);
        v *= t * t;
      }
      return v;
    }
    case PotentialKind::sine_y2: {
      double v = s.amplitude;
      for (int d = 0; d < s.dim; ++d) {
        const double t = z[static_cast<std::size_t>(d)];
        if (d < s.p) {
          const double sn = std::sin(kPi * t);
          v *= sn * sn;
        } else {
          v *= t * t;
        }
      }
      return v;
    }
    case PotentialKind::optical_lattice: {
      const auto& o = s.optical;
      const double k = o.omega * kPi / (2.0 * (o.radius - o.overlap));
      return s.amplitude * (1.0 - std::sin(k * (z[0] - o.overlap)) *
                                      std::sin(k * (z[1] - (o.radius - o.overlap))));
    }
    case PotentialKind::coulomb_chain: {
      const auto centers = chain_centers(s.coulomb);
      return coulomb_chain(z, centers, s.coulomb.charge, s.coulomb.cutoff, s.coulomb.radius);
    }
    case PotentialKind::kronig_penney: {
      double dist = 0.0;
      for (int d = 0; d < s.dim; ++d) {
        const double t = std::abs(frac(z[static_cast<std::size_t>(d)]) - 0.5);
        dist = s.kronig.norm == WellNorm::l1 ? dist + t : std::max(dist, t);
      }
      return dist < s.kronig.half_width ? 0.0 : s.amplitude;
    }
    case PotentialKind::custom:
      if (!s.custom) throw ConfigError("custom potential without a function");
      return s.custom(z);
  }
  return 0.0;
}

} // namespace

std::string PotentialSpec::name() const {
  switch (kind) {
    case PotentialKind::zero: return "zero";
    case PotentialKind::product_sine: return "product_sine";
    case PotentialKind::sine_y2: return "sine_y2";
    case PotentialKind::optical_lattice: return "optical_lattice";
    case PotentialKind::coulomb_chain: return "coulomb_chain";
    case PotentialKind::kronig_penney: return "kronig_penney";
    case PotentialKind::custom: return "custom";
  }
  return "unknown";
}

std::vector<Point> chain_centers(const CoulombParams& c) {
  std::vector<Point> out;
  const double step = 2.0 * c.half_period;
  if (c.ghosts) out.push_back({c.radius - step, 0.0, 0.0});
  for (int i = 0; i < c.count; ++i) out.push_back({c.radius + i * step, 0.0, 0.0});
  if (c.ghosts) out.push_back({c.radius + c.count * step, 0.0, 0.0});
  return out;
}

double coulomb_chain(const Point& z, std::span<const Point> centers, double charge, double cutoff,
                     double radius) {
  double v = 0.0;
  for (const auto& c : centers) {
    const double dist = std::hypot(z[0] - c[0], z[1] - c[1]);
    if (dist < radius) v -= charge / std::max(dist, cutoff);
  }
  return v;
}

double eval_potential(const PotentialSpec& spec, const Point& z) {
  double v = base_value(spec, z) + spec.lift;
  if (spec.barrier_a != 0.0 && spec.barrier_outside && spec.barrier_outside(z)) v += spec.barrier_a;
  return v;
}

PotentialSpec barrier_wrap(PotentialSpec v, CellPredicate outside, double a) {
  if (!(a >= 0.0)) throw ConfigError("barrier_wrap: penalty a must be >= 0");
  if (v.barrier_outside && v.barrier_a != 0.0) {
    // nest the existing barrier inside a custom closure
    auto inner = std::make_shared<PotentialSpec>(v);
    PotentialSpec wrapped;
    wrapped.kind = PotentialKind::custom;
    wrapped.period = v.period;
    wrapped.custom = [inner](const Point& z) { return eval_potential(*inner, z); };
    v = std::move(wrapped);
  }
  v.barrier_outside = std::move(outside);
  v.barrier_a = a;
  return v;
}

ScalarFunction as_function(const PotentialSpec& spec) {
  if (spec.kind == PotentialKind::zero && spec.lift == 0.0 && spec.barrier_a == 0.0) return {};
  if (spec.kind == PotentialKind::coulomb_chain) {
    // hoist the centre list out of the per-point evaluation
    auto centers = std::make_shared<const std::vector<Point>>(chain_centers(spec.coulomb));
    auto s = std::make_shared<const PotentialSpec>(spec);
    return [centers, s](const Point& z) {
      double v = coulomb_chain(z, *centers, s->coulomb.charge, s->coulomb.cutoff, s->coulomb.radius) + s->lift;
      if (s->barrier_a != 0.0 && s->barrier_outside && s->barrier_outside(z)) v += s->barrier_a;
      return v;
    };
  }
  auto s = std::make_shared<const PotentialSpec>(spec);
  return [s](const Point& z) { return eval_potential(*s, z); };
}

double potential_bound(const PotentialSpec& spec) {
  double b = 0.0;
  switch (spec.kind) {
    case PotentialKind::zero: b = 0.0; break;
    case PotentialKind::product_sine:
    case PotentialKind::kronig_penney: b = std::abs(spec.amplitude); break;
    case PotentialKind::sine_y2: b = std::abs(spec.amplitude); break; // on the unit-height domain
    case PotentialKind::optical_lattice: b = 2.0 * std::abs(spec.amplitude); break;
    case PotentialKind::coulomb_chain: {
      // each well is bounded by Z/b; count the centres within R of a centre
      const auto& c = spec.coulomb;
      const int wells = static_cast<int>(std::floor(c.radius / (2.0 * c.half_period))) * 2 + 1;
      b = wells * c.charge / c.cutoff;
      break;
    }
    case PotentialKind::custom: b = INFINITY; break;
  }
  return b + std::abs(spec.lift) + std::abs(spec.barrier_a);
}

} // namespace pseig
