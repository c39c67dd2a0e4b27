#include "pseig/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pseig/errors.hpp"

namespace pseig {

void DomainSpec::validate() const {
  if (p < 0 || q < 0 || p + q < 1 || p + q > kMaxDim) {
    throw ConfigError("domain: need p, q >= 0 and 1 <= p+q <= 3 (got p=" + std::to_string(p) +
                      ", q=" + std::to_string(q) + ")");
  }
  if (!(L > 0.0) || !(ell > 0.0)) {
    throw ConfigError("domain: lengths must be positive");
  }
}

Mesh::Mesh(const DomainSpec& domain, std::span<const int> cells, int order, const Point& origin)
    : domain_(domain), order_(order), origin_(origin) {
  domain_.validate();
  if (static_cast<int>(cells.size()) != domain_.dim()) {
    throw ConfigError("mesh: " + std::to_string(cells.size()) + " cell counts given for a " +
                      std::to_string(domain_.dim()) + "-dimensional domain");
  }
  if (order != 1 && order != 2) {
    throw ConfigError("mesh: element order must be 1 or 2");
  }
  n_cells_ = 1;
  n_nodes_ = 1;
  for (int d = 0; d < dim(); ++d) {
    if (cells[d] < 1) throw ConfigError("mesh: cell counts must be >= 1");
    cells_[d] = cells[d];
    n_cells_ *= static_cast<std::size_t>(cells_[d]);
    n_nodes_ *= static_cast<std::size_t>(nodes_along(d));
  }
  active_.assign(n_cells_, 1);
}

std::size_t Mesh::active_count() const {
  return static_cast<std::size_t>(std::count(active_.begin(), active_.end(), std::uint8_t{1}));
}

Index Mesh::cell_index(std::size_t cell) const {
  Index c{0, 0, 0};
  for (int d = 0; d < dim(); ++d) {
    c[d] = static_cast<int>(cell % cells_[d]);
    cell /= cells_[d];
  }
  return c;
}

std::size_t Mesh::cell_id(const Index& c) const {
  std::size_t id = 0;
  for (int d = dim() - 1; d >= 0; --d) id = id * cells_[d] + c[d];
  return id;
}

Index Mesh::node_index(std::size_t node) const {
  Index n{0, 0, 0};
  for (int d = 0; d < dim(); ++d) {
    const auto nd = static_cast<std::size_t>(nodes_along(d));
    n[d] = static_cast<int>(node % nd);
    node /= nd;
  }
  return n;
}

std::size_t Mesh::node_id(const Index& n) const {
  std::size_t id = 0;
  for (int d = dim() - 1; d >= 0; --d) id = id * nodes_along(d) + n[d];
  return id;
}

Point Mesh::node_point(std::size_t node) const {
  const Index n = node_index(node);
  Point z{0.0, 0.0, 0.0};
  for (int d = 0; d < dim(); ++d) z[d] = node_coord(d, n[d]);
  return z;
}

Point Mesh::cell_center(std::size_t cell) const {
  const Index c = cell_index(cell);
  Point z{0.0, 0.0, 0.0};
  for (int d = 0; d < dim(); ++d) z[d] = origin_[d] + (c[d] + 0.5) * spacing(d);
  return z;
}

int Mesh::nodes_per_cell() const {
  int n = 1;
  for (int d = 0; d < dim(); ++d) n *= order_ + 1;
  return n;
}

void Mesh::cell_nodes(std::size_t cell, std::span<std::size_t> out) const {
  const Index c = cell_index(cell);
  const int k = order_ + 1;
  const int count = nodes_per_cell();
  for (int a = 0; a < count; ++a) {
    Index n{0, 0, 0};
    int rest = a;
    for (int d = 0; d < dim(); ++d) {
      n[d] = c[d] * order_ + rest % k;
      rest /= k;
    }
    out[a] = node_id(n);
  }
}

int Mesh::cells_around(std::size_t node, std::span<std::size_t> out) const {
  const Index n = node_index(node);
  // candidate cell range per direction
  Index lo{0, 0, 0};
  Index hi{0, 0, 0};
  for (int d = 0; d < dim(); ++d) {
    const int i = n[d];
    lo[d] = (i % order_ == 0) ? i / order_ - 1 : i / order_;
    hi[d] = i / order_;
    lo[d] = std::max(lo[d], 0);
    hi[d] = std::min(hi[d], cells_[d] - 1);
  }
  int count = 0;
  Index c{0, 0, 0};
  for (c[2] = lo[2]; c[2] <= hi[2]; ++c[2]) {
    for (c[1] = lo[1]; c[1] <= hi[1]; ++c[1]) {
      for (c[0] = lo[0]; c[0] <= hi[0]; ++c[0]) {
        out[count++] = cell_id(c);
      }
    }
  }
  return count;
}

bool Mesh::node_in_use(std::size_t node) const {
  std::array<std::size_t, 8> around{};
  const int count = cells_around(node, around);
  for (int i = 0; i < count; ++i) {
    if (active(around[i])) return true;
  }
  return false;
}

std::size_t Mesh::locate(const Point& z, Point& local) const {
  Index c{0, 0, 0};
  local = {0.0, 0.0, 0.0};
  for (int d = 0; d < dim(); ++d) {
    const double t = (z[d] - origin_[d]) / spacing(d);
    int ci = static_cast<int>(std::floor(t));
    ci = std::clamp(ci, 0, cells_[d] - 1);
    c[d] = ci;
    local[d] = std::clamp(t - ci, 0.0, 1.0);
  }
  return cell_id(c);
}

Mesh build_box_mesh(const DomainSpec& domain, std::span<const int> cells, int order,
                    const Point& origin) {
  return Mesh(domain, cells, order, origin);
}

Mesh mask_cells(Mesh mesh, const CellPredicate& keep) {
  auto& mask = mesh.mutable_mask();
  for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
    if (mask[c] && !keep(mesh.cell_center(c))) mask[c] = 0;
  }
  if (mesh.active_count() == 0) {
    throw ConfigError("mask_cells: predicate removed every cell");
  }
  return mesh;
}

namespace {

// Faces of a periodic direction must carry the same active pattern.
void check_periodic_mask(const Mesh& mesh, int dir) {
  if (!mesh.masked()) return;
  const int n = mesh.cells()[dir];
  for (std::size_t cell = 0; cell < mesh.n_cells(); ++cell) {
    Index c = mesh.cell_index(cell);
    if (c[dir] != 0) continue;
    Index far = c;
    far[dir] = n - 1;
    if (mesh.active(cell) != mesh.active(mesh.cell_id(far))) {
      throw ConfigError("build_dof_map: periodic direction " + std::to_string(dir) +
                        " has non-congruent active faces");
    }
  }
}

} // namespace

DofMap build_dof_map(const Mesh& mesh, const BoundarySpec& bc, BarrierMode barrier) {
  const int dim = mesh.dim();
  const DomainSpec& domain = mesh.domain();
  std::array<Boundary, kMaxDim> kind{};
  for (int d = 0; d < dim; ++d) {
    kind[d] = bc.along(domain, d);
    if (kind[d] == Boundary::periodic) check_periodic_mask(mesh, d);
  }

  const std::size_t n_nodes = mesh.n_nodes();
  DofMap map;
  map.periodic_rep.resize(n_nodes);
  map.node_to_dof.assign(n_nodes, kNoDof);

  std::vector<std::uint8_t> free(n_nodes, 0);
  std::array<std::size_t, 8> around{};
  for (std::size_t node = 0; node < n_nodes; ++node) {
    Index idx = mesh.node_index(node);
    bool eliminated = false;
    Index rep = idx;
    for (int d = 0; d < dim; ++d) {
      const int last = mesh.nodes_along(d) - 1;
      const bool on_face = idx[d] == 0 || idx[d] == last;
      if (kind[d] == Boundary::dirichlet && on_face) eliminated = true;
      if (kind[d] == Boundary::periodic && idx[d] == last) rep[d] = 0;
    }
    map.periodic_rep[node] = mesh.node_id(rep);

    // Active-region test, with periodic wrap so that paired nodes agree.
    bool any_active = false;
    bool any_inactive = false;
    const int count = mesh.cells_around(node, around);
    for (int i = 0; i < count; ++i) {
      (mesh.active(around[i]) ? any_active : any_inactive) = true;
    }
    for (int d = 0; d < dim && mesh.masked(); ++d) {
      if (kind[d] != Boundary::periodic) continue;
      const int last = mesh.nodes_along(d) - 1;
      if (idx[d] != 0 && idx[d] != last) continue;
      Index mirror = idx;
      mirror[d] = idx[d] == 0 ? last : 0;
      const int mc = mesh.cells_around(mesh.node_id(mirror), around);
      for (int i = 0; i < mc; ++i) {
        (mesh.active(around[i]) ? any_active : any_inactive) = true;
      }
    }
    if (!any_active) continue;
    if (any_inactive && barrier == BarrierMode::eliminate) eliminated = true;
    free[node] = eliminated ? 0 : 1;
  }

  std::int32_t next = 0;
  for (std::size_t node = 0; node < n_nodes; ++node) {
    if (map.periodic_rep[node] == node && free[node]) {
      map.node_to_dof[node] = next++;
      map.dof_node.push_back(node);
    }
  }
  for (std::size_t node = 0; node < n_nodes; ++node) {
    const std::size_t rep = map.periodic_rep[node];
    if (rep != node && free[node]) map.node_to_dof[node] = map.node_to_dof[rep];
  }
  map.n_free = static_cast<std::size_t>(next);
  if (map.n_free == 0) {
    throw ConfigError("build_dof_map: no free degrees of freedom");
  }
  return map;
}

std::string summary(const Mesh& mesh, const DofMap* dofs) {
  std::ostringstream os;
  os << "dim=" << mesh.dim() << " (p=" << mesh.domain().p << ", q=" << mesh.domain().q
     << ") order=" << mesh.order() << " cells=";
  for (int d = 0; d < mesh.dim(); ++d) os << (d ? "x" : "") << mesh.cells()[d];
  os << " nodes=" << mesh.n_nodes() << " active=" << mesh.active_count() << "/"
     << mesh.n_cells();
  if (dofs != nullptr) os << " n_free=" << dofs->n_free;
  return os.str();
}

} // namespace pseig
