#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace pseig {

inline constexpr int kMaxDim = 3;
using Point = std::array<double, kMaxDim>;
using Index = std::array<int, kMaxDim>;

/// Box (0,L)^p x (0,ell)^q. The first p directions expand, the last q are
/// fixed. p = 0 describes a unit cell with the same types.
struct DomainSpec {
  int p = 1;
  int q = 1;
  double L = 1.0;
  double ell = 1.0;

  int dim() const { return p + q; }
  bool expanding(int dir) const { return dir < p; }
  double length(int dir) const { return dir < p ? L : ell; }
  void validate() const;
};

enum class Boundary : std::uint8_t { dirichlet, neumann, periodic };

/// Per-group boundary condition: bx on the faces normal to the expanding
/// directions, by on the faces normal to the fixed ones.
struct BoundarySpec {
  Boundary bx = Boundary::dirichlet;
  Boundary by = Boundary::dirichlet;

  Boundary along(const DomainSpec& domain, int dir) const {
    return domain.expanding(dir) ? bx : by;
  }
};

/// How nodes on the boundary of a masked (active) region are treated.
enum class BarrierMode : std::uint8_t {
  eliminate, // hard barrier: homogeneous Dirichlet on the cut
  natural,   // keep them free (natural condition on the cut)
};

/// Structured tensor-product grid with optional active-cell mask.
///
/// Cells and nodes are numbered lexicographically, x fastest. The node lattice
/// has order*cells+1 points per direction; node coordinates are
/// origin + i * (length / (order*cells)).
class Mesh {
public:
  Mesh() = default;
  Mesh(const DomainSpec& domain, std::span<const int> cells, int order,
       const Point& origin = {0.0, 0.0, 0.0});

  const DomainSpec& domain() const { return domain_; }
  int dim() const { return domain_.dim(); }
  int order() const { return order_; }
  const Index& cells() const { return cells_; }
  const Point& origin() const { return origin_; }

  double length(int dir) const { return domain_.length(dir); }
  double spacing(int dir) const { return length(dir) / cells_[dir]; }
  int nodes_along(int dir) const { return order_ * cells_[dir] + 1; }
  double node_coord(int dir, int i) const {
    return origin_[dir] + i * (length(dir) / (order_ * cells_[dir]));
  }

  std::size_t n_cells() const { return n_cells_; }
  std::size_t n_nodes() const { return n_nodes_; }
  std::size_t active_count() const;
  bool masked() const { return active_count() != n_cells_; }
  bool active(std::size_t cell) const { return active_[cell] != 0; }
  const std::vector<std::uint8_t>& active_mask() const { return active_; }

  Index cell_index(std::size_t cell) const;
  std::size_t cell_id(const Index& c) const;
  Index node_index(std::size_t node) const;
  std::size_t node_id(const Index& n) const;

  Point node_point(std::size_t node) const;
  Point cell_center(std::size_t cell) const;

  /// Global node ids of a cell, tensor-ordered (x fastest), (order+1)^dim.
  void cell_nodes(std::size_t cell, std::span<std::size_t> out) const;
  int nodes_per_cell() const;

  /// Cells (in range, unwrapped) that contain the node.
  int cells_around(std::size_t node, std::span<std::size_t> out) const;
  /// True when at least one active cell contains the node.
  bool node_in_use(std::size_t node) const;

  /// Locate the cell containing a point (clamped to the box) and return the
  /// local coordinates in [0,1]^dim.
  std::size_t locate(const Point& z, Point& local) const;

  std::vector<std::uint8_t>& mutable_mask() { return active_; }

private:
  DomainSpec domain_{};
  Index cells_{1, 1, 1};
  int order_ = 1;
  Point origin_{0.0, 0.0, 0.0};
  std::size_t n_cells_ = 0;
  std::size_t n_nodes_ = 0;
  std::vector<std::uint8_t> active_;
};

Mesh build_box_mesh(const DomainSpec& domain, std::span<const int> cells, int order,
                    const Point& origin = {0.0, 0.0, 0.0});

using CellPredicate = std::function<bool(const Point&)>;

/// Intersect the active set with keep(cell center). Throws ConfigError when
/// nothing is left.
Mesh mask_cells(Mesh mesh, const CellPredicate& keep);

inline constexpr std::int32_t kNoDof = -1;

/// Node -> free degree of freedom, after Dirichlet elimination and periodic
/// identification. Eliminated and unused nodes map to kNoDof.
struct DofMap {
  std::size_t n_free = 0;
  std::vector<std::int32_t> node_to_dof;
  std::vector<std::size_t> periodic_rep; // representative node of every node
  std::vector<std::size_t> dof_node;     // one representative node per dof

  std::int32_t dof(std::size_t node) const { return node_to_dof[node]; }
};

DofMap build_dof_map(const Mesh& mesh, const BoundarySpec& bc,
                     BarrierMode barrier = BarrierMode::eliminate);

std::string summary(const Mesh& mesh, const DofMap* dofs = nullptr);

} // namespace pseig
