// Serial reference vs OpenMP kernels.
//   ./pseig_bench --benchmark_filter=Spmv

#include <benchmark/benchmark.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

#include "pseig/assembly.hpp"
#include "pseig/grid.hpp"
#include "pseig/sparse.hpp"

using namespace pseig;

namespace {

struct Laplace {
  Mesh mesh;
  DofMap dofs;
  Pencil pencil;
};

const Laplace& problem(int n) {
  static std::vector<std::unique_ptr<Laplace>> cache(2049);
  auto& slot = cache[static_cast<std::size_t>(n)];
  if (!slot) {
    slot = std::make_unique<Laplace>();
    const int cells[2] = {n, n};
    slot->mesh = build_box_mesh({1, 1, 1.0, 1.0}, cells, 1);
    slot->dofs = build_dof_map(slot->mesh, {Boundary::dirichlet, Boundary::dirichlet});
    slot->pencil = assemble_pencil(slot->mesh, slot->dofs, {});
  }
  return *slot;
}

std::vector<double> random_vector(std::size_t n) {
  std::mt19937 gen(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(gen);
  return v;
}

Exec exec_of(const benchmark::State& s) { return s.range(1) ? Exec::parallel : Exec::serial; }

void BM_Spmv(benchmark::State& state) {
  const auto& p = problem(static_cast<int>(state.range(0)));
  const auto x = random_vector(p.pencil.a.rows());
  std::vector<double> y(x.size());
  for (auto _ : state) {
    spmv(p.pencil.a, x, y, exec_of(state));
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(p.pencil.a.nnz()));
}

void BM_Dot(benchmark::State& state) {
  const auto x = random_vector(static_cast<std::size_t>(state.range(0)));
  const auto y = random_vector(x.size());
  for (auto _ : state) benchmark::DoNotOptimize(dot(x, y, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Axpy(benchmark::State& state) {
  const auto x = random_vector(static_cast<std::size_t>(state.range(0)));
  auto y = random_vector(x.size());
  for (auto _ : state) {
    axpy(1e-9, x, y, exec_of(state));
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Assemble(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int cells[2] = {n, n};
  const Mesh mesh = build_box_mesh({1, 1, 1.0, 1.0}, cells, 1);
  const DofMap dofs = build_dof_map(mesh, {Boundary::periodic, Boundary::dirichlet});
  CoefficientSpec c;
  c.potential = [](const Point& z) { return 100.0 * std::pow(std::sin(std::numbers::pi * z[0]) * z[1], 2); };
  for (auto _ : state) {
    Pencil p = assemble_pencil(mesh, dofs, c, exec_of(state));
    benchmark::DoNotOptimize(p.a.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(mesh.n_cells()));
}

} // namespace

BENCHMARK(BM_Spmv)->ArgNames({"n", "omp"})->ArgsProduct({{128, 512}, {0, 1}});
BENCHMARK(BM_Dot)->ArgNames({"n", "omp"})->ArgsProduct({{1 << 16, 1 << 20}, {0, 1}});
BENCHMARK(BM_Axpy)->ArgNames({"n", "omp"})->ArgsProduct({{1 << 16, 1 << 20}, {0, 1}});
BENCHMARK(BM_Assemble)->ArgNames({"n", "omp"})->ArgsProduct({{64, 256}, {0, 1}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
