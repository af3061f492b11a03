#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tspace/bench/config.hpp"

// Input generation and single-process reference computations for the four
// workloads. Everything here is deterministic in (size, seed).

namespace tspace::bench {

/// Half-open range [begin, end) of part k when `total` items are split into
/// `parts` contiguous parts whose sizes differ by at most one (larger first).
std::pair<std::int64_t, std::int64_t> partition_range(std::int64_t total, int parts, int k);

// --- password search -------------------------------------------------------

std::string password_of(std::int64_t i);
std::string password_hash(std::int64_t i);
/// Indices of the task passwords, drawn uniformly with replacement.
std::vector<std::int64_t> password_task_draws(std::int64_t db_size, int tasks, std::uint64_t seed);

// --- sorting -----------------------------------------------------------------

/// Largest array shipped in a single tuple (4 Mi elements, 32 MiB).
inline constexpr std::size_t kMaxArrayElements = std::size_t{4} << 20;

std::vector<std::int64_t> sort_input(std::int64_t n, std::uint64_t seed);
/// k-way merge of individually sorted runs.
std::vector<std::int64_t> merge_runs(const std::vector<std::vector<std::int64_t>>& runs);

// --- ocean -------------------------------------------------------------------

/// Row-major n x n grid.
struct Grid {
  int n = 0;
  std::vector<double> cells;
  double& at(int r, int c) { return cells[static_cast<std::size_t>(r) * n + c]; }
  double at(int r, int c) const { return cells[static_cast<std::size_t>(r) * n + c]; }
};

/// Top row 1.0, everything else 0.0.
Grid ocean_initial(int n);
/// One Jacobi sweep over the interior; the outer ring is held fixed.
void jacobi_step(const Grid& cur, Grid& next);
Grid ocean_reference(int n, int iters);

/// The 5-point update used by both the reference and the workers.
inline double jacobi_cell(double up, double down, double left, double right) {
  return 0.25 * (up + down + left + right);
}

/// First column and width of worker k's vertical panel.
std::pair<int, int> panel_columns(int n, int workers, int k);

// --- matrix multiplication -----------------------------------------------------

/// Row-major n x n matrix.
struct Matrix {
  int n = 0;
  std::vector<double> v;
  std::span<const double> row(int i) const {
    return std::span<const double>(v).subspan(static_cast<std::size_t>(i) * n, n);
  }
};

/// A then B, each filled row by row with uniform [0, 1) draws.
std::pair<Matrix, Matrix> matmul_inputs(int n, std::uint64_t seed);
/// C = A B, each row accumulated over ascending j starting from 0.0.
Matrix matmul_reference(const Matrix& a, const Matrix& b);
/// Adds a_ij * b_j to c_i; the accumulation step shared with the workers.
void axpy_row(double a_ij, std::span<const double> b_row, std::span<double> c_row);

inline int a_row_owner(int i, int workers) { return i % workers; }
inline int b_row_owner(int j, int workers, Distribution d) {
  return d == Distribution::BOnOne ? 0 : j % workers;
}

// --- digests -----------------------------------------------------------------

std::string digest_ints(std::span<const std::int64_t> values);
std::string digest_doubles(std::span<const double> values);

}  // namespace tspace::bench
