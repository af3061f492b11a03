#include "tspace/bench/workloads.hpp"

#include <algorithm>
#include <bit>
#include <queue>
#include <stdexcept>

#include "tspace/md5.hpp"
#include "tspace/rng.hpp"

namespace tspace::bench {

std::pair<std::int64_t, std::int64_t> partition_range(std::int64_t total, int parts, int k) {
  if (parts < 1 || k < 0 || k >= parts) throw std::out_of_range("bad partition index");
  const std::int64_t base = total / parts;
  const std::int64_t extra = total % parts;
  const std::int64_t begin = k * base + std::min<std::int64_t>(k, extra);
  return {begin, begin + base + (k < extra ? 1 : 0)};
}

std::string password_of(std::int64_t i) { return std::to_string(i); }

std::string password_hash(std::int64_t i) { return md5_hex(password_of(i)); }

std::vector<std::int64_t> password_task_draws(std::int64_t db_size, int tasks,
                                              std::uint64_t seed) {
  if (db_size < 1) throw std::invalid_argument("empty password database");
  SplitMix64 rng(seed);
  std::vector<std::int64_t> out(static_cast<std::size_t>(tasks));
  for (auto& x : out) x = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(db_size)));
  return out;
}

std::vector<std::int64_t> sort_input(std::int64_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<std::int64_t> out(static_cast<std::size_t>(n));
  for (auto& x : out) x = static_cast<std::int64_t>(rng.next());
  return out;
}

std::vector<std::int64_t> merge_runs(const std::vector<std::vector<std::int64_t>>& runs) {
  using Head = std::pair<std::int64_t, std::size_t>;  // value, run index
  std::priority_queue<Head, std::vector<Head>, std::greater<>> heap;
  std::vector<std::size_t> pos(runs.size(), 0);
  std::size_t total = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    total += runs[r].size();
    if (!runs[r].empty()) heap.emplace(runs[r][0], r);
  }
  std::vector<std::int64_t> out;
  out.reserve(total);
  while (!heap.empty()) {
    auto [v, r] = heap.top();
    heap.pop();
    out.push_back(v);
    if (++pos[r] < runs[r].size()) heap.emplace(runs[r][pos[r]], r);
  }
  return out;
}

Grid ocean_initial(int n) {
  Grid g{n, std::vector<double>(static_cast<std::size_t>(n) * n, 0.0)};
  for (int c = 0; c < n; ++c) g.at(0, c) = 1.0;
  return g;
}

void jacobi_step(const Grid& cur, Grid& next) {
  next = cur;
  const int n = cur.n;
  for (int r = 1; r < n - 1; ++r) {
    for (int c = 1; c < n - 1; ++c) {
      next.at(r, c) = jacobi_cell(cur.at(r - 1, c), cur.at(r + 1, c), cur.at(r, c - 1),
                                  cur.at(r, c + 1));
    }
  }
}

Grid ocean_reference(int n, int iters) {
  Grid cur = ocean_initial(n);
  Grid next;
  for (int t = 0; t < iters; ++t) {
    jacobi_step(cur, next);
    std::swap(cur, next);
  }
  return cur;
}

std::pair<int, int> panel_columns(int n, int workers, int k) {
  auto [b, e] = partition_range(n, workers, k);
  return {static_cast<int>(b), static_cast<int>(e - b)};
}

std::pair<Matrix, Matrix> matmul_inputs(int n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const auto cells = static_cast<std::size_t>(n) * n;
  Matrix a{n, std::vector<double>(cells)};
  Matrix b{n, std::vector<double>(cells)};
  for (auto& x : a.v) x = rng.unit();
  for (auto& x : b.v) x = rng.unit();
  return {std::move(a), std::move(b)};
}

void axpy_row(double a_ij, std::span<const double> b_row, std::span<double> c_row) {
  for (std::size_t x = 0; x < c_row.size(); ++x) c_row[x] += a_ij * b_row[x];
}

Matrix matmul_reference(const Matrix& a, const Matrix& b) {
  const int n = a.n;
  Matrix c{n, std::vector<double>(static_cast<std::size_t>(n) * n, 0.0)};
  for (int i = 0; i < n; ++i) {
    std::span<double> c_row(c.v.data() + static_cast<std::size_t>(i) * n, n);
    for (int j = 0; j < n; ++j) axpy_row(a.v[static_cast<std::size_t>(i) * n + j], b.row(j), c_row);
  }
  return c;
}

namespace {

template <typename T>
std::string digest_words(std::span<const T> values) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(values.size() * 8);
  for (T v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  return md5_hex(bytes);
}

}  // namespace

std::string digest_ints(std::span<const std::int64_t> values) { return digest_words(values); }
std::string digest_doubles(std::span<const double> values) { return digest_words(values); }

}  // namespace tspace::bench
