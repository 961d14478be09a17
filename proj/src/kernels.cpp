#include "mpseg/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>

namespace mpseg::kernels {

namespace {

// Row bodies shared by the serial and parallel drivers so both use the same
// floating-point operation order.

inline void nn_row(std::size_t i, std::size_t k, std::size_t n, const double* a, const double* b,
                   double* c, bool accumulate) {
  double* crow = c + i * n;
  if (!accumulate) std::fill(crow, crow + n, 0.0);
  const double* arow = a + i * k;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = arow[p];
    const double* brow = b + p * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

inline void nt_row(std::size_t i, std::size_t k, std::size_t n, const double* a, const double* b,
                   double* c, bool accumulate) {
  const double* arow = a + i * k;
  double* crow = c + i * n;
  for (std::size_t j = 0; j < n; ++j) {
    const double* brow = b + j * k;
    double s = 0.0;
    for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
    crow[j] = accumulate ? crow[j] + s : s;
  }
}

// Output row `p` of Aᵀ·B.
inline void tn_row(std::size_t p, std::size_t m, std::size_t k, std::size_t n, const double* a,
                   const double* b, double* c, bool accumulate) {
  double* crow = c + p * n;
  if (!accumulate) std::fill(crow, crow + n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double av = a[i * k + p];
    if (av == 0.0) continue;
    const double* brow = b + i * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

inline void softmax_row(std::size_t r, std::size_t cols, const double* x, double* y) {
  const double* xr = x + r * cols;
  double* yr = y + r * cols;
  double mx = xr[0];
  for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
  double s = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    yr[j] = std::exp(xr[j] - mx);
    s += yr[j];
  }
  const double inv = 1.0 / s;
  for (std::size_t j = 0; j < cols; ++j) yr[j] *= inv;
}

inline void normalize_row(std::size_t r, std::size_t cols, const double* x, double eps, double* y,
                          double* rstd) {
  const double* xr = x + r * cols;
  double* yr = y + r * cols;
  double mean = 0.0;
  for (std::size_t j = 0; j < cols; ++j) mean += xr[j];
  mean /= static_cast<double>(cols);
  double var = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    const double d = xr[j] - mean;
    var += d * d;
  }
  var /= static_cast<double>(cols);
  const double inv = 1.0 / std::sqrt(var + eps);
  rstd[r] = inv;
  for (std::size_t j = 0; j < cols; ++j) yr[j] = (xr[j] - mean) * inv;
}

int g_max_threads = 0;

int thread_count() { return g_max_threads > 0 ? g_max_threads : omp_get_max_threads(); }

}  // namespace

void set_max_threads(int n) { g_max_threads = std::max(0, n); }
int max_threads() { return thread_count(); }

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  const bool par = m * k * n >= kParallelThreshold;
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (par) num_threads(thread_count())
  for (std::ptrdiff_t i = 0; i < rows; ++i)
    nn_row(static_cast<std::size_t>(i), k, n, a.data(), b.data(), c.data(), accumulate);
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  const bool par = m * k * n >= kParallelThreshold;
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (par) num_threads(thread_count())
  for (std::ptrdiff_t i = 0; i < rows; ++i)
    nt_row(static_cast<std::size_t>(i), k, n, a.data(), b.data(), c.data(), accumulate);
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  const bool par = m * k * n >= kParallelThreshold;
  const auto rows = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel for schedule(static) if (par) num_threads(thread_count())
  for (std::ptrdiff_t p = 0; p < rows; ++p)
    tn_row(static_cast<std::size_t>(p), m, k, n, a.data(), b.data(), c.data(), accumulate);
}

void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                  std::span<double> y) {
  const bool par = rows * cols >= kParallelThreshold;
  const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (par) num_threads(thread_count())
  for (std::ptrdiff_t r = 0; r < n; ++r)
    softmax_row(static_cast<std::size_t>(r), cols, x.data(), y.data());
}

void normalize_rows(std::size_t rows, std::size_t cols, std::span<const double> x, double eps,
                    std::span<double> y, std::span<double> rstd) {
  const bool par = rows * cols >= kParallelThreshold;
  const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static) if (par) num_threads(thread_count())
  for (std::ptrdiff_t r = 0; r < n; ++r)
    normalize_row(static_cast<std::size_t>(r), cols, x.data(), eps, y.data(), rstd.data());
}

namespace ref {

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) nn_row(i, k, n, a.data(), b.data(), c.data(), accumulate);
}

void gemm_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) nt_row(i, k, n, a.data(), b.data(), c.data(), accumulate);
}

void gemm_tn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate) {
  for (std::size_t p = 0; p < k; ++p) tn_row(p, m, k, n, a.data(), b.data(), c.data(), accumulate);
}

void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                  std::span<double> y) {
  for (std::size_t r = 0; r < rows; ++r) softmax_row(r, cols, x.data(), y.data());
}

void normalize_rows(std::size_t rows, std::size_t cols, std::span<const double> x, double eps,
                    std::span<double> y, std::span<double> rstd) {
  for (std::size_t r = 0; r < rows; ++r) normalize_row(r, cols, x.data(), eps, y.data(), rstd.data());
}

}  // namespace ref

}  // namespace mpseg::kernels
