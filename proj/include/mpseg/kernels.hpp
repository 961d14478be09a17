#pragma once

// Dense row-major kernels behind the tensor ops.
//
// Every kernel exists twice: `ref::` is the plain serial loop nest kept as
// the testing reference, the unqualified version distributes output rows
// over OpenMP threads. Each output element is produced by exactly one
// thread with the same summation order as the reference, so the two agree
// bit-for-bit for any thread count.

#include <cstddef>
#include <span>

namespace mpseg::kernels {

/// Below this many multiply-adds the parallel kernels stay serial.
inline constexpr std::size_t kParallelThreshold = 1 << 15;

// C[m×n] (+)= A[m×k] · B[k×n]
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
// C[m×n] (+)= A[m×k] · B[n×k]ᵀ
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
// C[k×n] (+)= A[m×k]ᵀ · B[m×n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);

/// Row-wise numerically stabilized softmax of a rows×cols matrix.
void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                  std::span<double> y);

/// Row-wise normalization to zero mean / unit variance: y = (x - mean) * rstd.
/// Writes per-row inverse standard deviations to `rstd`.
void normalize_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                    double eps, std::span<double> y, std::span<double> rstd);

namespace ref {
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, std::span<const double> a,
             std::span<const double> b, std::span<double> c, bool accumulate);
void softmax_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                  std::span<double> y);
void normalize_rows(std::size_t rows, std::size_t cols, std::span<const double> x,
                    double eps, std::span<double> y, std::span<double> rstd);
}  // namespace ref

/// Caps the number of threads used by the parallel kernels (0 = runtime default).
void set_max_threads(int n);
int max_threads();

}  // namespace mpseg::kernels
