#pragma once

#include <cstddef>

// Data-parallel inner loops behind the tensor ops. Every kernel writes each
// output element from exactly one thread with a serial inner reduction, so
// results are bit-identical regardless of thread count. Whole-array
// reductions stay serial for the same reason. A plain-loop mirror of these
// lives in serial_ref.hpp for tests and the kernel benchmark.
namespace udi::kernels {

// C[n x m] = A[n x k] * B[k x m], plus C if acc.
void matmul_nn(const double* a, const double* b, double* c, int n, int k, int m, bool acc);
// C[n x m] = A[n x k] * B[m x k]^T
void matmul_nt(const double* a, const double* b, double* c, int n, int k, int m, bool acc);
// C[k x m] = A[n x k]^T * B[n x m]
void matmul_tn(const double* a, const double* b, double* c, int n, int k, int m, bool acc);

void add(const double* a, const double* b, double* out, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
void scale(const double* a, double c, double* out, std::size_t n);
void relu(const double* a, double* out, std::size_t n);
void exp(const double* a, double* out, std::size_t n);
// log with the argument clamped below at `floor`.
void log_clamped(const double* a, double floor, double* out, std::size_t n);

// axpy: out += c * a
void axpy(const double* a, double c, double* out, std::size_t n);

// Row-stable softmax over an n x m matrix.
void softmax_rows(const double* z, double* out, int n, int m);

// Per-row diagonal-Gaussian log density:
//   out[i] = sum_d [ -(y[i,d]-mu[i,d])^2 / (2 exp(lv[i,d])) - (lv[i,d] + log 2pi)/2 ]
void gauss_logdensity(const double* mu, const double* lv, const double* y,
                      double* out, int n, int d);
// Cross grid: out[i,j] = log density of row j of y under the conditional at row i.
void gauss_cross_logdensity(const double* mu, const double* lv, const double* y,
                            double* out, int n, int d);
// Backward of the cross grid given upstream g[n x n]; accumulates into the
// (optional, nullable) gradient buffers.
void gauss_cross_backward(const double* mu, const double* lv, const double* y,
                          const double* g, double* gmu, double* glv, double* gy,
                          int n, int d);

}  // namespace udi::kernels
