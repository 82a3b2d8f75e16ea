#pragma once

#include <cstddef>

// Plain-loop reference implementations of the parallel kernels. Linked only
// into the test and benchmark binaries; the unit tests compare the OpenMP
// path against these element for element.
namespace udi::serial {

void matmul_nn(const double* a, const double* b, double* c, int n, int k, int m, bool acc);
void matmul_nt(const double* a, const double* b, double* c, int n, int k, int m, bool acc);
void matmul_tn(const double* a, const double* b, double* c, int n, int k, int m, bool acc);
void softmax_rows(const double* z, double* out, int n, int m);
void gauss_logdensity(const double* mu, const double* lv, const double* y,
                      double* out, int n, int d);
void gauss_cross_logdensity(const double* mu, const double* lv, const double* y,
                            double* out, int n, int d);

}  // namespace udi::serial
