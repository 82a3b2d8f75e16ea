#include "udi/serial_ref.hpp"

#include <cmath>

namespace udi::serial {

void matmul_nn(const double* a, const double* b, double* c, int n, int k, int m, bool acc) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (int p = 0; p < k; ++p)
        s += a[static_cast<std::size_t>(i) * k + p] * b[static_cast<std::size_t>(p) * m + j];
      double& out = c[static_cast<std::size_t>(i) * m + j];
      out = acc ? out + s : s;
    }
}

void matmul_nt(const double* a, const double* b, double* c, int n, int k, int m, bool acc) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (int p = 0; p < k; ++p)
        s += a[static_cast<std::size_t>(i) * k + p] * b[static_cast<std::size_t>(j) * k + p];
      double& out = c[static_cast<std::size_t>(i) * m + j];
      out = acc ? out + s : s;
    }
}

void matmul_tn(const double* a, const double* b, double* c, int n, int k, int m, bool acc) {
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (int p = 0; p < n; ++p)
        s += a[static_cast<std::size_t>(p) * k + i] * b[static_cast<std::size_t>(p) * m + j];
      double& out = c[static_cast<std::size_t>(i) * m + j];
      out = acc ? out + s : s;
    }
}

void softmax_rows(const double* z, double* out, int n, int m) {
  for (int i = 0; i < n; ++i) {
    const double* zi = z + static_cast<std::size_t>(i) * m;
    double* oi = out + static_cast<std::size_t>(i) * m;
    double mx = zi[0];
    for (int j = 1; j < m; ++j)
      if (zi[j] > mx) mx = zi[j];
    double s = 0.0;
    for (int j = 0; j < m; ++j) {
      oi[j] = std::exp(zi[j] - mx);
      s += oi[j];
    }
    const double inv = 1.0 / s;
    for (int j = 0; j < m; ++j) oi[j] *= inv;
  }
}

// Same arithmetic expression and constant as the parallel kernel so
// agreement can be checked bit for bit; only the threading differs.
constexpr double kLog2Pi = 1.8378770664093454836;

void gauss_logdensity(const double* mu, const double* lv, const double* y,
                      double* out, int n, int d) {
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * d + j;
      const double diff = y[idx] - mu[idx];
      s += -0.5 * diff * diff * std::exp(-lv[idx]) - 0.5 * (lv[idx] + kLog2Pi);
    }
    out[i] = s;
  }
}

void gauss_cross_logdensity(const double* mu, const double* lv, const double* y,
                            double* out, int n, int d) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int t = 0; t < d; ++t) {
        const std::size_t im = static_cast<std::size_t>(i) * d + t;
        const double diff = y[static_cast<std::size_t>(j) * d + t] - mu[im];
        s += -0.5 * diff * diff * std::exp(-lv[im]) - 0.5 * (lv[im] + kLog2Pi);
      }
      out[static_cast<std::size_t>(i) * n + j] = s;
    }
}

}  // namespace udi::serial
