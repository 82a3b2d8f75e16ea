#include "udi/kernels.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace udi::kernels {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
// Parallelism only pays off past this many flops per output row.
constexpr long long kParallelCutoff = 16 * 1024;
}  // namespace

void matmul_nn(const double* a, const double* b, double* c, int n, int k, int m, bool acc) {
  const long long work = static_cast<long long>(n) * k * m;
#pragma omp parallel for if (work > kParallelCutoff) schedule(static)
  for (int i = 0; i < n; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * m;
    if (!acc) {
      for (int j = 0; j < m; ++j) ci[j] = 0.0;
    }
    for (int p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + static_cast<std::size_t>(p) * m;
      for (int j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c, int n, int k, int m, bool acc) {
  const long long work = static_cast<long long>(n) * k * m;
#pragma omp parallel for if (work > kParallelCutoff) schedule(static)
  for (int i = 0; i < n; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * m;
    for (int j = 0; j < m; ++j) {
      const double* bj = b + static_cast<std::size_t>(j) * k;
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] = acc ? ci[j] + s : s;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c, int n, int k, int m, bool acc) {
  const long long work = static_cast<long long>(n) * k * m;
#pragma omp parallel for if (work > kParallelCutoff) schedule(static)
  for (int i = 0; i < k; ++i) {
    double* ci = c + static_cast<std::size_t>(i) * m;
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (int p = 0; p < n; ++p)
        s += a[static_cast<std::size_t>(p) * k + i] * b[static_cast<std::size_t>(p) * m + j];
      ci[j] = acc ? ci[j] + s : s;
    }
  }
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(const double* a, double c, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * c;
}

void relu(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void exp(const double* a, double* out, std::size_t n) {
#pragma omp parallel for if (n > 4096) schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) out[i] = std::exp(a[i]);
}

void log_clamped(const double* a, double floor, double* out, std::size_t n) {
#pragma omp parallel for if (n > 4096) schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    out[i] = std::log(a[i] > floor ? a[i] : floor);
}

void axpy(const double* a, double c, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += c * a[i];
}

void softmax_rows(const double* z, double* out, int n, int m) {
#pragma omp parallel for if (static_cast<long long>(n) * m > kParallelCutoff) schedule(static)
  for (int i = 0; i < n; ++i) {
    const double* zi = z + static_cast<std::size_t>(i) * m;
    double* oi = out + static_cast<std::size_t>(i) * m;
    double mx = zi[0];
    for (int j = 1; j < m; ++j) mx = zi[j] > mx ? zi[j] : mx;
    double s = 0.0;
    for (int j = 0; j < m; ++j) {
      oi[j] = std::exp(zi[j] - mx);
      s += oi[j];
    }
    const double inv = 1.0 / s;
    for (int j = 0; j < m; ++j) oi[j] *= inv;
  }
}

void gauss_logdensity(const double* mu, const double* lv, const double* y,
                      double* out, int n, int d) {
#pragma omp parallel for if (static_cast<long long>(n) * d > kParallelCutoff) schedule(static)
  for (int i = 0; i < n; ++i) {
    const std::size_t off = static_cast<std::size_t>(i) * d;
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
      const double diff = y[off + j] - mu[off + j];
      const double l = lv[off + j];
      s += -0.5 * diff * diff * std::exp(-l) - 0.5 * (l + kLog2Pi);
    }
    out[i] = s;
  }
}

void gauss_cross_logdensity(const double* mu, const double* lv, const double* y,
                            double* out, int n, int d) {
#pragma omp parallel for if (static_cast<long long>(n) * n * d > kParallelCutoff) schedule(static)
  for (int i = 0; i < n; ++i) {
    const double* mi = mu + static_cast<std::size_t>(i) * d;
    const double* li = lv + static_cast<std::size_t>(i) * d;
    double* oi = out + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* yj = y + static_cast<std::size_t>(j) * d;
      double s = 0.0;
      for (int t = 0; t < d; ++t) {
        const double diff = yj[t] - mi[t];
        s += -0.5 * diff * diff * std::exp(-li[t]) - 0.5 * (li[t] + kLog2Pi);
      }
      oi[j] = s;
    }
  }
}

void gauss_cross_backward(const double* mu, const double* lv, const double* y,
                          const double* g, double* gmu, double* glv, double* gy,
                          int n, int d) {
  // mu and lv rows only receive contributions from row i of g; y rows only
  // from column j. Split into two passes so each output row has one writer.
  if (gmu != nullptr || glv != nullptr) {
#pragma omp parallel for if (static_cast<long long>(n) * n * d > kParallelCutoff) schedule(static)
    for (int i = 0; i < n; ++i) {
      const std::size_t off = static_cast<std::size_t>(i) * d;
      const double* gi = g + static_cast<std::size_t>(i) * n;
      for (int t = 0; t < d; ++t) {
        const double m = mu[off + t];
        const double e = std::exp(-lv[off + t]);
        double sm = 0.0, sl = 0.0;
        for (int j = 0; j < n; ++j) {
          const double diff = y[static_cast<std::size_t>(j) * d + t] - m;
          sm += gi[j] * diff;
          sl += gi[j] * (diff * diff * e - 1.0);
        }
        if (gmu) gmu[off + t] += sm * e;
        if (glv) glv[off + t] += 0.5 * sl;
      }
    }
  }
  if (gy != nullptr) {
#pragma omp parallel for if (static_cast<long long>(n) * n * d > kParallelCutoff) schedule(static)
    for (int j = 0; j < n; ++j) {
      const std::size_t off = static_cast<std::size_t>(j) * d;
      for (int t = 0; t < d; ++t) {
        const double yv = y[off + t];
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
          const std::size_t ioff = static_cast<std::size_t>(i) * d;
          s -= g[static_cast<std::size_t>(i) * n + j] * (yv - mu[ioff + t]) *
               std::exp(-lv[ioff + t]);
        }
        gy[off + t] += s;
      }
    }
  }
}

}  // namespace udi::kernels
