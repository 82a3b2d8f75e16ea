// Times the OpenMP kernels against the serial reference and checks they
// agree bit for bit on the same inputs.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include "udi/kernels.hpp"
#include "udi/rng.hpp"
#include "udi/serial_ref.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace udi;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <typename Fn>
double best_of(int reps, Fn&& fn) {
  double best = 1e100;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now_seconds();
    fn();
    best = std::min(best, now_seconds() - t0);
  }
  return best;
}

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP disabled; parallel path runs serially\n");
#endif
  std::printf("%-28s %10s %10s %8s %s\n", "kernel", "serial(ms)", "openmp(ms)", "speedup",
              "bit-equal");

  Rng rng(2024);
  bool all_equal = true;

  for (int size : {64, 256, 512}) {
    const int n = size, k = size, m = size;
    auto a = random_vec(static_cast<std::size_t>(n) * k, rng);
    auto b = random_vec(static_cast<std::size_t>(k) * m, rng);
    std::vector<double> c_serial(static_cast<std::size_t>(n) * m);
    std::vector<double> c_omp(c_serial.size());

    const double ts = best_of(3, [&] {
      serial::matmul_nn(a.data(), b.data(), c_serial.data(), n, k, m, false);
    });
    const double tp = best_of(3, [&] {
      kernels::matmul_nn(a.data(), b.data(), c_omp.data(), n, k, m, false);
    });
    const bool eq = bit_equal(c_serial, c_omp);
    all_equal = all_equal && eq;
    char name[64];
    std::snprintf(name, sizeof(name), "matmul %dx%dx%d", n, k, m);
    std::printf("%-28s %10.3f %10.3f %8.2fx %s\n", name, ts * 1e3, tp * 1e3, ts / tp,
                eq ? "yes" : "NO");
  }

  for (int n : {256, 1024}) {
    const int d = 32;
    auto mu = random_vec(static_cast<std::size_t>(n) * d, rng);
    auto lv = random_vec(static_cast<std::size_t>(n) * d, rng);
    auto y = random_vec(static_cast<std::size_t>(n) * d, rng);
    std::vector<double> g_serial(static_cast<std::size_t>(n) * n);
    std::vector<double> g_omp(g_serial.size());

    const double ts = best_of(3, [&] {
      serial::gauss_cross_logdensity(mu.data(), lv.data(), y.data(), g_serial.data(), n, d);
    });
    const double tp = best_of(3, [&] {
      kernels::gauss_cross_logdensity(mu.data(), lv.data(), y.data(), g_omp.data(), n, d);
    });
    const bool eq = bit_equal(g_serial, g_omp);
    all_equal = all_equal && eq;
    char name[64];
    std::snprintf(name, sizeof(name), "gauss_cross n=%d d=%d", n, d);
    std::printf("%-28s %10.3f %10.3f %8.2fx %s\n", name, ts * 1e3, tp * 1e3, ts / tp,
                eq ? "yes" : "NO");
  }

  {
    const int n = 4096, m = 64;
    auto z = random_vec(static_cast<std::size_t>(n) * m, rng);
    std::vector<double> p_serial(z.size()), p_omp(z.size());
    const double ts = best_of(3, [&] { serial::softmax_rows(z.data(), p_serial.data(), n, m); });
    const double tp = best_of(3, [&] { kernels::softmax_rows(z.data(), p_omp.data(), n, m); });
    const bool eq = bit_equal(p_serial, p_omp);
    all_equal = all_equal && eq;
    std::printf("%-28s %10.3f %10.3f %8.2fx %s\n", "softmax 4096x64", ts * 1e3, tp * 1e3,
                ts / tp, eq ? "yes" : "NO");
  }

  std::printf("%s\n", all_equal ? "all kernels bit-identical to the serial reference"
                                : "MISMATCH between kernels and serial reference");
  return all_equal ? 0 : 1;
}
