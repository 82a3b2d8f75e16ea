#include "udi/ops.hpp"

#include <cmath>

#include "udi/kernels.hpp"

namespace udi {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

// Gradient buffer of a parent, or null when it does not participate.
double* grad_of(TensorNode& self, std::size_t parent) {
  TensorNode* p = self.parents[parent].node();
  return p->requires_grad ? p->grad.data() : nullptr;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  kernels::add(a.data().data(), b.data().data(), out.data(), out.size());
  return Tensor::make_node(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
    if (double* g = grad_of(self, 0)) kernels::axpy(self.grad.data(), 1.0, g, self.size());
    if (double* g = grad_of(self, 1)) kernels::axpy(self.grad.data(), 1.0, g, self.size());
  });
}

Tensor add_rowvec(const Tensor& x, const Tensor& bias) {
  const int n = x.rows(), m = x.cols();
  if (static_cast<int>(bias.size()) != m)
    throw ShapeError("add_rowvec: bias " + shape_str(bias.shape()) + " vs matrix " +
                     shape_str(x.shape()));
  std::vector<double> out(x.size());
  const double* bd = bias.data().data();
  for (int i = 0; i < n; ++i)
    kernels::add(x.data().data() + static_cast<std::size_t>(i) * m, bd,
                 out.data() + static_cast<std::size_t>(i) * m, m);
  return Tensor::make_node(x.shape(), std::move(out), {x, bias}, [n, m](TensorNode& self) {
    if (double* g = grad_of(self, 0)) kernels::axpy(self.grad.data(), 1.0, g, self.size());
    if (double* g = grad_of(self, 1)) {
      for (int i = 0; i < n; ++i)
        kernels::axpy(self.grad.data() + static_cast<std::size_t>(i) * m, 1.0, g, m);
    }
  });
}

Tensor mul_rowvec(const Tensor& x, const Tensor& v) {
  const int n = x.rows(), m = x.cols();
  if (static_cast<int>(v.size()) != m)
    throw ShapeError("mul_rowvec: vector " + shape_str(v.shape()) + " vs matrix " +
                     shape_str(x.shape()));
  std::vector<double> out(x.size());
  const double* vd = v.data().data();
  for (int i = 0; i < n; ++i)
    kernels::mul(x.data().data() + static_cast<std::size_t>(i) * m, vd,
                 out.data() + static_cast<std::size_t>(i) * m, m);
  return Tensor::make_node(x.shape(), std::move(out), {x, v}, [n, m](TensorNode& self) {
    const double* xv = self.parents[0].data().data();
    const double* vv = self.parents[1].data().data();
    if (double* g = grad_of(self, 0))
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
          g[static_cast<std::size_t>(i) * m + j] +=
              self.grad[static_cast<std::size_t>(i) * m + j] * vv[j];
    if (double* g = grad_of(self, 1))
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
          g[j] += self.grad[static_cast<std::size_t>(i) * m + j] *
                  xv[static_cast<std::size_t>(i) * m + j];
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  kernels::sub(a.data().data(), b.data().data(), out.data(), out.size());
  return Tensor::make_node(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
    if (double* g = grad_of(self, 0)) kernels::axpy(self.grad.data(), 1.0, g, self.size());
    if (double* g = grad_of(self, 1)) kernels::axpy(self.grad.data(), -1.0, g, self.size());
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  kernels::mul(a.data().data(), b.data().data(), out.data(), out.size());
  return Tensor::make_node(a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
    const double* av = self.parents[0].data().data();
    const double* bv = self.parents[1].data().data();
    if (double* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.size(); ++i) g[i] += self.grad[i] * bv[i];
    if (double* g = grad_of(self, 1))
      for (std::size_t i = 0; i < self.size(); ++i) g[i] += self.grad[i] * av[i];
  });
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  kernels::scale(a.data().data(), c, out.data(), out.size());
  return Tensor::make_node(a.shape(), std::move(out), {a}, [c](TensorNode& self) {
    if (double* g = grad_of(self, 0)) kernels::axpy(self.grad.data(), c, g, self.size());
  });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.size());
  kernels::relu(a.data().data(), out.data(), out.size());
  return Tensor::make_node(a.shape(), std::move(out), {a}, [](TensorNode& self) {
    const double* av = self.parents[0].data().data();
    if (double* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.size(); ++i)
        if (av[i] > 0.0) g[i] += self.grad[i];
  });
}

Tensor exp_t(const Tensor& a) {
  std::vector<double> out(a.size());
  kernels::exp(a.data().data(), out.data(), out.size());
  return Tensor::make_node(a.shape(), std::move(out), {a}, [](TensorNode& self) {
    if (double* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.size(); ++i) g[i] += self.grad[i] * self.data[i];
  });
}

Tensor log_t(const Tensor& a) {
  std::vector<double> out(a.size());
  kernels::log_clamped(a.data().data(), kLogFloor, out.data(), out.size());
  return Tensor::make_node(a.shape(), std::move(out), {a}, [](TensorNode& self) {
    const double* av = self.parents[0].data().data();
    if (double* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.size(); ++i)
        if (av[i] > kLogFloor) g[i] += self.grad[i] / av[i];
  });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  std::vector<double> out(a.size());
  const double* av = a.data().data();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = av[i] < lo ? lo : (av[i] > hi ? hi : av[i]);
  return Tensor::make_node(a.shape(), std::move(out), {a}, [lo, hi](TensorNode& self) {
    const double* av = self.parents[0].data().data();
    if (double* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.size(); ++i)
        if (av[i] > lo && av[i] < hi) g[i] += self.grad[i];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  const int n = a.rows(), k = a.cols(), m = b.cols();
  std::vector<double> out(static_cast<std::size_t>(n) * m);
  kernels::matmul_nn(a.data().data(), b.data().data(), out.data(), n, k, m, false);
  return Tensor::make_node({n, m}, std::move(out), {a, b}, [n, k, m](TensorNode& self) {
    const double* av = self.parents[0].data().data();
    const double* bv = self.parents[1].data().data();
    // a.grad += g * b^T ; b.grad += a^T * g
    if (double* g = grad_of(self, 0))
      kernels::matmul_nt(self.grad.data(), bv, g, n, m, k, true);
    if (double* g = grad_of(self, 1))
      kernels::matmul_tn(av, self.grad.data(), g, n, k, m, true);
  });
}

Tensor softmax_rows(const Tensor& z) {
  const int n = z.rows(), m = z.cols();
  for (double v : z.data())
    if (!std::isfinite(v)) throw NumericError("softmax_rows: non-finite input");
  std::vector<double> out(z.size());
  kernels::softmax_rows(z.data().data(), out.data(), n, m);
  return Tensor::make_node(z.shape(), std::move(out), {z}, [n, m](TensorNode& self) {
    // dz = p .* (g - sum(g .* p) per row)
    if (double* g = grad_of(self, 0)) {
      for (int i = 0; i < n; ++i) {
        const std::size_t off = static_cast<std::size_t>(i) * m;
        double dot = 0.0;
        for (int j = 0; j < m; ++j) dot += self.grad[off + j] * self.data[off + j];
        for (int j = 0; j < m; ++j)
          g[off + j] += self.data[off + j] * (self.grad[off + j] - dot);
      }
    }
  });
}

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return Tensor::make_node({}, {s}, {a}, [](TensorNode& self) {
    if (double* g = grad_of(self, 0))
      for (std::size_t i = 0; i < self.parents[0].size(); ++i) g[i] += self.grad[0];
  });
}

Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.size())); }

Tensor diag_sum(const Tensor& a) {
  if (a.shape().size() != 2 || a.rows() != a.cols())
    throw ShapeError("diag_sum: requires a square matrix, got " + shape_str(a.shape()));
  const int n = a.rows();
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a.at(i, i);
  return Tensor::make_node({}, {s}, {a}, [n](TensorNode& self) {
    if (double* g = grad_of(self, 0))
      for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i) * n + i] += self.grad[0];
  });
}

namespace {

void check_gauss_args(const Tensor& mu, const Tensor& lv, const Tensor& y, const char* op) {
  if (mu.shape() != lv.shape() || mu.shape() != y.shape() || mu.shape().size() != 2)
    throw ShapeError(std::string(op) + ": mu " + shape_str(mu.shape()) + ", lv " +
                     shape_str(lv.shape()) + ", y " + shape_str(y.shape()) +
                     " must be equal n x d matrices");
}

}  // namespace

Tensor gauss_logdensity(const Tensor& mu, const Tensor& lv, const Tensor& y) {
  check_gauss_args(mu, lv, y, "gauss_logdensity");
  const int n = mu.rows(), d = mu.cols();
  std::vector<double> out(static_cast<std::size_t>(n));
  kernels::gauss_logdensity(mu.data().data(), lv.data().data(), y.data().data(), out.data(), n, d);
  return Tensor::make_node({n}, std::move(out), {mu, lv, y}, [n, d](TensorNode& self) {
    const double* muv = self.parents[0].data().data();
    const double* lvv = self.parents[1].data().data();
    const double* yv = self.parents[2].data().data();
    double* gmu = grad_of(self, 0);
    double* glv = grad_of(self, 1);
    double* gy = grad_of(self, 2);
    for (int i = 0; i < n; ++i) {
      const double gi = self.grad[i];
      for (int t = 0; t < d; ++t) {
        const std::size_t idx = static_cast<std::size_t>(i) * d + t;
        const double e = std::exp(-lvv[idx]);
        const double diff = yv[idx] - muv[idx];
        if (gmu) gmu[idx] += gi * diff * e;
        if (gy) gy[idx] -= gi * diff * e;
        if (glv) glv[idx] += gi * 0.5 * (diff * diff * e - 1.0);
      }
    }
  });
}

Tensor gauss_cross_logdensity(const Tensor& mu, const Tensor& lv, const Tensor& y) {
  check_gauss_args(mu, lv, y, "gauss_cross_logdensity");
  const int n = mu.rows(), d = mu.cols();
  std::vector<double> out(static_cast<std::size_t>(n) * n);
  kernels::gauss_cross_logdensity(mu.data().data(), lv.data().data(), y.data().data(),
                                  out.data(), n, d);
  return Tensor::make_node({n, n}, std::move(out), {mu, lv, y}, [n, d](TensorNode& self) {
    kernels::gauss_cross_backward(self.parents[0].data().data(), self.parents[1].data().data(),
                                  self.parents[2].data().data(), self.grad.data(),
                                  grad_of(self, 0), grad_of(self, 1), grad_of(self, 2), n, d);
  });
}

}  // namespace udi
