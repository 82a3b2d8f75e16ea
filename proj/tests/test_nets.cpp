#include <doctest.h>

#include <cmath>

#include "udi/gradcheck.hpp"
#include "udi/losses.hpp"
#include "udi/nets.hpp"
#include "udi/rng.hpp"

using namespace udi;

namespace {

void zero_params(ParamSet& ps) {
  for (auto& e : ps.entries())
    for (double& v : e.value.mutable_data()) v = 0.0;
}

void set_param(ParamSet& ps, const std::string& key, std::vector<double> vals) {
  auto data = ps.at(key).mutable_data();
  REQUIRE(data.size() == vals.size());
  std::copy(vals.begin(), vals.end(), data.begin());
}

constexpr double kHalfLog2Pi = 0.91893853320467274178;

}  // namespace

TEST_CASE("encoder with zero parameters maps everything to zero") {
  ParamSet ps;
  MlpEncoder enc("enc.z", {3, 5, 2});
  enc.register_params(ps, 1);
  zero_params(ps);
  Tensor out = enc.forward(ps, Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6}));
  for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("single linear layer with identity weights is the identity") {
  ParamSet ps;
  MlpEncoder enc("enc.i", {3, 3});
  enc.register_params(ps, 1);
  set_param(ps, "enc.i.l0.W", {1, 0, 0, 0, 1, 0, 0, 0, 1});
  set_param(ps, "enc.i.l0.b", {0, 0, 0});
  Tensor x = Tensor::from_data({2, 3}, {1.5, -2.0, 0.25, 3.0, 0.0, -1.0});
  Tensor out = enc.forward(ps, x);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(out.data()[i] == x.data()[i]);
}

TEST_CASE("two-layer forward matches a hand-rolled loop oracle") {
  ParamSet ps;
  MlpEncoder enc("enc.f", {2, 3, 2});
  enc.register_params(ps, 77);

  Rng rng(5);
  std::vector<double> xv(4 * 2);
  for (double& v : xv) v = rng.normal();
  Tensor out = enc.forward(ps, Tensor::from_data({4, 2}, std::vector<double>(xv)));

  const auto& w0 = ps.at("enc.f.l0.W");
  const auto& b0 = ps.at("enc.f.l0.b");
  const auto& w1 = ps.at("enc.f.l1.W");
  const auto& b1 = ps.at("enc.f.l1.b");
  for (int i = 0; i < 4; ++i) {
    double h[3];
    for (int j = 0; j < 3; ++j) {
      double s = b0.at(j);
      for (int k = 0; k < 2; ++k) s += xv[i * 2 + k] * w0.at(k, j);
      h[j] = s > 0 ? s : 0;  // ReLU
    }
    for (int j = 0; j < 2; ++j) {
      double s = b1.at(j);
      for (int k = 0; k < 3; ++k) s += h[k] * w1.at(k, j);
      CHECK(out.at(i, j) == doctest::Approx(s).epsilon(1e-14));
    }
  }
}

TEST_CASE("zeroed decision head predicts uniformly") {
  ParamSet ps;
  DecisionHead head("head.z", 4, 5);
  head.register_params(ps, 1);
  zero_params(ps);
  auto out = head.forward(ps, Tensor::from_data({2, 4}, {1, 2, 3, 4, -1, -2, -3, -4}));
  for (double v : out.probs.data()) CHECK(v == doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("logit gap of ln 3 gives probabilities 0.75 / 0.25") {
  ParamSet ps;
  DecisionHead head("head.g", 1, 2);
  head.register_params(ps, 1);
  set_param(ps, "head.g.W", {std::log(3.0), 0.0});
  set_param(ps, "head.g.b", {0.0, 0.0});
  auto out = head.forward(ps, Tensor::from_data({1, 1}, {1.0}));
  CHECK(out.probs.at(0, 0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(out.probs.at(0, 1) == doctest::Approx(0.25).epsilon(1e-12));
}

namespace {

// Conditional whose mean net is the identity and whose log-variance is zero.
struct IdentityConditional {
  ParamSet ps;
  GaussianConditional q{"mi.id", 1, {}, 1};
  IdentityConditional() {
    q.register_params(ps, 1);
    set_param(ps, "mi.id.mean.l0.W", {1.0});
    set_param(ps, "mi.id.mean.l0.b", {0.0});
    set_param(ps, "mi.id.logvar.l0.W", {0.0});
    set_param(ps, "mi.id.logvar.l0.b", {0.0});
  }
};

}  // namespace

TEST_CASE("log_q of an exact unit-variance match is -0.5 ln(2 pi)") {
  IdentityConditional fix;
  Tensor f = Tensor::from_data({3, 1}, {0.3, -1.2, 5.0});
  Tensor ld = fix.q.log_q(fix.ps, f, f);
  for (int i = 0; i < 3; ++i) CHECK(ld.at(i) == doctest::Approx(-kHalfLog2Pi).epsilon(1e-12));
}

TEST_CASE("log_q one unit from the mean loses exactly 0.5") {
  IdentityConditional fix;
  Tensor f_a = Tensor::from_data({2, 1}, {0.5, -2.0});
  Tensor f_m = Tensor::from_data({2, 1}, {1.5, -1.0});
  Tensor ld = fix.q.log_q(fix.ps, f_a, f_m);
  for (int i = 0; i < 2; ++i)
    CHECK(ld.at(i) == doctest::Approx(-kHalfLog2Pi - 0.5).epsilon(1e-12));
}

TEST_CASE("log_q decreases strictly with distance from the mean") {
  IdentityConditional fix;
  Tensor f_a = Tensor::from_data({1, 1}, {0.0});
  double prev = fix.q.log_q(fix.ps, f_a, Tensor::from_data({1, 1}, {0.0})).at(0);
  for (double dist = 0.5; dist < 4.0; dist += 0.5) {
    const double cur = fix.q.log_q(fix.ps, f_a, Tensor::from_data({1, 1}, {dist})).at(0);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("log_q_cross agrees with log_q on the diagonal and a nested-loop oracle") {
  ParamSet ps;
  GaussianConditional q("mi.c", 2, {4}, 3);
  q.register_params(ps, 31);
  Rng rng(17);
  std::vector<double> fav(3 * 2), fmv(3 * 3);
  for (double& v : fav) v = rng.normal();
  for (double& v : fmv) v = rng.normal();
  Tensor f_a = Tensor::from_data({3, 2}, std::move(fav));
  Tensor f_m = Tensor::from_data({3, 3}, std::move(fmv));

  Tensor grid = q.log_q_cross(ps, f_a, f_m);
  Tensor diag = q.log_q(ps, f_a, f_m);
  for (int i = 0; i < 3; ++i) CHECK(grid.at(i, i) == diag.at(i));

  // n=1 reduces to log_q
  Tensor fa1 = Tensor::from_data({1, 2}, {f_a.at(0, 0), f_a.at(0, 1)});
  Tensor fm1 = Tensor::from_data({1, 3}, {f_m.at(0, 0), f_m.at(0, 1), f_m.at(0, 2)});
  CHECK(q.log_q_cross(ps, fa1, fm1).at(0, 0) == q.log_q(ps, fa1, fm1).at(0));

  // Nested-loop oracle over the explicit diagonal-Gaussian formula.
  auto [mu, lv] = q.condition(ps, f_a);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double want = 0.0;
      for (int t = 0; t < 3; ++t) {
        const double var = std::exp(lv.at(i, t));
        const double diff = f_m.at(j, t) - mu.at(i, t);
        want += -diff * diff / (2.0 * var) - 0.5 * std::log(2.0 * M_PI * var);
      }
      CHECK(grid.at(i, j) == doctest::Approx(want).epsilon(1e-12));
    }

  // Two identical samples give a constant grid.
  Tensor fa_same = Tensor::from_data({2, 2}, {0.4, -0.7, 0.4, -0.7});
  Tensor fm_same = Tensor::from_data({2, 3}, {1, 2, 3, 1, 2, 3});
  Tensor g2 = q.log_q_cross(ps, fa_same, fm_same);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(g2.at(i, j) == g2.at(0, 0));
}

TEST_CASE("construction is a pure function of config and seed") {
  ParamSet a, b;
  MlpEncoder("enc.m1", {7, 64, 32}).register_params(a, 123);
  MlpEncoder("enc.m1", {7, 64, 32}).register_params(b, 123);
  REQUIRE(a.size() == b.size());
  CHECK(a.checksum() == b.checksum());

  ParamSet c;
  MlpEncoder("enc.m1", {7, 64, 32}).register_params(c, 124);
  CHECK(a.checksum() != c.checksum());
}

TEST_CASE("log variance clamp keeps densities finite for huge inputs") {
  ParamSet ps;
  GaussianConditional q("mi.h", 2, {4}, 2);
  q.register_params(ps, 3);
  Tensor f_a = Tensor::from_data({2, 2}, {1e6, -1e6, 5e5, 2e6});
  Tensor f_m = Tensor::from_data({2, 2}, {-1e6, 1e6, 0.0, 3e5});
  Tensor ld = q.log_q(ps, f_a, f_m);
  for (int i = 0; i < 2; ++i) CHECK(std::isfinite(ld.at(i)));
}

TEST_CASE("conditional estimator parameters pass grad check through mi_nll") {
  ParamSet ps;
  GaussianConditional q("mi.gc", 2, {3}, 2);
  q.register_params(ps, 19);
  Rng rng(21);
  std::vector<double> fav(4 * 2), fmv(4 * 2);
  for (double& v : fav) v = rng.normal();
  for (double& v : fmv) v = rng.normal();
  Tensor f_a = Tensor::from_data({4, 2}, std::move(fav));
  Tensor f_m = Tensor::from_data({4, 2}, std::move(fmv));
  auto f = [&]() { return mi_nll(q, ps, f_a, f_m); };
  CHECK(grad_check(f, ps, 1e-5) < 1e-4);
}
