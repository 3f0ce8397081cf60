#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "urlb/kernels.hpp"
#include "urlb/mlp.hpp"

using namespace urlb;
using namespace urlb::net;

namespace {

double loss_of(const MLPSpec& spec, const ParamSet& p, const Mat& x, const Mat& c) {
  Mat y = forward(spec, p, x);
  return kernels::dot(y.v.data(), c.v.data(), y.size());
}

}  // namespace

TEST_CASE("init_params is deterministic and zero-biased") {
  MLPSpec spec{{2, 3}, Activation::relu, Activation::identity};
  RngStream r1(7), r2(7);
  ParamSet a = init_params(spec, r1);
  ParamSet b = init_params(spec, r2);
  REQUIRE(a.same_layout(b));
  for (size_t i = 0; i < a.entries.size(); ++i)
    for (size_t j = 0; j < a.entries[i].second.size(); ++j)
      CHECK(a.entries[i].second.v[j] == b.entries[i].second.v[j]);

  for (auto& [name, m] : a.entries)
    if (name[0] == 'b')
      for (double x : m.v) CHECK(x == 0.0);
}

TEST_CASE("square orthogonal init satisfies WtW = I to 1e-10") {
  MLPSpec spec{{4, 4}, Activation::relu, Activation::identity};
  RngStream rng(11);
  ParamSet p = init_params(spec, rng);
  const Mat& w = p.at("w0");
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      double dot = 0.0;
      for (int r = 0; r < 4; ++r) dot += w(r, i) * w(r, j);
      CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-10);
    }
}

TEST_CASE("rectangular orthogonal init orthonormalizes the smaller side") {
  RngStream rng(3);
  Mat tall = orthogonal(7, 3, 1.0, rng);  // columns orthonormal
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int r = 0; r < 7; ++r) dot += tall(r, i) * tall(r, j);
      CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-10);
    }

  Mat wide = orthogonal(3, 7, 2.0, rng);  // rows orthogonal, norm = gain
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int c = 0; c < 7; ++c) dot += wide(i, c) * wide(j, c);
      CHECK(std::abs(dot - (i == j ? 4.0 : 0.0)) < 1e-10);
    }
}

TEST_CASE("tanh hidden layers get gain 5/3") {
  MLPSpec spec{{6, 6, 2}, Activation::tanh, Activation::identity};
  RngStream rng(17);
  ParamSet p = init_params(spec, rng);
  const Mat& w0 = p.at("w0");
  double norm_sq = 0.0;
  for (int r = 0; r < 6; ++r) norm_sq += w0(r, 0) * w0(r, 0);
  CHECK(std::sqrt(norm_sq) == doctest::Approx(5.0 / 3.0).epsilon(1e-9));
  const Mat& w1 = p.at("w1");  // output layer keeps gain 1
  double row_sq = 0.0;
  for (int c = 0; c < 6; ++c) row_sq += w1(0, c) * w1(0, c);
  CHECK(std::sqrt(row_sq) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("forward with zero parameters gives zero output") {
  MLPSpec spec{{3, 4, 2}, Activation::relu, Activation::identity};
  RngStream rng(1);
  ParamSet p = init_params(spec, rng).zeros_like();
  Mat x = Mat::row_vector({1.0, -2.0, 0.5});
  Mat y = forward(spec, p, x);
  REQUIRE(y.cols == 2);
  CHECK(y(0, 0) == 0.0);
  CHECK(y(0, 1) == 0.0);
}

TEST_CASE("single affine layer: w=2, b=1, x=3 gives 7") {
  MLPSpec spec{{1, 1}, Activation::relu, Activation::identity};
  ParamSet p;
  p.add("w0", Mat(1, 1, 2.0));
  p.add("b0", Mat(1, 1, 1.0));
  Mat y = forward(spec, p, Mat::row_vector({3.0}));
  CHECK(y(0, 0) == 7.0);
}

TEST_CASE("[2,2,1] relu net matches hand evaluation") {
  // Hidden: h = relu(W0 x + b0), W0 = [[1,-1],[2,0.5]], b0 = [0.5, -3].
  // x = (1, 2): z = (1-2+0.5, 2+1-3) = (-0.5, 0) -> h = (0, 0).
  // x = (2, 1): z = (2-1+0.5, 4+0.5-3) = (1.5, 1.5) -> h = (1.5, 1.5).
  // Output: y = 2*h1 - 1*h2 + 0.25.
  MLPSpec spec{{2, 2, 1}, Activation::relu, Activation::identity};
  ParamSet p;
  Mat w0(2, 2);
  w0(0, 0) = 1;
  w0(0, 1) = -1;
  w0(1, 0) = 2;
  w0(1, 1) = 0.5;
  p.add("w0", w0);
  Mat b0(1, 2);
  b0(0, 0) = 0.5;
  b0(0, 1) = -3;
  p.add("b0", b0);
  Mat w1(1, 2);
  w1(0, 0) = 2;
  w1(0, 1) = -1;
  p.add("w1", w1);
  p.add("b1", Mat(1, 1, 0.25));

  CHECK(forward(spec, p, Mat::row_vector({1.0, 2.0}))(0, 0) == 0.25);
  CHECK(forward(spec, p, Mat::row_vector({2.0, 1.0}))(0, 0) == doctest::Approx(1.75).epsilon(1e-15));
}

TEST_CASE("forward rejects dimension mismatch") {
  MLPSpec spec{{3, 2}, Activation::relu, Activation::identity};
  RngStream rng(2);
  ParamSet p = init_params(spec, rng);
  CHECK_THROWS(forward(spec, p, Mat::row_vector({1.0, 2.0})));
}

TEST_CASE("linear gradient: y = w x, x=3, dy=1 gives dw=3") {
  MLPSpec spec{{1, 1}, Activation::relu, Activation::identity};
  ParamSet p;
  p.add("w0", Mat(1, 1, 5.0));
  p.add("b0", Mat(1, 1, 0.0));
  Tape tape;
  forward(spec, p, Mat::row_vector({3.0}), &tape);
  ParamSet g = backward(spec, p, tape, Mat::row_vector({1.0}));
  CHECK(g.at("w0")(0, 0) == 3.0);
  CHECK(g.at("b0")(0, 0) == 1.0);
}

TEST_CASE("dead relu unit blocks gradient") {
  MLPSpec spec{{1, 1, 1}, Activation::relu, Activation::identity};
  ParamSet p;
  p.add("w0", Mat(1, 1, 1.0));
  p.add("b0", Mat(1, 1, -10.0));  // pre-activation stays negative
  p.add("w1", Mat(1, 1, 1.0));
  p.add("b1", Mat(1, 1, 0.0));
  Tape tape;
  forward(spec, p, Mat::row_vector({2.0}), &tape);
  ParamSet g = backward(spec, p, tape, Mat::row_vector({1.0}));
  CHECK(g.at("w0")(0, 0) == 0.0);
  CHECK(g.at("b0")(0, 0) == 0.0);
  CHECK(g.at("w1")(0, 0) == 0.0);  // its input is 0
  CHECK(g.at("b1")(0, 0) == 1.0);
}

TEST_CASE("gradients match central finite differences on a [3,5,2] net") {
  MLPSpec spec{{3, 5, 2}, Activation::relu, Activation::identity};
  RngStream rng(23);
  auto init_rng = rng.fork("init");
  ParamSet p = init_params(spec, init_rng);

  auto probe_rng = rng.fork("probe");
  for (int probe = 0; probe < 100; ++probe) {
    Mat x(1, 3);
    for (auto& v : x.v) v = probe_rng.gaussian();
    Mat c(1, 2);
    for (auto& v : c.v) v = probe_rng.gaussian();

    Tape tape;
    forward(spec, p, x, &tape);
    ParamSet g = backward(spec, p, tape, c);

    double h = 1e-6;
    for (size_t e = 0; e < p.entries.size(); ++e) {
      Mat& pm = p.entries[e].second;
      for (size_t i = 0; i < pm.size(); ++i) {
        double saved = pm.v[i];
        pm.v[i] = saved + h;
        double lp = loss_of(spec, p, x, c);
        pm.v[i] = saved - h;
        double lm = loss_of(spec, p, x, c);
        pm.v[i] = saved;
        double fd = (lp - lm) / (2 * h);
        double an = g.entries[e].second.v[i];
        double tol = 1e-4 * std::max({std::abs(fd), std::abs(an), 1e-4});
        CHECK(std::abs(fd - an) <= tol);
      }
    }
  }
}

TEST_CASE("input gradient matches finite differences through tanh output") {
  MLPSpec spec{{4, 6, 3}, Activation::relu, Activation::tanh};
  RngStream rng(31);
  ParamSet p = init_params(spec, rng);
  Mat x(2, 4);
  for (auto& v : x.v) v = rng.gaussian();
  Mat c(2, 3);
  for (auto& v : c.v) v = rng.gaussian();

  Tape tape;
  forward(spec, p, x, &tape);
  Mat dx;
  backward(spec, p, tape, c, &dx);
  REQUIRE(dx.same_shape(x));

  double h = 1e-6;
  for (size_t i = 0; i < x.size(); ++i) {
    double saved = x.v[i];
    Mat xp = x;
    xp.v[i] = saved + h;
    Mat xm = x;
    xm.v[i] = saved - h;
    double fd = (loss_of(spec, p, xp, c) - loss_of(spec, p, xm, c)) / (2 * h);
    double tol = 1e-4 * std::max({std::abs(fd), std::abs(dx.v[i]), 1e-4});
    CHECK(std::abs(fd - dx.v[i]) <= tol);
  }
}

TEST_CASE("batched forward equals per-row forward") {
  MLPSpec spec{{3, 4, 2}, Activation::relu, Activation::tanh};
  RngStream rng(5);
  ParamSet p = init_params(spec, rng);
  Mat batch(3, 3);
  for (auto& v : batch.v) v = rng.gaussian();
  Mat y = forward(spec, p, batch);
  for (int r = 0; r < 3; ++r) {
    Mat row(1, 3);
    for (int c = 0; c < 3; ++c) row(0, c) = batch(r, c);
    Mat yr = forward(spec, p, row);
    for (int c = 0; c < 2; ++c) CHECK(y(r, c) == yr(0, c));
  }
}

TEST_CASE("adam with zero gradient leaves parameters alone but counts the step") {
  MLPSpec spec{{2, 2}, Activation::relu, Activation::identity};
  RngStream rng(3);
  ParamSet p = init_params(spec, rng);
  ParamSet before = p;
  ParamSet g = p.zeros_like();
  AdamState st = AdamState::like(p);
  adam_step(p, g, st, 1e-4);
  CHECK(st.step_count == 1);
  for (size_t i = 0; i < p.entries.size(); ++i)
    for (size_t j = 0; j < p.entries[i].second.size(); ++j)
      CHECK(p.entries[i].second.v[j] == before.entries[i].second.v[j]);
}

TEST_CASE("adam first step moves a scalar parameter by about lr") {
  ParamSet p;
  p.add("w0", Mat(1, 1, 0.0));
  ParamSet g;
  g.add("w0", Mat(1, 1, 1.0));
  AdamState st = AdamState::like(p);
  adam_step(p, g, st, 1e-4);
  CHECK(p.at("w0")(0, 0) == doctest::Approx(-1e-4).epsilon(1e-6));

  ParamSet p2;
  p2.add("w0", Mat(1, 1, 0.0));
  ParamSet g2;
  g2.add("w0", Mat(1, 1, -1.0));
  AdamState st2 = AdamState::like(p2);
  adam_step(p2, g2, st2, 1e-4);
  CHECK(p2.at("w0")(0, 0) == doctest::Approx(1e-4).epsilon(1e-6));
}

TEST_CASE("adam rejects non-finite gradients without mutating anything") {
  ParamSet p;
  p.add("w0", Mat(1, 2, 1.5));
  ParamSet g;
  g.add("w0", Mat(1, 2, 0.0));
  g.at("w0")(0, 1) = std::nan("");
  AdamState st = AdamState::like(p);
  CHECK_THROWS(adam_step(p, g, st, 1e-4));
  CHECK(st.step_count == 0);
  CHECK(p.at("w0")(0, 0) == 1.5);
  CHECK(st.m.at("w0")(0, 0) == 0.0);
}

TEST_CASE("ema_update formula and convergence") {
  ParamSet target;
  target.add("w0", Mat(1, 1, 0.0));
  ParamSet online;
  online.add("w0", Mat(1, 1, 1.0));

  ParamSet t1 = target;
  ema_update(online, t1, 1.0);
  CHECK(t1.at("w0")(0, 0) == 1.0);

  ParamSet t2 = target;
  ema_update(online, t2, 0.01);
  CHECK(t2.at("w0")(0, 0) == doctest::Approx(0.01).epsilon(1e-15));

  // (1 - tau)^n decay toward the online value.
  ParamSet t3 = target;
  for (int i = 0; i < 200; ++i) ema_update(online, t3, 0.05);
  double expected = 1.0 - std::pow(0.95, 200);
  CHECK(t3.at("w0")(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("ema_update is affine in its arguments") {
  RngStream rng(41);
  ParamSet target;
  target.add("w0", Mat(2, 3));
  for (auto& v : target.at("w0").v) v = rng.gaussian();
  ParamSet online;
  online.add("w0", Mat(2, 3));
  for (auto& v : online.at("w0").v) v = rng.gaussian();

  double a = 2.5;
  ParamSet scaled_t = target, scaled_o = online;
  for (auto& v : scaled_t.at("w0").v) v *= a;
  for (auto& v : scaled_o.at("w0").v) v *= a;

  ema_update(online, target, 0.3);
  ema_update(scaled_o, scaled_t, 0.3);
  for (size_t i = 0; i < target.at("w0").size(); ++i)
    CHECK(scaled_t.at("w0").v[i] == doctest::Approx(a * target.at("w0").v[i]).epsilon(1e-12));
}

TEST_CASE("forward is bit-reproducible") {
  MLPSpec spec{{5, 8, 3}, Activation::relu, Activation::tanh};
  RngStream rng(51);
  ParamSet p = init_params(spec, rng);
  Mat x(4, 5);
  for (auto& v : x.v) v = rng.gaussian();
  Mat y1 = forward(spec, p, x);
  Mat y2 = forward(spec, p, x);
  for (size_t i = 0; i < y1.size(); ++i) CHECK(y1.v[i] == y2.v[i]);
}
