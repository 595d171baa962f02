// Copyright 2026 The mtcil Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "mtcil/nn/gradcheck.hpp"
#include "mtcil/nn/ops.hpp"
#include "mtcil/nn/schedule.hpp"

using namespace mtcil;
using namespace mtcil::nn;

namespace {

Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(s));
  for (double& v : t.data) v = uniform(rng, lo, hi);
  return t;
}

// Direct-loop convolution, zero padding 1.
Tensor conv_reference(const Tensor& x, const Tensor& w, const Tensor& b, int stride) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3), Co = w.dim(0);
  const int Ho = (H - 1) / stride + 1, Wo = (W - 1) / stride + 1;
  Tensor y({N, Co, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int o = 0; o < Co; ++o)
      for (int i = 0; i < Ho; ++i)
        for (int j = 0; j < Wo; ++j) {
          double s = b[o];
          for (int c = 0; c < C; ++c)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int r = i * stride + ky - 1, q = j * stride + kx - 1;
                if (r < 0 || r >= H || q < 0 || q >= W) continue;
                s += x[((n * C + c) * H + r) * W + q] * w[((o * C + c) * 3 + ky) * 3 + kx];
              }
          y[((n * Co + o) * Ho + i) * Wo + j] = s;
        }
  return y;
}

}  // namespace

TEST(Ops, LinearExample) {
  ParamStore ps;
  ps.add("w", Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  ps.add("b", Tensor({2}, {0.5, -1}));
  Tape t(&ps);
  const Var x = t.constant(Tensor({1, 3}, {1, 0, -1}));
  const Var y = linear(t, x, t.param("w"), t.param("b"));
  EXPECT_EQ(t.value(y), Tensor({1, 2}, {-1.5, -3.0}));
}

TEST(Ops, ConvMatchesDirectLoops) {
  Rng rng(3);
  for (int stride : {1, 2}) {
    const Tensor x = random_tensor({2, 3, 7, 6}, rng);
    const Tensor w = random_tensor({4, 3, 3, 3}, rng);
    const Tensor b = random_tensor({4}, rng);
    Tape t;
    const Var y = conv3x3(t, t.constant(x), t.constant(w), t.constant(b), stride);
    const Tensor ref = conv_reference(x, w, b, stride);
    ASSERT_EQ(t.value(y).shape, ref.shape);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(t.value(y)[i], ref[i], 1e-12);
  }
}

TEST(Ops, ConvShapeMismatchIsAnError) {
  Tape t;
  const Var x = t.constant(Tensor({1, 2, 4, 4}));
  EXPECT_THROW(conv3x3(t, x, t.constant(Tensor({3, 5, 3, 3})), t.constant(Tensor({3}))), Error);
  EXPECT_THROW(conv3x3(t, x, t.constant(Tensor({3, 2, 3, 3})), t.constant(Tensor({3})), 0), Error);
}

TEST(Ops, ReluAndItsGradient) {
  ParamStore ps;
  ps.add("x", Tensor({4}, {-2, -0.5, 0.5, 3}));
  Tape t(&ps);
  const Var y = relu(t, t.param("x"));
  EXPECT_EQ(t.value(y), Tensor({4}, {0, 0, 0.5, 3}));
  const Grads g = t.backward(sum(t, y));
  EXPECT_EQ(g.at("x"), Tensor({4}, {0, 0, 1, 1}));
}

TEST(Ops, NonFiniteForwardIsAnError) {
  Tape t;
  EXPECT_THROW(t.constant(Tensor::scalar(std::nan(""))), Error);
  const Var big = t.constant(Tensor::scalar(1000.0));
  EXPECT_THROW(exp(t, big), Error);
}

TEST(Ops, GatherScatterRoundTrip) {
  ParamStore ps;
  ps.add("x", Tensor({3, 2}, {1, 2, 3, 4, 5, 6}));
  Tape t(&ps);
  const Var g = gather_rows(t, t.param("x"), {2, 0});
  EXPECT_EQ(t.value(g), Tensor({2, 2}, {5, 6, 1, 2}));
  const Var s = scatter_rows(t, g, {2, 0}, 3);
  EXPECT_EQ(t.value(s), Tensor({3, 2}, {1, 2, 0, 0, 5, 6}));
  const Grads gr = t.backward(sum(t, s));
  // Row 1 never reaches the output.
  EXPECT_EQ(gr.at("x"), Tensor({3, 2}, {1, 1, 0, 0, 1, 1}));
}

TEST(Tape, BackwardTwiceIsAnError) {
  ParamStore ps;
  ps.add("a", Tensor::scalar(2.0));
  Tape t(&ps);
  const Var l = square(t, t.param("a"));
  const Grads g = t.backward(l);
  EXPECT_DOUBLE_EQ(g.at("a")[0], 4.0);
  EXPECT_THROW(t.backward(l), Error);
}

TEST(Tape, UnreachedParamsGetZeros) {
  ParamStore ps;
  ps.add("used", Tensor::scalar(1.5));
  ps.add("unused", Tensor({2, 2}, 7.0));
  Tape t(&ps);
  const Grads g = t.backward(scale(t, t.param("used"), 3.0));
  EXPECT_DOUBLE_EQ(g.at("used")[0], 3.0);
  EXPECT_EQ(g.at("unused"), Tensor({2, 2}));
}

TEST(Tape, SharedParamAccumulates) {
  ParamStore ps;
  ps.add("a", Tensor::scalar(3.0));
  Tape t(&ps);
  const Var a = t.param("a");
  const Grads g = t.backward(add(t, mul(t, a, a), a));
  EXPECT_DOUBLE_EQ(g.at("a")[0], 7.0);
}

TEST(Tape, NonScalarLossIsAnError) {
  ParamStore ps;
  ps.add("a", Tensor({2}));
  Tape t(&ps);
  EXPECT_THROW(t.backward(t.param("a")), Error);
}

TEST(Adam, FirstStepOnScalar) {
  ParamStore ps;
  ps.add("p", Tensor::scalar(1.0));
  adam_step(ps, {{"p", Tensor::scalar(1.0)}}, 2e-4);
  EXPECT_NEAR(ps.get("p")[0] - 1.0, -2e-4 * (1.0 / (1.0 + 1e-8)), 1e-15);
  EXPECT_EQ(ps.step(), 1);
}

TEST(Adam, StepSizeIndependentOfGradientScale) {
  for (double g : {1e-3, 1.0, 1e3}) {
    ParamStore ps;
    ps.add("p", Tensor::scalar(0.0));
    for (int i = 0; i < 5; ++i) adam_step(ps, {{"p", Tensor::scalar(g)}}, 1e-2);
    EXPECT_NEAR(ps.get("p")[0], -5e-2, 1e-6) << g;
  }
}

TEST(Adam, ZeroGradientMeansNoMove) {
  ParamStore ps;
  ps.add("p", Tensor({3}, {1, 2, 3}));
  adam_step(ps, {{"p", Tensor({3})}}, 1e-3);
  EXPECT_EQ(ps.get("p"), Tensor({3}, {1, 2, 3}));
}

TEST(Adam, OnlyListedParamsMove) {
  ParamStore ps;
  ps.add("a", Tensor::scalar(1.0));
  ps.add("b", Tensor::scalar(1.0));
  adam_step(ps, {{"a", Tensor::scalar(1.0)}}, 0.1);
  EXPECT_LT(ps.get("a")[0], 1.0);
  EXPECT_EQ(ps.get("b")[0], 1.0);
}

TEST(Adam, RejectsBadInput) {
  ParamStore ps;
  ps.add("p", Tensor({2}));
  EXPECT_THROW(adam_step(ps, {{"p", Tensor({2}, {0, std::nan("")})}}, 1e-3), Error);
  EXPECT_THROW(adam_step(ps, {{"p", Tensor({3})}}, 1e-3), Error);
  EXPECT_THROW(adam_step(ps, {{"q", Tensor({2})}}, 1e-3), Error);
  EXPECT_THROW(adam_step(ps, {{"p", Tensor({2})}}, -1.0), Error);
}

TEST(Adam, ConvergesOnQuadratic) {
  ParamStore ps;
  ps.add("x", Tensor({2}, {3.0, -2.0}));
  for (int i = 0; i < 3000; ++i) {
    Tape t(&ps);
    const Var x = t.param("x");
    const Grads g = t.backward(sum(t, square(t, add_scalar(t, x, -0.5))));
    adam_step(ps, g, 1e-2);
  }
  EXPECT_NEAR(ps.get("x")[0], 0.5, 1e-3);
  EXPECT_NEAR(ps.get("x")[1], 0.5, 1e-3);
}

TEST(GradCheck, QuadraticIsExact) {
  ParamStore ps;
  ps.add("x", Tensor({3}, {0.3, -1.2, 2.0}));
  const Objective f = [](Tape& t) { return sum(t, square(t, t.param("x"))); };
  const auto r = grad_check(f, ps);
  EXPECT_LT(r.max_rel_error, 1e-8);
  EXPECT_EQ(r.coords_checked, 3u);
}

TEST(GradCheck, ConstantObjectiveHasZeroGradient) {
  ParamStore ps;
  ps.add("x", Tensor({2}, {1.0, 2.0}));
  const Objective f = [](Tape& t) {
    (void)t.param("x");
    return t.constant(Tensor::scalar(4.0));
  };
  Grads g;
  {
    Tape t(&ps);
    g = t.backward(f(t));
  }
  EXPECT_EQ(g.at("x"), Tensor({2}));
  EXPECT_LT(grad_check(f, ps).max_rel_error, 1e-12);
}

TEST(GradCheck, CatchesWrongGradient) {
  ParamStore ps;
  ps.add("x", Tensor::scalar(1.0));
  // Forward x^2 but backward claims 3x.
  const Objective f = [](Tape& t) {
    const Var x = t.param("x");
    Tensor y = Tensor::scalar(t.value(x)[0] * t.value(x)[0]);
    return t.record(std::move(y), true, [x](Tape& t, const Tensor& g) { t.acc(x)[0] += 3.0 * t.value(x)[0] * g[0]; });
  };
  EXPECT_GT(grad_check(f, ps).max_rel_error, 0.3);
}

TEST(GradCheck, SmallConvNet) {
  Rng rng(11);
  ParamStore ps;
  ps.add("w1", random_tensor({3, 2, 3, 3}, rng, -0.5, 0.5));
  ps.add("b1", random_tensor({3}, rng, -0.1, 0.1));
  ps.add("w2", random_tensor({2, 3 * 3 * 3}, rng, -0.5, 0.5));
  ps.add("b2", random_tensor({2}, rng, -0.1, 0.1));
  const Tensor x = random_tensor({2, 2, 5, 5}, rng);
  const Objective f = [&x](Tape& t) {
    Var h = conv3x3(t, t.constant(x), t.param("w1"), t.param("b1"), 2);
    h = flatten(t, exp(t, scale(t, h, 0.3)));
    const Var y = linear(t, h, t.param("w2"), t.param("b2"));
    return mean(t, square(t, y));
  };
  EXPECT_LT(grad_check(f, ps, {1e-6, 0, 0}).max_rel_error, 1e-6);
}

TEST(Dropout, EvalIsIdentity) {
  Rng rng(1);
  Tape t;
  const Var x = t.constant(Tensor({4}, {1, 2, 3, 4}));
  EXPECT_EQ(dropout(t, x, 0.5, false, rng).id, x.id);
  EXPECT_EQ(dropout(t, x, 0.0, true, rng).id, x.id);
  EXPECT_THROW(dropout(t, x, 1.0, true, rng), Error);
}

TEST(Dropout, ExpectationPreserved) {
  Rng rng(5);
  const int n = 100000;
  Tape t;
  const Var x = t.constant(Tensor({n}, 1.0));
  const Var y = dropout(t, x, 0.5, true, rng);
  double s = 0.0;
  int kept = 0;
  for (double v : t.value(y).data) {
    s += v;
    kept += v != 0.0;
    ASSERT_TRUE(v == 0.0 || v == 2.0);
  }
  EXPECT_NEAR(s / n, 1.0, 0.01);
  EXPECT_NEAR(static_cast<double>(kept) / n, 0.5, 0.01);
}

TEST(Schedule, CutsAfterPlateau) {
  EXPECT_DOUBLE_EQ(lr_schedule({1.0, .9, .8, .8, .8, .8, .8, .8}, 2e-4), 2e-5);
  EXPECT_DOUBLE_EQ(lr_schedule({1.0, .9, .8, .8, .8, .8, .8}, 2e-4), 2e-4);
  EXPECT_DOUBLE_EQ(lr_schedule({1.0, .9, .8, .7}, 2e-4), 2e-4);
  EXPECT_THROW(lr_schedule({}, 2e-4), Error);
}

TEST(Schedule, PlateauResetsAfterCut) {
  PlateauSchedule s;
  double lr = 1.0;
  int cuts_at = -1;
  for (int e = 0; e < 20; ++e) {
    const double next = s.step(0.5, lr);
    if (next < lr && cuts_at < 0) cuts_at = e;
    lr = next;
  }
  EXPECT_EQ(cuts_at, 5);
  // A fresh plateau of six more epochs before the next cut.
  EXPECT_EQ(s.cuts(), 3);
}

TEST(Checkpoint, RoundTrip) {
  Rng rng(2);
  ParamStore ps;
  ps.add("enc.conv1.w", random_tensor({4, 5, 3, 3}, rng));
  ps.add("head.b", random_tensor({2}, rng));
  std::stringstream buf;
  write_checkpoint(buf, ps);
  const ParamStore back = read_checkpoint(buf);
  EXPECT_TRUE(back.same_values(ps));
  EXPECT_EQ(back.names(), ps.names());
}

TEST(Checkpoint, RejectsDamage) {
  ParamStore ps;
  ps.add("a", Tensor({3}, {1, 2, 3}));
  std::stringstream buf;
  write_checkpoint(buf, ps);
  const std::string good = buf.str();
  std::stringstream truncated(good.substr(0, good.size() - 4));
  EXPECT_THROW(read_checkpoint(truncated), Error);
  std::string bad = good;
  bad[0] = 'X';
  std::stringstream magic(bad);
  EXPECT_THROW(read_checkpoint(magic), Error);
  bad = good;
  bad[8] = 9;
  std::stringstream version(bad);
  EXPECT_THROW(read_checkpoint(version), Error);
}
