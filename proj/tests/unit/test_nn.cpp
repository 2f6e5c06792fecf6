/*
 * Copyright 2026 The GateNet Toolkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "gatenet/imbalance/weights.hpp"
#include "gatenet/nn/graph.hpp"
#include "gatenet/nn/kernels.hpp"
#include "gatenet/nn/optim.hpp"
#include "support/gradcheck.hpp"

using namespace gatenet;
using namespace gatenet::nn;
using gatenet::testing::check_gradients;
using gatenet::testing::random_tensor;

namespace {

void expect_tensor_near(const Tensor& a, const Tensor& b, double tol) {
    ASSERT_EQ(a.shape(), b.shape());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "index " << i;
}

Param random_param(const std::string& name, const Shape& shape, std::mt19937_64& rng, double lo = -1.0,
                   double hi = 1.0) {
    return Param(name, random_tensor(shape, rng, lo, hi));
}

}  // namespace

// --- pointwise convolution / dense -----------------------------------------

TEST(PointwiseConv, IdentityWeightsReturnInput) {
    std::mt19937_64 rng(1);
    const Tensor x = random_tensor({3, 5}, rng);
    Tensor w({3, 3});
    for (std::size_t i = 0; i < 3; ++i) w(i, i) = 1.0;
    EXPECT_EQ(pointwise_conv1d(x, w, Tensor({3})), x);
}

TEST(PointwiseConv, ZeroInputGivesBias) {
    std::mt19937_64 rng(2);
    const Tensor w = random_tensor({4, 3}, rng);
    const Tensor b = Tensor::vector({0.5, -1.0, 2.0, 3.5});
    const Tensor y = pointwise_conv1d(Tensor({3, 6}), w, b);
    for (std::size_t o = 0; o < 4; ++o)
        for (std::size_t l = 0; l < 6; ++l) EXPECT_EQ(y(o, l), b[o]);
}

TEST(PointwiseConv, HandExpandedSum) {
    const Tensor y = pointwise_conv1d(Tensor::matrix({{1, 2}, {3, 4}}), Tensor::matrix({{1, 1}}), Tensor::vector({0}));
    EXPECT_EQ(y, Tensor::matrix({{4, 6}}));
}

TEST(PointwiseConv, ShapeMismatchNamesAxis) {
    try {
        pointwise_conv1d(Tensor({2, 3}), Tensor({1, 3}), Tensor({1}));
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        EXPECT_NE(std::string(e.what()).find("C_in"), std::string::npos) << e.what();
    }
    EXPECT_THROW(dense(Tensor({2, 3}), Tensor({4, 3}), Tensor({5})), DimensionError);
}

TEST(Dense, MatchesNaiveSum) {
    std::mt19937_64 rng(3);
    const Tensor x = random_tensor({7, 5}, rng), w = random_tensor({4, 5}, rng), b = random_tensor({4}, rng);
    const Tensor y = dense(x, w, b);
    for (std::size_t n = 0; n < 7; ++n)
        for (std::size_t o = 0; o < 4; ++o) {
            double s = b[o];
            for (std::size_t i = 0; i < 5; ++i) s += w(o, i) * x(n, i);
            EXPECT_NEAR(y(n, o), s, 1e-14);
        }
}

// --- batchnorm --------------------------------------------------------------

TEST(BatchNorm, ConstantChannelGivesZeros) {
    RunningStats rs(2);
    const Tensor x = Tensor::matrix({{3, 1}, {3, 2}, {3, 3}});
    const Tensor y = batchnorm(x, Tensor({2}, 1.0), Tensor({2}, 0.0), rs, Mode::train);
    for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(y(r, 0), 0.0);
}

TEST(BatchNorm, EvalWithUnitStatsIsIdentity) {
    std::mt19937_64 rng(4);
    RunningStats rs(3);
    const Tensor x = random_tensor({5, 3}, rng);
    const Tensor y = batchnorm(x, Tensor({3}, 1.0), Tensor({3}, 0.0), rs, Mode::eval, {0.0, 0.1, true});
    EXPECT_EQ(y, x);
    // The default epsilon shrinks the output by 1/sqrt(1 + 1e-5).
    const Tensor y2 = batchnorm(x, Tensor({3}, 1.0), Tensor({3}, 0.0), rs, Mode::eval);
    expect_tensor_near(y2, x, 1e-5);
}

TEST(BatchNorm, TwoRowExample) {
    RunningStats rs(1);
    const Tensor y = batchnorm(Tensor::matrix({{0}, {2}}), Tensor({1}, 1.0), Tensor({1}, 0.0), rs, Mode::train);
    const double s = 1.0 / std::sqrt(1.0 + 1e-5);
    EXPECT_NEAR(y[0], -s, 1e-15);
    EXPECT_NEAR(y[1], s, 1e-15);
    EXPECT_NEAR(y[0], -1.0, 1e-5);
    // Running stats: momentum 0.1, unbiased variance 2.
    EXPECT_NEAR(rs.mean[0], 0.1, 1e-15);
    EXPECT_NEAR(rs.var[0], 0.9 + 0.1 * 2.0, 1e-15);
}

TEST(BatchNorm, SingleRowTrainIsDegenerate) {
    RunningStats rs(2);
    EXPECT_THROW(batchnorm(Tensor({1, 2}), Tensor({2}, 1.0), Tensor({2}, 0.0), rs, Mode::train), DegenerateBatchError);
    EXPECT_NO_THROW(batchnorm(Tensor({1, 2}), Tensor({2}, 1.0), Tensor({2}, 0.0), rs, Mode::eval));
}

TEST(BatchNorm, TrainOutputIsStandardized) {
    std::mt19937_64 rng(5);
    RunningStats rs(6);
    Tensor x = random_tensor({50, 6}, rng, -3.0, 7.0);
    const Tensor y = batchnorm(x, Tensor({6}, 1.0), Tensor({6}, 0.0), rs, Mode::train);
    for (std::size_t c = 0; c < 6; ++c) {
        double m = 0.0, v = 0.0;
        for (std::size_t r = 0; r < 50; ++r) m += y(r, c);
        m /= 50.0;
        for (std::size_t r = 0; r < 50; ++r) v += (y(r, c) - m) * (y(r, c) - m);
        v /= 50.0;
        EXPECT_LT(std::abs(m), 1e-9);
        EXPECT_NEAR(v, 1.0, 1e-4);
    }
}

TEST(BatchNorm, UpdateRunningFlag) {
    RunningStats rs(1);
    BatchNormOptions opt;
    opt.update_running = false;
    batchnorm(Tensor::matrix({{0}, {2}}), Tensor({1}, 1.0), Tensor({1}, 0.0), rs, Mode::train, opt);
    EXPECT_EQ(rs.mean[0], 0.0);
    EXPECT_EQ(rs.var[0], 1.0);
}

// --- relu / pooling / softmax -----------------------------------------------

TEST(Relu, Elementwise) {
    EXPECT_EQ(relu(Tensor::vector({-1, 0, 2.5})), Tensor::vector({0, 0, 2.5}));
}

TEST(AvgPool, ConstantRows) {
    const Tensor y = avgpool_last_axis(Tensor::matrix({{3, 3, 3}, {-2, -2, -2}}));
    EXPECT_EQ(y, Tensor::vector({3, -2}));
}

TEST(AvgPool, EmptyGroupIsEmptyContext) {
    EXPECT_THROW(mean_pool_groups(Tensor({4, 2}), 0), EmptyContextError);
    EXPECT_THROW(mean_pool_groups(Tensor({5, 2}), 2), DimensionError);
}

TEST(AvgPool, GroupsMatchLastAxisPool) {
    std::mt19937_64 rng(6);
    const Tensor x = random_tensor({3 * 4, 5}, rng);
    const Tensor pooled = mean_pool_groups(x, 4);
    for (std::size_t b = 0; b < 3; ++b) {
        Tensor cl({5, 4});
        for (std::size_t k = 0; k < 4; ++k)
            for (std::size_t c = 0; c < 5; ++c) cl(c, k) = x(b * 4 + k, c);
        const Tensor ref = avgpool_last_axis(cl);
        for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(pooled(b, c), ref[c], 1e-15);
    }
}

TEST(Softmax, EqualLogits) {
    const Tensor p = softmax(Tensor({3, 4}, 0.7));
    for (double v : p.values()) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(Softmax, ClosedForm) {
    const Tensor p = softmax(Tensor::matrix({{std::log(2.0), std::log(1.0)}}));
    EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-15);
}

TEST(Softmax, RowsSumToOneInOpenInterval) {
    std::mt19937_64 rng(7);
    const Tensor p = softmax(random_tensor({100, 6}, rng, -20.0, 20.0));
    for (std::size_t r = 0; r < 100; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < 6; ++c) {
            EXPECT_GT(p(r, c), 0.0);
            EXPECT_LT(p(r, c), 1.0);
            s += p(r, c);
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

// --- backward ---------------------------------------------------------------

TEST(Backward, SumGivesOnes) {
    std::mt19937_64 rng(8);
    Param p = random_param("x", {3, 4}, rng);
    Graph g;
    g.backward(g.sum(g.param(p)));
    for (double v : p.grad.values()) EXPECT_EQ(v, 1.0);
}

TEST(Backward, AccumulatesUntilZeroed) {
    std::mt19937_64 rng(9);
    Param p = random_param("x", {2, 2}, rng);
    for (int i = 0; i < 3; ++i) {
        Graph g;
        g.backward(g.sum(g.param(p)));
    }
    for (double v : p.grad.values()) EXPECT_EQ(v, 3.0);
    p.zero_grad();
    for (double v : p.grad.values()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, BeforeForwardIsStateError) {
    Graph g;
    EXPECT_THROW(g.backward(Var{}), StateError);
    Param p("x", Tensor({2, 2}, 1.0));
    Graph g2;
    const Var v = g2.param(p);
    EXPECT_THROW(g2.backward(v), StateError);  // not a scalar
}

TEST(Backward, CrossEntropyAtOptimumHasZeroGradient) {
    Param logits("z", Tensor::matrix({{40.0, 0.0, 0.0}, {0.0, 0.0, 40.0}}));
    const std::vector<int> targets{0, 2};
    Graph g;
    const Var p = g.softmax(g.param(logits));
    imbalance::FocalLossConfig cfg;
    cfg.gamma = 0.0;
    const auto loss = imbalance::focal_loss(g.value(p), targets, cfg);
    EXPECT_NEAR(loss.value, 0.0, 1e-15);
    g.backward(g.scalar_loss(p, loss.value, loss.grad));
    for (double v : logits.grad.values()) EXPECT_NEAR(v, 0.0, 1e-15);
}

// Finite-difference checks of every op, on random shapes with at most 8 channels.

class KernelGradients : public ::testing::TestWithParam<int> {};

TEST_P(KernelGradients, Affine) {
    std::mt19937_64 rng(100 + GetParam());
    std::uniform_int_distribution<std::size_t> d(1, 8);
    const std::size_t n = d(rng), in = d(rng), out = d(rng);
    Param x = random_param("x", {n, in}, rng), w = random_param("w", {out, in}, rng), b = random_param("b", {out}, rng);
    const auto r = check_gradients(
        {&x, &w, &b}, [&](Graph& g) { return g.affine(g.param(x), g.param(w), g.param(b)); }, rng);
    EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

TEST_P(KernelGradients, BatchNormTrainAndEval) {
    std::mt19937_64 rng(200 + GetParam());
    std::uniform_int_distribution<std::size_t> d(2, 8);
    const std::size_t n = d(rng), c = d(rng);
    Param x = random_param("x", {n, c}, rng, -2.0, 2.0);
    Param gamma = random_param("gamma", {c}, rng, 0.5, 1.5), shift = random_param("shift", {c}, rng);
    RunningStats rs(c);
    for (double& v : rs.mean.values()) v = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
    for (double& v : rs.var.values()) v = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
    BatchNormOptions opt;
    opt.update_running = false;
    for (Mode mode : {Mode::train, Mode::eval}) {
        const auto r = check_gradients(
            {&x, &gamma, &shift},
            [&](Graph& g) { return g.batchnorm(g.param(x), g.param(gamma), g.param(shift), rs, mode, opt); }, rng);
        EXPECT_LT(r.max_rel_error, 1e-6) << (mode == Mode::train ? "train " : "eval ") << r.worst;
    }
}

TEST_P(KernelGradients, FusedAffineBatchNormRelu) {
    std::mt19937_64 rng(300 + GetParam());
    std::uniform_int_distribution<std::size_t> d(2, 8);
    const std::size_t n = d(rng), in = d(rng), out = d(rng);
    Param x = random_param("x", {n, in}, rng), w = random_param("w", {out, in}, rng), b = random_param("b", {out}, rng);
    Param gamma = random_param("gamma", {out}, rng, 0.5, 1.5), shift = random_param("shift", {out}, rng);
    RunningStats rs(out);
    BatchNormOptions opt;
    opt.update_running = false;
    for (bool act : {false, true})
        for (Mode mode : {Mode::train, Mode::eval}) {
            const auto r = check_gradients(
                {&x, &w, &b, &gamma, &shift},
                [&](Graph& g) {
                    return g.affine_batchnorm(g.param(x), g.param(w), g.param(b), g.param(gamma), g.param(shift), rs,
                                              mode, opt, act);
                },
                rng);
            EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
        }
}

TEST_P(KernelGradients, ReluPoolConcatSoftmax) {
    std::mt19937_64 rng(400 + GetParam());
    std::uniform_int_distribution<std::size_t> d(1, 8);
    const std::size_t b = d(rng), k = d(rng), c1 = d(rng), c2 = d(rng);
    // Values kept away from the ReLU kink.
    Param x = random_param("x", {b, c1}, rng);
    for (double& v : x.value.values()) v += v >= 0 ? 0.1 : -0.1;
    Param ctx = random_param("ctx", {b * k, c2}, rng);
    const auto r = check_gradients(
        {&x, &ctx},
        [&](Graph& g) { return g.softmax(g.concat(g.relu(g.param(x)), g.mean_pool(g.param(ctx), k))); }, rng);
    EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

INSTANTIATE_TEST_SUITE_P(RandomShapes, KernelGradients, ::testing::Range(0, 5));

// --- Adam -------------------------------------------------------------------

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
    std::mt19937_64 rng(10);
    Param p = random_param("p", {3, 3}, rng);
    const Tensor before = p.value;
    AdamState st;
    std::vector<Param*> ps{&p};
    for (int i = 0; i < 5; ++i) adam_step(ps, st, 0.01);
    EXPECT_EQ(p.value, before);
    EXPECT_EQ(st.step_count, 5u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    Param p("p", Tensor({4}, 2.0));
    p.grad.fill(1.0);
    AdamState st;
    std::vector<Param*> ps{&p};
    adam_step(ps, st, 0.002);
    for (double v : p.value.values()) EXPECT_NEAR(v, 2.0 - 0.002 / (1.0 + 1e-5), 1e-15);
    EXPECT_EQ(st.step_count, 1u);
}

TEST(Adam, ConstantGradientUpdateApproachesLearningRate) {
    Param p("p", Tensor({2}, 0.0));
    AdamState st;
    std::vector<Param*> ps{&p};
    double prev = 0.0, step = 0.0;
    for (int i = 0; i < 500; ++i) {
        p.grad.fill(0.3);
        adam_step(ps, st, 0.01);
        step = prev - p.value[0];
        prev = p.value[0];
    }
    EXPECT_NEAR(step, 0.01 * 0.3 / (0.3 + 1e-5), 1e-12);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
    Param a("alpha", Tensor({2}, 1.0)), b("beta.weight", Tensor({2}, 1.0));
    b.grad[1] = std::nan("");
    AdamState st;
    std::vector<Param*> ps{&a, &b};
    try {
        adam_step(ps, st, 0.01);
        FAIL() << "expected TrainingDivergence";
    } catch (const TrainingDivergence& e) {
        EXPECT_EQ(e.parameter(), "beta.weight");
    }
    EXPECT_EQ(a.value, Tensor({2}, 1.0));
    EXPECT_EQ(st.step_count, 0u);
}

// --- 1cycle -----------------------------------------------------------------

TEST(OneCycle, Endpoints) {
    OneCycleSchedule s;
    s.total_iters = 400;
    EXPECT_EQ(onecycle_lr(0, s), 0.002 / 25.0);
    EXPECT_EQ(onecycle_lr(100, s), 0.002);
    EXPECT_EQ(onecycle_lr(400, s), 0.002 / 1e4);
}

TEST(OneCycle, Unimodal) {
    for (std::size_t total : {1u, 3u, 10u, 37u, 5000u}) {
        OneCycleSchedule s;
        s.total_iters = total;
        const double warm = s.warmup_fraction * static_cast<double>(total);
        double peak = 0.0;
        for (std::size_t i = 1; i <= total; ++i) {
            const double a = onecycle_lr(i - 1, s), b = onecycle_lr(i, s);
            if (static_cast<double>(i) <= warm) {
                EXPECT_GE(b, a) << total << " " << i;
            } else if (static_cast<double>(i - 1) >= warm) {
                EXPECT_LE(b, a) << total << " " << i;
            }
            peak = std::max(peak, b);
        }
        EXPECT_LE(peak, 0.002 + 1e-18);
    }
}

TEST(OneCycle, OutOfRange) {
    OneCycleSchedule s;
    s.total_iters = 10;
    EXPECT_THROW(onecycle_lr(11, s), RangeError);
    s.warmup_fraction = 1.0;
    EXPECT_THROW(onecycle_lr(0, s), ConfigError);
}
