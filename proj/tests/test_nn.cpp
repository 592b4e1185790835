#include <gtest/gtest.h>

#include <cmath>

#include "lbaug/checkpoint.hpp"
#include "lbaug/gradcheck.hpp"
#include "lbaug/loss.hpp"
#include "lbaug/network.hpp"
#include "lbaug/optim.hpp"

using namespace lbaug;

namespace {

Tensor random_tensor(std::vector<int> shape, std::uint64_t seed) {
    Tensor t(std::move(shape));
    Rng rng(seed);
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    return t;
}

// Fixed random linear functional of the output: sum_i w_i * out_i.
LossHead linear_head(std::uint64_t seed) {
    return [seed](const Tensor& out, Tensor& grad) {
        Rng rng(seed);
        double loss = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double w = rng.uniform(-1.0, 1.0);
            loss += w * out[i];
            grad[i] = w;
        }
        return loss;
    };
}

Network make(const std::vector<int>& in, const std::vector<LayerSpec>& specs, std::uint64_t seed = 1) {
    Rng rng(seed);
    return Network::build(in, specs, rng);
}

}  // namespace

TEST(Network, DenseForwardHandValue) {
    Network net = make({2}, {LayerSpec::dense(2, 1)});
    net.layers[0].weight = {2.0, -1.0};
    net.layers[0].bias = {0.5};
    const Tensor out = forward(net, Tensor({1, 2}, {3.0, 4.0}), nullptr, nullptr);
    EXPECT_EQ(out[0], 2.5);
}

TEST(Network, ConvUsesZeroPaddingSamePadding) {
    Network net = make({1, 3, 3}, {LayerSpec::conv3x3(1, 1)});
    net.layers[0].weight.assign(9, 1.0);
    net.layers[0].bias = {0.0};
    Tensor x({1, 1, 3, 3});
    for (int i = 0; i < 9; ++i) x[i] = i + 1;
    const Tensor out = forward(net, x, nullptr, nullptr);
    ASSERT_EQ(out.shape, (std::vector<int>{1, 1, 3, 3}));
    EXPECT_EQ(out[4], 45.0);               // centre sees everything
    EXPECT_EQ(out[0], 1.0 + 2 + 4 + 5);    // corner sees a 2x2 block
}

TEST(Network, PoolSigmoidSoftmaxHandValues) {
    Network pool = make({1, 2, 2}, {LayerSpec::avgpool2x2()});
    EXPECT_EQ(forward(pool, Tensor({1, 1, 2, 2}, {1, 2, 3, 6}), nullptr, nullptr)[0], 3.0);
    Network sig = make({1}, {LayerSpec::sigmoid()});
    EXPECT_EQ(forward(sig, Tensor({1, 1}, {0.0}), nullptr, nullptr)[0], 0.5);
    Network soft = make({2}, {LayerSpec::softmax_rows()});
    const Tensor s = forward(soft, Tensor({1, 2}, {0.0, std::log(3.0)}), nullptr, nullptr);
    EXPECT_NEAR(s[0], 0.25, 1e-15);
    EXPECT_NEAR(s[1], 0.75, 1e-15);
}

TEST(Network, ShapeErrorsAreReported) {
    Rng rng(0);
    EXPECT_THROW(Network::build({3}, {LayerSpec::dense(4, 2)}, rng), std::invalid_argument);
    EXPECT_THROW(Network::build({1, 3, 3}, {LayerSpec::avgpool2x2()}, rng), std::invalid_argument);
    EXPECT_THROW(Network::build({2}, {LayerSpec::dropout(1.0)}, rng), std::invalid_argument);
}

TEST(Network, InvertedDropoutKeepsExpectation) {
    Network net = make({1000}, {LayerSpec::dropout(0.5)});
    net.training = true;
    Rng rng(4);
    const Tensor out = forward(net, Tensor({1, 1000}, 1.0), nullptr, &rng);
    double sum = 0.0;
    int zeros = 0;
    for (double v : out.data) {
        sum += v;
        zeros += v == 0.0;
        EXPECT_TRUE(v == 0.0 || v == 2.0);
    }
    EXPECT_NEAR(sum / 1000.0, 1.0, 0.1);
    EXPECT_GT(zeros, 400);
    net.training = false;
    EXPECT_EQ(forward(net, Tensor({1, 1000}, 1.0), nullptr, nullptr), Tensor({1, 1000}, 1.0));
}

struct LayerCase {
    const char* name;
    std::vector<int> in;
    std::vector<LayerSpec> specs;
};

class GradFidelity : public ::testing::TestWithParam<int> {};

TEST_P(GradFidelity, EveryLayerTypePasses) {
    const std::vector<LayerCase> cases = {
        {"dense", {5}, {LayerSpec::dense(5, 4)}},
        {"conv3x3", {2, 4, 4}, {LayerSpec::conv3x3(2, 3)}},
        {"avgpool2x2", {2, 4, 4}, {LayerSpec::conv3x3(2, 2), LayerSpec::avgpool2x2()}},
        {"relu", {6}, {LayerSpec::dense(6, 6), LayerSpec::relu()}},
        {"dropout", {6}, {LayerSpec::dense(6, 6), LayerSpec::dropout(0.3)}},
        {"sigmoid", {4}, {LayerSpec::dense(4, 3), LayerSpec::sigmoid()}},
        {"softmax_rows", {4}, {LayerSpec::dense(4, 5), LayerSpec::softmax_rows()}},
        {"stack",
         {3, 4, 4},
         {LayerSpec::conv3x3(3, 4), LayerSpec::relu(), LayerSpec::avgpool2x2(), LayerSpec::dense(16, 6), LayerSpec::relu(),
          LayerSpec::dropout(0.5), LayerSpec::dense(6, 3), LayerSpec::sigmoid()}},
    };
    const auto& c = cases.at(GetParam());
    Network net = make(c.in, c.specs, 10 + GetParam());
    net.training = true;
    std::vector<int> batch{3};
    batch.insert(batch.end(), c.in.begin(), c.in.end());
    GradCheckOptions opt;
    opt.dropout_seed = 99;
    const auto rep = grad_check(net, random_tensor(batch, 20 + GetParam()), linear_head(30 + GetParam()), opt);
    EXPECT_TRUE(rep.pass) << c.name << " worst " << rep.worst << " rel " << rep.max_rel_error;
    EXPECT_GT(rep.checked, 0u);
}

INSTANTIATE_TEST_SUITE_P(Layers, GradFidelity, ::testing::Range(0, 8));

TEST(GradCheck, DetectsInjectedFault) {
    Network net = make({4}, {LayerSpec::dense(4, 3), LayerSpec::relu(), LayerSpec::dense(3, 2)});
    const Tensor x = random_tensor({2, 4}, 5);
    const auto head = linear_head(6);
    ForwardCache cache;
    Tensor out = forward(net, x, &cache, nullptr);
    Tensor g(out.shape);
    head(out, g);
    Gradients grads = backward(net, cache, g);
    EXPECT_TRUE(grad_check_against(net, x, head, grads).pass);
    grads.weight[2][1] += 0.05;
    const auto rep = grad_check_against(net, x, head, grads);
    EXPECT_FALSE(rep.pass);
    EXPECT_EQ(rep.worst, "layer 2 weight[1]");
}

TEST(Network, SkippingInputGradientKeepsParameterGradients) {
    Network net = make({2, 4, 4}, {LayerSpec::conv3x3(2, 3), LayerSpec::relu(), LayerSpec::avgpool2x2(),
                                   LayerSpec::dense(12, 2)});
    const Tensor x = random_tensor({2, 2, 4, 4}, 8);
    ForwardCache cache;
    Tensor out = forward(net, x, &cache, nullptr);
    Tensor g(out.shape, 0.3);
    const Gradients full = backward(net, cache, g, true);
    const Gradients lean = backward(net, cache, g, false);
    EXPECT_EQ(full.weight, lean.weight);
    EXPECT_EQ(full.bias, lean.bias);
    EXPECT_EQ(full.input.size(), x.size());
    EXPECT_EQ(lean.input.size(), 0u);
}

TEST(Loss, BceHandValues) {
    const auto r = bce_with_logits(Tensor({1, 2}, {0.0, 0.0}), Tensor({1, 2}, {1.0, 0.0}));
    EXPECT_NEAR(r.loss, std::log(2.0), 1e-15);
    EXPECT_NEAR(r.grad[0], -0.25, 1e-15);
    EXPECT_NEAR(r.grad[1], 0.25, 1e-15);
    // Large logits stay finite.
    const auto big = bce_with_logits(Tensor({1, 1}, {800.0}), Tensor({1, 1}, {0.0}));
    EXPECT_NEAR(big.loss, 800.0, 1e-9);
    const auto probs = bce_with_probs(Tensor({1, 1}, {0.5}), Tensor({1, 1}, {1.0}));
    EXPECT_NEAR(probs.loss, std::log(2.0), 1e-15);
    const auto rows = bce_rows_from_logits(Tensor({2, 1}, {0.0, 0.0}), Tensor({2, 1}, {1.0, 0.0}));
    EXPECT_NEAR(rows[0], std::log(2.0), 1e-15);
}

TEST(Loss, LogitAndProbabilityFormsAgree) {
    const Tensor z = random_tensor({3, 4}, 2);
    Tensor p(z.shape), t(z.shape);
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = sigmoid(z[i]);
        t[i] = i % 3 == 0;
    }
    EXPECT_NEAR(bce_with_logits(z, t).loss, bce_with_probs(p, t).loss, 1e-12);
}

TEST(Optim, SgdMomentumStep) {
    Network net = make({1}, {LayerSpec::dense(1, 1)});
    net.layers[0].weight = {1.0};
    net.layers[0].bias = {0.0};
    OptimizerConfig cfg;
    cfg.lr = 0.1;
    cfg.momentum = 0.9;
    cfg.weight_decay = 0.5;
    Optimizer opt(cfg, net);
    Gradients g = Gradients::zeros_like(net);
    g.weight[0] = {2.0};
    opt.step(net, g);
    // v = -0.1 * (2 + 0.5) = -0.25
    EXPECT_NEAR(net.layers[0].weight[0], 0.75, 1e-15);
    opt.step(net, g);
    // v = 0.9 * -0.25 - 0.1 * (2 + 0.375) = -0.4625
    EXPECT_NEAR(net.layers[0].weight[0], 0.2875, 1e-15);
}

TEST(Optim, AdamFirstStepIsSignScaled) {
    Network net = make({2}, {LayerSpec::dense(2, 1)});
    net.layers[0].weight = {1.0, 1.0};
    OptimizerConfig cfg{OptimizerKind::adam, 0.01, 0.9, 0.9, 0.999, 1e-8, 0.0};
    Optimizer opt(cfg, net);
    Gradients g = Gradients::zeros_like(net);
    g.weight[0] = {3.0, -0.002};
    opt.step(net, g);
    EXPECT_NEAR(net.layers[0].weight[0], 0.99, 1e-8);
    EXPECT_NEAR(net.layers[0].weight[1], 1.01, 1e-7);
    EXPECT_EQ(opt.steps(), 1);
}

TEST(Checkpoint, RoundTripIsExact) {
    Network net = make({3, 4, 4}, {LayerSpec::conv3x3(3, 2), LayerSpec::relu(), LayerSpec::avgpool2x2(),
                                   LayerSpec::dense(8, 3), LayerSpec::sigmoid()});
    const Network back = network_from_json(nlohmann::json::parse(network_to_json(net).dump()));
    EXPECT_EQ(back.specs(), net.specs());
    EXPECT_EQ(back.checksum(), net.checksum());
    const std::vector<double> v = {0.1, -1e-300, 3.0, std::nextafter(1.0, 2.0)};
    EXPECT_EQ(decode_doubles(encode_doubles(v)), v);
}

TEST(Checkpoint, RejectsCorruptPayload) {
    Network net = make({2}, {LayerSpec::dense(2, 2)});
    auto j = network_to_json(net);
    j["layers"][0]["weight"] = encode_doubles({1.0});
    EXPECT_ANY_THROW(network_from_json(j));
}

TEST(Network, TwoLayerMatchesStraightLineOracle) {
    Network net = make({3}, {LayerSpec::dense(3, 4), LayerSpec::relu(), LayerSpec::dense(4, 2)}, 17);
    const Tensor x = random_tensor({2, 3}, 18);
    const Tensor out = forward(net, x, nullptr, nullptr);
    const auto& W1 = net.layers[0].weight;
    const auto& b1 = net.layers[0].bias;
    const auto& W2 = net.layers[2].weight;
    const auto& b2 = net.layers[2].bias;
    for (int n = 0; n < 2; ++n) {
        double h[4];
        for (int j = 0; j < 4; ++j) {
            double s = b1[j];
            for (int i = 0; i < 3; ++i) s += W1[j * 3 + i] * x[n * 3 + i];
            h[j] = s > 0 ? s : 0;
        }
        for (int o = 0; o < 2; ++o) {
            double s = b2[o];
            for (int j = 0; j < 4; ++j) s += W2[o * 4 + j] * h[j];
            EXPECT_NEAR(out[n * 2 + o], s, 1e-12);
        }
    }
}

TEST(Network, DenseBceGradientIsClosedForm) {
    Network net = make({3}, {LayerSpec::dense(3, 1)}, 21);
    const Tensor x({1, 3}, {0.5, -1.0, 2.0});
    const Tensor t({1, 1}, {1.0});
    ForwardCache cache;
    const Tensor z = forward(net, x, &cache, nullptr);
    const auto r = bce_with_logits(z, t);
    const Gradients g = backward(net, cache, r.grad);
    // d/dw BCE(w.x + b, t) = (sigmoid(z) - t) x
    const double e = sigmoid(z[0]) - 1.0;
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(g.weight[0][i], e * x[i], 1e-15);
    EXPECT_NEAR(g.bias[0][0], e, 1e-15);
}

TEST(Loss, BatchLossIsTheMean) {
    const auto r = bce_with_logits(Tensor({2, 1}, {0.0, 2.0}), Tensor({2, 1}, {1.0, 0.0}));
    EXPECT_NEAR(r.loss, (std::log(2.0) + std::log(1.0 + std::exp(2.0))) / 2.0, 1e-15);
}

TEST(Optim, SgdTrivialSteps) {
    Network net = make({1}, {LayerSpec::dense(1, 1)});
    net.layers[0].weight = {1.0};
    OptimizerConfig cfg;
    cfg.lr = 0.1;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;
    Optimizer plain(cfg, net);
    Gradients g = Gradients::zeros_like(net);
    g.weight[0] = {1.0};
    plain.step(net, g);
    EXPECT_NEAR(net.layers[0].weight[0], 0.9, 1e-15);

    net.layers[0].weight = {1.0};
    cfg.weight_decay = 1e-4;
    Optimizer decay(cfg, net);
    const Gradients zero = Gradients::zeros_like(net);
    for (int s = 1; s <= 3; ++s) {
        decay.step(net, zero);
        EXPECT_NEAR(net.layers[0].weight[0], std::pow(1.0 - 0.1 * 1e-4, s), 1e-15);
    }
}
