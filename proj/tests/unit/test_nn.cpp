#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "flaprl/error.hpp"
#include "flaprl/nn/adam.hpp"
#include "flaprl/nn/network.hpp"
#include "flaprl/simd/kernels.hpp"
#include "gradcheck.hpp"

using namespace flaprl;
using namespace flaprl::nn;

namespace {

std::vector<std::span<const double>> spans(const std::vector<std::vector<double>>& v) {
    std::vector<std::span<const double>> out;
    for (const auto& x : v) out.emplace_back(x);
    return out;
}

std::vector<float> random_floats(std::size_t n, Rng& rng) {
    std::vector<float> v(n);
    for (float& x : v) x = static_cast<float>(rng.uniform());
    return v;
}

}  // namespace

TEST_CASE("valid-padding shape rule") {
    CHECK(conv_output_shape({84, 84, 4}, 8, 4, 16) == Shape{20, 20, 16});
    CHECK(conv_output_shape({20, 20, 16}, 4, 2, 32) == Shape{9, 9, 32});
    CHECK(conv_output_shape({9, 9, 64}, 3, 1, 32) == Shape{7, 7, 32});
    CHECK(conv_output_shape({84, 84, 4}, 8, 4, 32) == Shape{20, 20, 32});
    CHECK(conv_output_shape({5, 5, 1}, 5, 3, 1) == Shape{1, 1, 1});
    CHECK_THROWS_AS(conv_output_shape({4, 9, 1}, 5, 1, 1), DimensionError);
    CHECK_THROWS_AS(conv_output_shape({9, 9, 1}, 3, 0, 1), DimensionError);
}

TEST_CASE("full architectures have the documented shapes") {
    const Network<float> dqn(dqn_architecture());
    const auto& p = dqn.plan();
    CHECK(p[0].out == Shape{20, 20, 32});
    CHECK(p[2].out == Shape{9, 9, 64});
    CHECK(p[4].out == Shape{7, 7, 32});
    CHECK(p[6].in.size() == 1568u);
    CHECK(dqn.output_size(0) == 2u);
    CHECK(dqn.parameter_count() ==
          8u * 8 * 4 * 32 + 32 + 4 * 4 * 32 * 64 + 64 + 3 * 3 * 64 * 32 + 32 + 1568 * 512 + 512 + 512 * 2 + 2);

    const Network<float> a3c(a3c_architecture());
    CHECK(a3c.plan()[0].out == Shape{20, 20, 16});
    CHECK(a3c.plan()[2].out == Shape{9, 9, 32});
    CHECK(a3c.head_count() == 2);
    CHECK(a3c.output_size(0) == 1u);
    CHECK(a3c.output_size(1) == 1u);

    std::vector<std::string> names;
    for (const auto& l : a3c.plan())
        if (!l.name.empty()) names.push_back(l.name);
    CHECK(names == std::vector<std::string>{"conv1", "conv2", "fc1", "policy", "value"});
}

TEST_CASE("incompatible layer chains are rejected") {
    Architecture a;
    a.input = {10, 10, 1};
    a.trunk = {LayerSpec::conv(4, 8, 4), LayerSpec::conv(4, 3, 1)};
    CHECK_THROWS_AS(Network<double>{a}, DimensionError);
    a.trunk = {LayerSpec::dense(0)};
    CHECK_THROWS_AS(Network<double>{a}, DimensionError);
    CHECK_THROWS_AS(init_network<float>(dqn_architecture({21, 21, 4}), 1), DimensionError);
}

TEST_CASE("dense layer with zero weights outputs its bias") {
    Architecture a;
    a.input = {1, 1, 5};
    a.trunk = {LayerSpec::dense(3)};
    Network<double> net(a);
    auto b = net.bias(0);
    b[0] = 0.5;
    b[1] = -2.0;
    b[2] = 7.0;
    const std::vector<double> x{1, 2, 3, 4, 5};
    const auto r = forward<double>(net, x);
    CHECK(r.outputs[0].values == std::vector<double>{0.5, -2.0, 7.0});
}

TEST_CASE("1x1 conv with unit weight is the identity") {
    Architecture a;
    a.input = {6, 5, 1};
    a.trunk = {LayerSpec::conv(1, 1, 1)};
    Network<float> net(a);
    net.weights(0)[0] = 1.0f;
    Rng rng(3);
    const auto x = random_floats(30, rng);
    const auto r = forward<float>(net, x);
    CHECK(r.outputs[0].values == x);
}

TEST_CASE("sigmoid is 0.5 at zero and stays strictly inside (0,1)") {
    Architecture a;
    a.input = {1, 1, 4};
    a.trunk = {LayerSpec::sigmoid()};
    const Network<float> net(a);
    const std::vector<float> x{0.0f, 80.0f, -120.0f, 1e30f};
    const auto r = forward<float>(net, x);
    CHECK(r.outputs[0].values[0] == 0.5f);
    for (float v : r.outputs[0].values) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }
}

TEST_CASE("zero output gradient gives zero gradients") {
    const auto net = testing::random_network(a3c_architecture({21, 21, 2}, {3, 4, 5}), 4);
    Rng rng(1);
    const auto x = testing::random_input(net.input_size() * 2, rng);
    auto f = forward<double>(net, x, 2);
    const std::vector<std::vector<double>> zeros{std::vector<double>(2, 0.0), std::vector<double>(2, 0.0)};
    const auto g = backward(net, f.cache, spans(zeros));
    for (double v : g.gradients.values) REQUIRE(v == 0.0);
    for (double v : g.input_gradient) REQUIRE(v == 0.0);
}

TEST_CASE("dense layer under a sum loss: outer product of ones and input") {
    Architecture a;
    a.input = {1, 1, 4};
    a.trunk = {LayerSpec::dense(3)};
    auto net = init_network<double>(a, 5);
    const std::vector<double> x{0.5, -1.0, 2.0, 3.0};
    auto f = forward<double>(net, x);
    const std::vector<std::vector<double>> ones{{1.0, 1.0, 1.0}};
    const auto g = backward(net, f.cache, spans(ones));
    for (int o = 0; o < 3; ++o) {
        for (int i = 0; i < 4; ++i) CHECK(g.gradients.values[net.plan()[0].weight_offset + o * 4 + i] == x[i]);
        CHECK(g.gradients.values[net.plan()[0].bias_offset + o] == 1.0);
    }
    // dL/dx_i = sum_o W[o][i]
    for (int i = 0; i < 4; ++i) {
        double expect = 0.0;
        for (int o = 0; o < 3; ++o) expect += net.weights(0)[o * 4 + i];
        CHECK(g.input_gradient[i] == doctest::Approx(expect));
    }
}

TEST_CASE("backprop matches central finite differences per layer kind") {
    Rng rng(17);
    struct Case {
        const char* name;
        Architecture arch;
    };
    std::vector<Case> cases;
    {
        Architecture a;
        a.input = {9, 7, 3};
        a.trunk = {LayerSpec::conv(4, 3, 2)};
        cases.push_back({"conv2d", a});
    }
    {
        Architecture a;
        a.input = {2, 3, 2};
        a.trunk = {LayerSpec::dense(5)};
        cases.push_back({"dense", a});
    }
    {
        Architecture a;
        a.input = {3, 3, 2};
        a.trunk = {LayerSpec::dense(6), LayerSpec::relu()};
        cases.push_back({"relu", a});
    }
    {
        Architecture a;
        a.input = {1, 1, 5};
        a.trunk = {LayerSpec::dense(4), LayerSpec::sigmoid()};
        cases.push_back({"sigmoid", a});
    }
    {
        Architecture a;  // random 3-layer net
        a.input = {11, 11, 2};
        a.trunk = {LayerSpec::conv(3, 4, 2), LayerSpec::relu(), LayerSpec::dense(6), LayerSpec::relu(),
                   LayerSpec::dense(3)};
        cases.push_back({"three-layer", a});
    }
    for (const auto& c : cases) {
        CAPTURE(c.name);
        const auto net = testing::random_network(c.arch, 99);
        const int batch = 2;
        const auto x = testing::random_input(net.input_size() * batch, rng);
        const auto seeds = testing::random_seeds(net, batch, rng);
        const auto report = testing::check_gradients(net, x, batch, seeds);
        CHECK(report.parameters_checked == net.parameter_count());
        CHECK(report.max_relative_error < 1e-4);
    }
}

TEST_CASE("float network agrees with double reference and across kernel tables") {
    const auto arch = dqn_architecture({36, 36, 4}, {8, 8, 8, 16});
    const auto net_d = init_network<double>(arch, 12);
    const auto net_f = convert<float>(net_d);
    Rng rng(6);
    const int batch = 3;
    const auto xd = testing::random_input(net_d.input_size() * batch, rng);
    const std::vector<float> xf(xd.begin(), xd.end());
    const auto rd = forward<double>(net_d, xd, batch);

    const simd::KernelTable& saved = simd::active_kernels();
    std::vector<const simd::KernelTable*> tables{&simd::scalar_kernels()};
    if (auto* avx = simd::avx2_kernels()) tables.push_back(avx);
    std::vector<std::vector<float>> grads;
    for (const auto* t : tables) {
        simd::set_active_kernels(*t);
        auto rf = forward<float>(net_f, xf, batch);
        for (std::size_t i = 0; i < rd.outputs[0].values.size(); ++i) {
            CHECK(rf.outputs[0].values[i] == doctest::Approx(rd.outputs[0].values[i]).epsilon(1e-4));
        }
        const std::vector<float> seed(batch * 2, 1.0f);
        const auto g = backward<float>(net_f, rf.cache, {std::span<const float>(seed)});
        grads.push_back(g.gradients.values);
    }
    simd::set_active_kernels(saved);
    if (grads.size() == 2) {
        for (std::size_t i = 0; i < grads[0].size(); ++i) {
            REQUIRE(grads[0][i] == doctest::Approx(grads[1][i]).epsilon(1e-3).scale(1e-3));
        }
    }
}

TEST_CASE("activations respect their ranges") {
    const auto net = init_network<float>(a3c_architecture({21, 21, 4}, {4, 4, 8}), 3);
    Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<float> x(net.input_size());
        for (float& v : x) v = static_cast<float>((rng.uniform() - 0.5) * 200.0);
        const auto r = forward<float>(net, x);
        for (std::size_t l = 0; l < net.plan().size(); ++l) {
            if (net.plan()[l].spec.kind == LayerKind::relu) {
                for (float v : r.cache.outputs[l]) REQUIRE(v >= 0.0f);
            }
        }
        CHECK(r.outputs[0].values[0] > 0.0f);
        CHECK(r.outputs[0].values[0] < 1.0f);
    }
}

TEST_CASE("forward and backward are deterministic") {
    const auto net = init_network<float>(dqn_architecture({36, 36, 4}, {4, 4, 4, 8}), 77);
    Rng rng(2);
    const auto x = random_floats(net.input_size() * 2, rng);
    auto a = forward<float>(net, x, 2);
    auto b = forward<float>(net, x, 2);
    CHECK(a.outputs[0].values == b.outputs[0].values);
    const std::vector<float> seed{1, -1, 0.5f, 2};
    const auto ga = backward<float>(net, a.cache, {std::span<const float>(seed)});
    const auto gb = backward<float>(net, b.cache, {std::span<const float>(seed)});
    CHECK(ga.gradients.values == gb.gradients.values);
}

TEST_CASE("shape and cache mismatches are reported") {
    const auto net = init_network<double>(a3c_architecture({21, 21, 1}, {2, 2, 3}), 1);
    std::vector<double> wrong(net.input_size() + 1, 0.0);
    CHECK_THROWS_AS(forward<double>(net, wrong), DimensionError);

    std::vector<double> x(net.input_size(), 0.5);
    auto f = forward<double>(net, x);
    const auto other = init_network<double>(dqn_architecture({36, 36, 1}, {2, 2, 2, 3}), 1);
    const std::vector<double> g2(2, 1.0);
    CHECK_THROWS_AS(backward<double>(other, f.cache, {std::span<const double>(g2)}), ConsistencyError);
    const std::vector<double> g1(1, 1.0);
    CHECK_THROWS_AS(backward<double>(net, f.cache, {std::span<const double>(g1)}), DimensionError);
}

TEST_CASE("non-finite outputs raise a numeric error") {
    Architecture a;
    a.input = {1, 1, 2};
    a.trunk = {LayerSpec::dense(1)};
    Network<float> net(a);
    net.weights(0)[0] = 1.0f;
    const std::vector<float> x{std::numeric_limits<float>::infinity(), 0.0f};
    CHECK_THROWS_AS(forward<float>(net, x), NumericError);
}

TEST_CASE("init is seeded, fan-in bounded and has zero biases") {
    const auto arch = dqn_architecture();
    const auto a = init_network<float>(arch, 5);
    const auto b = init_network<float>(arch, 5);
    const auto c = init_network<float>(arch, 6);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    for (std::size_t l = 0; l < a.plan().size(); ++l) {
        const auto& p = a.plan()[l];
        if (!p.spec.has_parameters()) continue;
        for (float v : a.bias(l)) REQUIRE(v == 0.0f);
        const double limit = std::sqrt(6.0 / static_cast<double>(p.weight_count / p.bias_count));
        double max_abs = 0.0;
        for (float w : a.weights(l)) max_abs = std::max(max_abs, static_cast<double>(std::abs(w)));
        CHECK(max_abs <= limit);
        CHECK(max_abs > 0.5 * limit);
    }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    std::vector<float> p{1.0f, -2.0f, 3.0f};
    const std::vector<float> g(3, 0.0f);
    AdamState<float> s(3);
    adam_step<float>(p, g, s, 1e-4f);
    CHECK(p == std::vector<float>{1.0f, -2.0f, 3.0f});
    CHECK(s.step_count == 1u);
}

TEST_CASE("adam: first step moves by lr") {
    std::vector<double> p{0.0};
    const std::vector<double> g{1.0};
    AdamState<double> s(1);
    adam_step<double>(p, g, s, 1e-4);
    CHECK(p[0] == doctest::Approx(-1e-4).epsilon(1e-6));
    const double first = p[0];
    adam_step<double>(p, g, s, 1e-4);
    CHECK(p[0] < first);
    CHECK(s.step_count == 2u);

    std::vector<float> pf{0.0f};
    const std::vector<float> gf{1.0f};
    AdamState<float> sf(1);
    adam_step<float>(pf, gf, sf, 1e-4f);
    CHECK(pf[0] == doctest::Approx(-1e-4).epsilon(1e-4));
}

TEST_CASE("adam rejects non-finite gradients without touching parameters") {
    std::vector<float> p{1.0f, 2.0f};
    const std::vector<float> g{0.5f, std::nanf("")};
    AdamState<float> s(2);
    CHECK_THROWS_AS(adam_step<float>(p, g, s, 1e-4f), NumericError);
    CHECK(p == std::vector<float>{1.0f, 2.0f});
    CHECK(s.step_count == 0u);
    const std::vector<float> short_g{0.5f};
    CHECK_THROWS_AS(adam_step<float>(p, short_g, s, 1e-4f), DimensionError);
}
