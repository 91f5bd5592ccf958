#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "amnce/adam.hpp"
#include "amnce/mlp.hpp"
#include "amnce/rng.hpp"
#include "amnce/tensor.hpp"

using namespace amnce;

TEST_CASE("tensor shape/data invariant") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK_THROWS_AS(Tensor({2, 3}, {1.0, 2.0}), std::runtime_error);
    t.at(1, 2) = 5.0;
    CHECK(t.data[5] == 5.0);

    Tensor bad({2}, {1.0, std::nan("")});
    CHECK_THROWS_AS(require_finite(bad, "test"), std::runtime_error);
}

TEST_CASE("matmul small case") {
    const Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
    const Tensor b({3, 2}, {7, 8, 9, 10, 11, 12});
    const Tensor c = matmul(a, b);
    CHECK(c.at(0, 0) == doctest::Approx(58.0));
    CHECK(c.at(0, 1) == doctest::Approx(64.0));
    CHECK(c.at(1, 0) == doctest::Approx(139.0));
    CHECK(c.at(1, 1) == doctest::Approx(154.0));
    CHECK_THROWS_AS(matmul(a, a), std::runtime_error);
}

TEST_CASE("rng determinism and state round trip") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());

    Rng c(7);
    for (int i = 0; i < 13; ++i) c.normal();
    const std::string state = c.serialize_state();
    const double next = c.normal();
    Rng d(999);
    d.restore_state(state);
    CHECK(d.normal() == next);
}

TEST_CASE("mlp_forward identity layer") {
    Mlp net;
    LinearLayer l;
    l.weight = Tensor({2, 2}, {1, 0, 0, 1});
    l.bias = Tensor({2});
    l.activation = Activation::Identity;
    net.layers.push_back(l);

    const Tensor out = mlp_forward(net, Tensor({1, 2}, {1.0, 2.0}));
    CHECK(out.at(0, 0) == 1.0);
    CHECK(out.at(0, 1) == 2.0);
}

TEST_CASE("mlp_forward leaky relu slope") {
    Mlp net;
    LinearLayer l;
    l.weight = Tensor({1, 1}, {1.0});
    l.bias = Tensor({1});
    l.activation = Activation::LeakyRelu;
    l.leaky_slope = 0.1;
    net.layers.push_back(l);

    const Tensor out = mlp_forward(net, Tensor({1, 1}, {-2.0}));
    CHECK(out.at(0, 0) == doctest::Approx(-0.2));
}

TEST_CASE("mlp_forward matches straight-line recomputation") {
    Rng rng(11);
    Mlp net = make_mlp({2, 3, 1}, Activation::LeakyRelu, 0.1, Activation::Identity);
    xavier_init(net, rng);
    const Tensor input = rng.normal_tensor({4, 2});
    const Tensor out = mlp_forward(net, input);

    // Independent recomputation with plain loops.
    for (std::size_t b = 0; b < 4; ++b) {
        double h[3];
        for (int o = 0; o < 3; ++o) {
            double acc = net.layers[0].bias.data[o];
            for (int i = 0; i < 2; ++i) acc += net.layers[0].weight.at(o, i) * input.at(b, i);
            h[o] = acc >= 0.0 ? acc : 0.1 * acc;
        }
        double y = net.layers[1].bias.data[0];
        for (int o = 0; o < 3; ++o) y += net.layers[1].weight.at(0, o) * h[o];
        CHECK(out.at(b, 0) == doctest::Approx(y).epsilon(1e-12));
    }
}

TEST_CASE("mlp_forward rejects bad input") {
    Mlp net = make_mlp({2, 1}, Activation::Identity, 0.1, Activation::Identity);
    CHECK_THROWS_AS(mlp_forward(net, Tensor({1, 3})), std::runtime_error);
    CHECK_THROWS_AS(mlp_forward(net, Tensor({0, 2})), std::runtime_error);
}

TEST_CASE("mlp_backward identity layer input grad") {
    Mlp net;
    LinearLayer l;
    l.weight = Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0});
    l.bias = Tensor({2});
    l.activation = Activation::Identity;
    net.layers.push_back(l);

    ForwardTape tape;
    mlp_forward(net, Tensor({1, 2}, {0.5, -0.5}), &tape);
    const MlpGrads grads = mlp_backward(net, tape, Tensor({1, 2}, {1.0, 1.0}));
    // input_grad = W^T [1, 1]^T = column sums of W.
    CHECK(grads.input.at(0, 0) == doctest::Approx(4.0));
    CHECK(grads.input.at(0, 1) == doctest::Approx(6.0));
}

TEST_CASE("mlp_backward zero output grad gives zero grads") {
    Rng rng(3);
    Mlp net = make_mlp({3, 4, 2}, Activation::Tanh, 0.1, Activation::Identity);
    xavier_init(net, rng);
    ForwardTape tape;
    mlp_forward(net, rng.normal_tensor({2, 3}), &tape);
    const MlpGrads grads = mlp_backward(net, tape, Tensor({2, 2}));
    for (const auto& g : grads.params) {
        for (double v : g.data) CHECK(v == 0.0);
    }
    for (double v : grads.input.data) CHECK(v == 0.0);
}

TEST_CASE("mlp_backward rejects stale tape") {
    Rng rng(5);
    Mlp net = make_mlp({2, 3, 1}, Activation::Tanh, 0.1, Activation::Identity);
    xavier_init(net, rng);
    ForwardTape tape;
    mlp_forward(net, rng.normal_tensor({3, 2}), &tape);
    CHECK_THROWS_AS(mlp_backward(net, tape, Tensor({2, 1})), std::runtime_error);  // wrong batch
    Mlp other = make_mlp({2, 5, 1}, Activation::Tanh, 0.1, Activation::Identity);
    xavier_init(other, rng);
    CHECK_THROWS_AS(mlp_backward(other, tape, Tensor({3, 1})), std::runtime_error);
}

TEST_CASE("mlp_backward matches finite differences") {
    Rng rng(17);
    Mlp net = make_mlp({3, 5, 4, 2}, Activation::LeakyRelu, 0.2, Activation::Tanh);
    xavier_init(net, rng);
    const Tensor input = rng.normal_tensor({3, 3});
    const Tensor og = rng.normal_tensor({3, 2});

    ForwardTape tape;
    mlp_forward(net, input, &tape);
    const MlpGrads grads = mlp_backward(net, tape, og);

    const auto objective = [&](const Mlp& n, const Tensor& in) { return dot(mlp_forward(n, in), og); };

    CHECK(finite_difference_check([&](const Tensor& p) { return objective(net, p); }, input, grads.input,
                                  1e-5) < 1e-4);

    Mlp probe = net;
    auto probe_params = probe.params();
    auto orig_params = std::as_const(net).params();
    for (std::size_t pi = 0; pi < probe_params.size(); ++pi) {
        const double err = finite_difference_check(
            [&](const Tensor& p) {
                *probe_params[pi] = p;
                return objective(probe, input);
            },
            *orig_params[pi], grads.params[pi], 1e-5);
        CHECK(err < 1e-4);
        *probe_params[pi] = *orig_params[pi];
    }
}

TEST_CASE("leaky relu derivative at zero takes the positive branch") {
    Mlp net;
    LinearLayer l;
    l.weight = Tensor({1, 1}, {1.0});
    l.bias = Tensor({1});
    l.activation = Activation::LeakyRelu;
    l.leaky_slope = 0.1;
    net.layers.push_back(l);

    ForwardTape tape;
    mlp_forward(net, Tensor({1, 1}, {0.0}), &tape);  // pre-activation exactly 0
    const MlpGrads grads = mlp_backward(net, tape, Tensor({1, 1}, {1.0}));
    CHECK(grads.input.at(0, 0) == 1.0);
}

TEST_CASE("xavier bounds and determinism") {
    const double bound = std::sqrt(6.0 / 400.0);
    CHECK(bound == doctest::Approx(0.1224744871).epsilon(1e-8));

    // Property over seeds: all weights within the bound, biases exactly zero.
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 99ull}) {
        Rng rng(seed);
        Mlp net = make_mlp({200, 200, 1}, Activation::LeakyRelu, 0.1, Activation::Identity);
        xavier_init(net, rng);
        for (double w : net.layers[0].weight.data) {
            CHECK(std::abs(w) <= bound);
        }
        for (double b : net.layers[0].bias.data) CHECK(b == 0.0);
    }

    Rng r1(123), r2(123);
    Mlp a = make_mlp({4, 8, 1}, Activation::Tanh, 0.1, Activation::Identity);
    Mlp b = make_mlp({4, 8, 1}, Activation::Tanh, 0.1, Activation::Identity);
    xavier_init(a, r1);
    xavier_init(b, r2);
    CHECK(a.layers[0].weight.data == b.layers[0].weight.data);
    CHECK(a.layers[1].weight.data == b.layers[1].weight.data);
}

TEST_CASE("adam zero gradient is a fixed point") {
    Tensor p({3}, {1.0, -2.0, 0.5});
    const Tensor orig = p;
    std::vector<Tensor*> params{&p};
    AdamState state = make_adam({&p}, 0.1);
    for (int i = 0; i < 5; ++i) adam_step(params, {Tensor({3})}, state);
    CHECK(p.data == orig.data);
    CHECK(state.step_count == 5);
}

TEST_CASE("adam first step matches hand evaluation") {
    // g = 1, lr = 0.1, defaults: mhat = 1, vhat = 1 -> delta = -0.1 / (1 + 1e-8).
    Tensor p({1}, {0.0});
    std::vector<Tensor*> params{&p};
    AdamState state = make_adam({&p}, 0.1);
    adam_step(params, {Tensor({1}, {1.0})}, state);
    CHECK(p.data[0] == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("adam determinism") {
    Rng rng(31);
    const Tensor g1 = rng.normal_tensor({4});
    const Tensor g2 = rng.normal_tensor({4});

    Tensor pa({4}, {0.1, 0.2, 0.3, 0.4});
    Tensor pb = pa;
    AdamState sa = make_adam({&pa}, 0.01);
    AdamState sb = make_adam({&pb}, 0.01);
    adam_step({&pa}, {g1}, sa);
    adam_step({&pa}, {g2}, sa);
    adam_step({&pb}, {g1}, sb);
    adam_step({&pb}, {g2}, sb);
    CHECK(pa.data == pb.data);
}

TEST_CASE("finite_difference_check oracle behavior") {
    const Tensor v({4}, {0.3, -1.2, 0.7, 2.1});

    // Quadratic: exact under central differences up to roundoff.
    const auto half_sq = [](const Tensor& t) { return 0.5 * squared_norm(t); };
    CHECK(finite_difference_check(half_sq, v, v, 1e-5) < 1e-7);

    // Sum of tanh vs analytic 1 - tanh^2.
    const auto sum_tanh = [](const Tensor& t) {
        double s = 0.0;
        for (double x : t.data) s += std::tanh(x);
        return s;
    };
    Tensor tanh_grad({4});
    for (int i = 0; i < 4; ++i) {
        const double th = std::tanh(v.data[i]);
        tanh_grad.data[i] = 1.0 - th * th;
    }
    CHECK(finite_difference_check(sum_tanh, v, tanh_grad, 1e-5) < 1e-6);

    // A wrong gradient (scaled by 2) is detected with error near 1.
    const double bad = finite_difference_check(half_sq, v, 2.0 * v, 1e-5);
    CHECK(bad > 0.4);
}

TEST_CASE("gradient suite over random configurations") {
    CHECK(gradient_suite_max_rel_error(2024, 10) < 1e-4);
}
