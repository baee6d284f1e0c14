#include <cmath>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"

#include "fdc/errors.hpp"
#include "fdc/nn/network.hpp"
#include "fdc/random.hpp"

using namespace fdc;
using namespace fdc::nn;

namespace {

NetworkSpec single_conv(std::size_t in, std::size_t out, std::size_t hw) {
    NetworkSpec s;
    s.name = "one_conv";
    s.input = {in, hw, hw};
    s.layers = {{LayerKind::Conv, in, out}, {LayerKind::Dense, out * hw * hw, 2}};
    return s;
}

// Output of the conv layer, ahead of the dense head every network carries.
std::vector<float> conv_output(const Network& net, std::span<const float> x) {
    return net.forward_trace(x, 1).activations[1];
}

NetworkSpec dense_head(std::size_t in) {
    NetworkSpec s;
    s.name = "head";
    s.input = {in, 1, 1};
    s.layers = {{LayerKind::Dense, in, 10}};
    return s;
}

std::vector<float> ramp(std::size_t n, float scale = 0.01f) {
    std::vector<float> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = scale * static_cast<float>((i * 7919) % 101);
    return v;
}

}  // namespace

TEST_SUITE("nnet") {

TEST_CASE("parameter counts") {
    CHECK(param_count(vgg16_fdc()) == 134300362);
    CHECK(param_count(dense_head(4096)) == 40970);
    CHECK(param_count(compact_fdc()) == 80 + 1168 + 4640 + 100416 + 650);
    CHECK(vgg16_fdc().conv_layers().size() == 13);
    CHECK(compact_fdc().classes() == 10);
    CHECK(preset("VGG16_FDC") == vgg16_fdc());
    CHECK_THROWS_AS(preset("nope"), InvalidArgument);
}

TEST_CASE("spec validation names the broken layer and survives JSON") {
    NetworkSpec s = compact_fdc();
    CHECK(spec_from_json(to_json(s)) == s);
    s.layers[5].in = 9;
    try {
        s.validate();
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("layer 5") != std::string::npos);
    }
}

TEST_CASE("identity kernel and zero network") {
    Network net(single_conv(1, 1, 5));
    net.params()[0].weight[4] = 1.0f;
    const auto x = ramp(25);
    CHECK(conv_output(net, x) == x);

    Network zero(compact_fdc());
    const auto img = ramp(224 * 224);
    for (float v : zero.forward(img, 1)) CHECK(v == 0.0f);
}

TEST_CASE("forward matches a direct convolution") {
    Network net(single_conv(3, 4, 9));
    net.initialize(5);
    Rng rng(1);
    std::uniform_real_distribution<float> u(-1, 1);
    for (auto& b : net.params()[0].bias.values()) b = u(rng);
    const auto x = ramp(3 * 81, 0.02f);
    const auto got = conv_output(net, x);
    const auto wd = net.params()[0].weight.cast<double>();
    const auto bd = net.params()[0].bias.cast<double>();
    const std::vector<double> xd(x.begin(), x.end());
    const auto want = testing::naive_conv(xd, wd.values(), bd.values(), 3, 4, 9, 9);
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-5));
}

TEST_CASE("conv is translation equivariant in the interior") {
    Network net(single_conv(1, 2, 12));
    net.initialize(3);
    std::vector<float> x(144, 0.0f), shifted(144, 0.0f);
    Rng rng(2);
    std::uniform_real_distribution<float> u(0, 1);
    for (std::size_t r = 2; r < 9; ++r)
        for (std::size_t c = 2; c < 9; ++c) x[r * 12 + c] = u(rng);
    for (std::size_t r = 0; r < 11; ++r)
        for (std::size_t c = 0; c < 11; ++c) shifted[(r + 1) * 12 + c + 1] = x[r * 12 + c];
    const auto a = conv_output(net, x), b = conv_output(net, shifted);
    for (std::size_t o = 0; o < 2; ++o)
        for (std::size_t r = 1; r < 10; ++r)
            for (std::size_t c = 1; c < 10; ++c)
                CHECK(b[o * 144 + (r + 1) * 12 + c + 1] == a[o * 144 + r * 12 + c]);
}

TEST_CASE("cross entropy") {
    std::vector<double> zero(30, 0.0);
    std::vector<std::uint8_t> labels{0, 4, 9};
    const auto r = softmax_cross_entropy<double>(zero, labels, 10);
    CHECK(std::abs(r.loss - std::log(10.0)) < 1e-12);
    std::vector<double> sure(10, 0.0);
    sure[3] = 60;
    CHECK(softmax_cross_entropy<double>(sure, std::vector<std::uint8_t>{3}, 10).loss < 1e-20);
    std::vector<double> logits(20);
    std::iota(logits.begin(), logits.end(), -7.0);
    const auto p = softmax<double>(logits, 10);
    CHECK(std::accumulate(p.begin(), p.begin() + 10, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> grad(20);
    softmax_cross_entropy<double>(logits, std::vector<std::uint8_t>{1, 2}, 10, grad);
    CHECK(grad[1] == doctest::Approx((p[1] - 1) / 2));
    CHECK(grad[15] == doctest::Approx(p[15] / 2));
    CHECK_THROWS_AS(softmax_cross_entropy<double>(zero, std::vector<std::uint8_t>{0, 1, 10}, 10), RangeError);
}

TEST_CASE("gradient check: tiny net every parameter, f64") {
    Network init(testing::tiny_spec());
    init.initialize(8);
    NetworkD net = init.cast<double>();
    Rng rng(3);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    for (auto& p : net.params())
        for (double& b : p.bias.values()) b = u(rng);
    const auto batch = testing::random_batch(net.spec().input, 4, 11);
    const auto r = testing::gradient_check(net, batch.pixels, batch.labels, 1e-4, 1e-5);
    MESSAGE("max rel " << r.max_rel << ", excluded " << r.excluded);
    CHECK(r.failures == 0);
    CHECK(r.checked + r.excluded == param_count(net.spec()));
    CHECK(r.excluded * 50 < r.checked);  // kinks touched by the step stay rare
}

TEST_CASE("f32 gradients agree with f64 to 1e-2") {
    Network net(testing::tiny_spec());
    net.initialize(2);
    const auto batch = testing::random_batch(net.spec().input, 3, 5);
    const std::vector<float> px(batch.pixels.begin(), batch.pixels.end());
    const auto gf = net.loss_and_gradients(px, batch.labels).second;
    const auto gd = net.cast<double>().loss_and_gradients(batch.pixels, batch.labels).second;
    for (std::size_t l : net.spec().parametric_layers())
        for (std::size_t i = 0; i < gd.params[l].weight.size(); ++i) {
            const double a = gf.params[l].weight[i], b = gd.params[l].weight[i];
            CHECK(std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3}) < 1e-2);
        }
}

TEST_CASE("sgd with momentum") {
    Network net(dense_head(3));
    net.initialize(1);
    const Network start = net;
    Gradients<float> g;
    g.params.resize(1);
    g.params[0].weight = Tensor<float>({10, 3}, 0.5f);
    g.params[0].bias = Tensor<float>({10}, -0.25f);

    Network plain = start;
    plain.sgd_step(g, 0.1, 0.0);
    CHECK(plain.params()[0].weight[4] == doctest::Approx(start.params()[0].weight[4] - 0.05f));

    net.sgd_step(g, 0.1, 0.9);
    net.sgd_step(g, 0.1, 0.9);
    for (std::size_t i = 0; i < 30; ++i)
        CHECK(net.params()[0].weight[i] == doctest::Approx(start.params()[0].weight[i] - 0.1 * 0.5 * 2.9).epsilon(1e-6));
    CHECK(net.params()[0].bias[2] == doctest::Approx(0.1 * 0.25 * 2.9).epsilon(1e-6));

    Gradients<float> zero = g;
    zero.params[0].weight.fill(0);
    zero.params[0].bias.fill(0);
    Network still = start;
    still.sgd_step(zero, 0.1, 0.9);
    CHECK(still == start);
}

TEST_CASE("training: constant loss at a vanishing lr, deterministic, overfits one batch") {
    const auto data = testing::tiny_images(100, 4);
    Network b(testing::tiny_spec());
    b.initialize(1);
    const auto still = train(b, data, {1e-300, 0.0, 25, 3, 7});
    CHECK(still.epochs[0].loss == doctest::Approx(still.epochs[2].loss).epsilon(1e-12));

    Network c(testing::tiny_spec()), d(testing::tiny_spec());
    c.initialize(9);
    d.initialize(9);
    const TrainConfig cfg{0.05, 0.9, 100, 200, 3};
    const auto hc = train(c, data, cfg);
    const auto hd = train(d, data, cfg);
    CHECK(c == d);
    CHECK(hc.epochs.back().loss == hd.epochs.back().loss);
    CHECK(evaluate(c, data).accuracy == 100.0);

    CHECK_THROWS_AS(train(c, ImageSet({1, 16, 16}, {}, {}), cfg), InvalidArgument);
    CHECK_THROWS_AS((TrainConfig{0, 0.9, 100, 1, 0}.validate()), InvalidArgument);
    CHECK_THROWS_AS((TrainConfig{0.1, 1.0, 100, 1, 0}.validate()), InvalidArgument);
    CHECK_THROWS_AS((TrainConfig{0.1, 0.5, 0, 1, 0}.validate()), InvalidArgument);
}

TEST_CASE("evaluation: confusion matrix identities") {
    std::vector<float> px(10 * 3, 0.0f);
    std::vector<std::uint8_t> labels(10);
    std::iota(labels.begin(), labels.end(), 0);
    const ImageSet balanced({3, 1, 1}, px, labels);
    Network net(dense_head(3));
    net.params()[0].bias[6] = 1.0f;  // always predicts 6
    const auto ev = evaluate(net, balanced);
    CHECK(ev.accuracy == doctest::Approx(10.0));
    std::uint64_t trace = 0;
    for (std::size_t r = 0; r < 10; ++r) {
        CHECK(std::accumulate(ev.confusion.row(r).begin(), ev.confusion.row(r).end(), std::uint64_t{0}) == 1);
        trace += ev.confusion(r, r);
    }
    CHECK(ev.accuracy == doctest::Approx(100.0 * static_cast<double>(trace) / 10));
    CHECK(ev.recall()[6] == 100.0);
    CHECK(ev.recall()[0] == 0.0);
}

}  // TEST_SUITE
