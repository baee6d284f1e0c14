#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

#include "fdc/nn/kernels.hpp"
#include "fdc/random.hpp"

using namespace fdc;
using namespace fdc::nn::kernels;

namespace {

template <typename T>
std::vector<T> random_vec(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(u(rng));
    return v;
}

template <typename T>
double max_diff(const std::vector<T>& a, const std::vector<T>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return m;
}

template <typename T>
void compare_all(double tol) {
    for (const ConvShape s : {ConvShape{2, 3, 5, 7, 9}, ConvShape{1, 1, 8, 56, 56}, ConvShape{3, 8, 4, 1, 1}, ConvShape{2, 4, 4, 2, 13}}) {
        const std::size_t in_n = s.batch * s.in_channels * s.height * s.width;
        const std::size_t out_n = s.batch * s.out_channels * s.height * s.width;
        const std::size_t w_n = s.out_channels * s.in_channels * 9;
        const auto in = random_vec<T>(in_n, 1), w = random_vec<T>(w_n, 2), b = random_vec<T>(s.out_channels, 3);
        const auto gout = random_vec<T>(out_n, 4);
        std::vector<T> o1(out_n), o2(out_n);
        reference::conv3x3_forward<T>(in, w, b, o1, s);
        parallel::conv3x3_forward<T>(in, w, b, o2, s);
        CHECK(max_diff(o1, o2) < tol);
        std::vector<T> gi1(in_n), gi2(in_n);
        reference::conv3x3_backward_input<T>(gout, w, gi1, s);
        parallel::conv3x3_backward_input<T>(gout, w, gi2, s);
        CHECK(max_diff(gi1, gi2) < tol);
        std::vector<T> gw1(w_n), gw2(w_n), gb1(s.out_channels), gb2(s.out_channels);
        reference::conv3x3_backward_params<T>(in, gout, gw1, gb1, s);
        parallel::conv3x3_backward_params<T>(in, gout, gw2, gb2, s);
        CHECK(max_diff(gw1, gw2) < tol * 100);
        CHECK(max_diff(gb1, gb2) < tol * 100);
    }
    for (const PoolShape s : {PoolShape{2, 3, 8, 8}, PoolShape{1, 2, 7, 5}}) {
        const std::size_t in_n = s.batch * s.channels * s.height * s.width;
        const std::size_t out_n = s.batch * s.channels * s.out_height() * s.out_width();
        auto in = random_vec<T>(in_n, 5);
        in[0] = in[1] = in[s.width] = in[s.width + 1] = T(2);  // a tie: the first max wins in both
        const auto gout = random_vec<T>(out_n, 6);
        std::vector<T> o1(out_n), o2(out_n), g1(in_n), g2(in_n);
        reference::maxpool2x2_forward<T>(in, o1, s);
        parallel::maxpool2x2_forward<T>(in, o2, s);
        CHECK(o1 == o2);
        reference::maxpool2x2_backward<T>(in, gout, g1, s);
        parallel::maxpool2x2_backward<T>(in, gout, g2, s);
        CHECK(g1 == g2);
        CHECK(g1[0] == gout[0]);
        CHECK(g1[1] == T(0));
    }
    {
        const DenseShape s{5, 37, 11};
        const auto in = random_vec<T>(s.batch * s.in_features, 7), w = random_vec<T>(s.in_features * s.out_features, 8);
        const auto b = random_vec<T>(s.out_features, 9), gout = random_vec<T>(s.batch * s.out_features, 10);
        std::vector<T> o1(s.batch * s.out_features), o2(o1.size());
        reference::dense_forward<T>(in, w, b, o1, s);
        parallel::dense_forward<T>(in, w, b, o2, s);
        CHECK(max_diff(o1, o2) < tol);
        std::vector<T> gi1(in.size()), gi2(in.size()), gw1(w.size()), gw2(w.size()), gb1(b.size()), gb2(b.size());
        reference::dense_backward_input<T>(gout, w, gi1, s);
        parallel::dense_backward_input<T>(gout, w, gi2, s);
        CHECK(max_diff(gi1, gi2) < tol);
        reference::dense_backward_params<T>(in, gout, gw1, gb1, s);
        parallel::dense_backward_params<T>(in, gout, gw2, gb2, s);
        CHECK(max_diff(gw1, gw2) < tol);
        CHECK(max_diff(gb1, gb2) < tol);
    }
    {
        const auto in = random_vec<T>(100, 11), gout = random_vec<T>(100, 12);
        std::vector<T> o1(100), o2(100), g1(100), g2(100);
        reference::relu_forward<T>(in, o1);
        parallel::relu_forward<T>(in, o2);
        CHECK(o1 == o2);
        reference::relu_backward<T>(in, gout, g1);
        parallel::relu_backward<T>(in, gout, g2);
        CHECK(g1 == g2);
    }
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("parallel kernels agree with the serial reference, f64") { compare_all<double>(1e-12); }

TEST_CASE("parallel kernels agree with the serial reference, f32") { compare_all<float>(1e-5); }

TEST_CASE("parallel results do not depend on the thread count") {
    const ConvShape s{4, 8, 16, 28, 28};
    const auto in = random_vec<float>(s.batch * s.in_channels * 28 * 28, 1);
    const auto w = random_vec<float>(s.out_channels * s.in_channels * 9, 2);
    const auto gout = random_vec<float>(s.batch * s.out_channels * 28 * 28, 3);
    const int saved = thread_count();
    std::vector<std::vector<float>> outs;
    for (int t : {1, 2, 3}) {
        set_thread_count(t);
        std::vector<float> gw(w.size()), gb(s.out_channels);
        parallel::conv3x3_backward_params<float>(in, gout, gw, gb, s);
        outs.push_back(gw);
    }
    set_thread_count(saved);
    CHECK(outs[0] == outs[1]);
    CHECK(outs[0] == outs[2]);
}

}  // TEST_SUITE
