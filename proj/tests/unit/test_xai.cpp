#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"

#include "fdc/augment.hpp"
#include "fdc/errors.hpp"
#include "fdc/random.hpp"
#include "fdc/xai.hpp"
#include "oracles.hpp"
#include "util.hpp"

using namespace fdc;

namespace {

std::vector<double> image_of(const nn::LabeledImages& data, std::size_t i) {
    std::vector<float> f(data.shape().size());
    data.fill(i, f);
    return {f.begin(), f.end()};
}

double max_of(const MatrixD& m) { return *std::max_element(m.values().begin(), m.values().end()); }

std::vector<bool> span_columns(std::size_t first, std::size_t last) {
    std::vector<bool> v(sdi::kCols, false);
    for (std::size_t c = first; c <= last; ++c) v[c] = true;
    return v;
}

}  // namespace

TEST_SUITE("xai") {

TEST_CASE("maps are non-negative and shaped like the layer") {
    const auto net = testing::trained_tiny(3).cast<double>();
    const auto data = testing::tiny_images(20, 9);
    for (std::size_t i = 0; i < 20; ++i) {
        const auto img = image_of(data, i);
        for (std::size_t conv : {1u, 2u}) {
            for (std::size_t cls : {0u, 4u, 9u}) {
                const auto cam = xai::grad_cam<double>(net, img, cls, conv);
                CHECK(cam.raw.rows() == (conv == 1 ? 16u : 8u));
                CHECK(cam.upsampled.rows() == 16);
                CHECK(cam.alpha.size() == 8);
                for (double v : cam.upsampled.values()) CHECK(v >= 0.0);
            }
        }
    }
}

TEST_CASE("zero gradient gives a zero map") {
    auto net = testing::trained_tiny(3).cast<double>();
    const auto data = testing::tiny_images(5, 9);
    SUBCASE("black input through a bias-free net") {
        for (auto& p : net.params()) p.bias.fill(0.0);
        const std::vector<double> black(256, 0.0);
        const auto cam = xai::grad_cam<double>(net, black, 2, 2);
        for (double v : cam.upsampled.values()) CHECK(v == 0.0);
    }
    SUBCASE("classifier ignores the features") {
        net.params()[6].weight.fill(0.0);
        const auto cam = xai::grad_cam<double>(net, image_of(data, 0), 2, 2);
        for (double a : cam.alpha) CHECK(a == 0.0);
        for (double v : cam.upsampled.values()) CHECK(v == 0.0);
    }
}

TEST_CASE("single feature map reduces to its rectified activation") {
    nn::NetworkSpec spec{"one", {1, 4, 4}, {{nn::LayerKind::Conv, 1, 1}, {nn::LayerKind::Relu, 0, 0},
                                             {nn::LayerKind::Dense, 16, 2}}};
    nn::NetworkD net(spec);
    auto& w = net.params()[0].weight;
    w.fill(0.0);
    w[4] = 1.0;  // identity kernel
    auto& d = net.params()[2].weight;
    for (std::size_t i = 0; i < 16; ++i) d[i] = 0.5;          // class 0 sums the map
    for (std::size_t i = 0; i < 16; ++i) d[16 + i] = -0.25;   // class 1 penalizes it
    std::vector<double> img(16);
    for (std::size_t i = 0; i < 16; ++i) img[i] = static_cast<double>(i % 5) - 1.0;
    const auto cam0 = xai::grad_cam<double>(net, img, 0, 1);
    CHECK(cam0.alpha[0] == doctest::Approx(0.5));
    for (std::size_t i = 0; i < 16; ++i) CHECK(cam0.raw.values()[i] == doctest::Approx(0.5 * std::max(img[i], 0.0)));
    const auto cam1 = xai::grad_cam<double>(net, img, 1, 1);
    for (double v : cam1.raw.values()) CHECK(v == 0.0);
}

TEST_CASE("alpha matches finite differences on the tiny net") {
    const auto net = testing::trained_tiny(4).cast<double>();
    const auto data = testing::tiny_images(6, 10);
    for (std::size_t i = 0; i < 6; ++i) {
        const auto img = image_of(data, i);
        for (std::size_t conv : {1u, 2u}) {
            const std::size_t cls = data.label(i);
            const auto cam = xai::grad_cam<double>(net, img, cls, conv);
            const auto fd = testing::finite_difference_cam(net, img, cls, conv, 1e-5);
            const double scale = std::max({max_of(cam.raw), max_of(fd), 1e-12});
            double worst = 0;
            for (std::size_t m = 0; m < fd.size(); ++m)
                worst = std::max(worst, std::abs(cam.raw.values()[m] - fd.values()[m]) / scale);
            CHECK(worst <= 1e-3);
        }
    }
}

TEST_CASE("float and double maps agree") {
    const auto net = testing::trained_tiny(5);
    const auto netd = net.cast<double>();
    const auto data = testing::tiny_images(4, 11);
    std::vector<float> f(256);
    data.fill(1, f);
    const std::vector<double> d(f.begin(), f.end());
    const auto a = xai::grad_cam<float>(net, f, 3, 2);
    const auto b = xai::grad_cam<double>(netd, d, 3, 2);
    const double scale = std::max(max_of(b.raw), 1e-9);
    for (std::size_t m = 0; m < a.raw.size(); ++m) CHECK(std::abs(a.raw.values()[m] - b.raw.values()[m]) / scale < 1e-4);
}

TEST_CASE("argument validation") {
    const auto net = testing::trained_tiny(3).cast<double>();
    const std::vector<double> img(256, 0.5);
    CHECK_THROWS_AS(xai::grad_cam<double>(net, img, 0, 0), InvalidArgument);
    CHECK_THROWS_AS(xai::grad_cam<double>(net, img, 0, 3), InvalidArgument);
    CHECK_THROWS_AS(xai::grad_cam<double>(net, img, 10, 1), RangeError);
}

TEST_CASE("nearest-neighbour upsampling") {
    MatrixD m(2, 2);
    m(0, 0) = 1;
    m(0, 1) = 2;
    m(1, 0) = 3;
    m(1, 1) = 4;
    const auto u = xai::upsample_nearest(m, 224, 224);
    for (std::size_t r = 0; r < 224; ++r)
        for (std::size_t c = 0; c < 224; ++c) CHECK(u(r, c) == m(r / 112, c / 112));
    MatrixD s(7, 7);
    for (std::size_t i = 0; i < 49; ++i) s.values()[i] = static_cast<double>(i);
    const auto v = xai::upsample_nearest(s, 224, 224);
    for (std::size_t r = 0; r < 224; ++r)
        for (std::size_t c = 0; c < 224; ++c) CHECK(v(r, c) == s(r / 32, c / 32));
    CHECK_THROWS_AS(xai::upsample_nearest(MatrixD(0, 0), 4, 4), ShapeError);
}

TEST_CASE("overlay blends half and half") {
    MatrixD map(2, 2, 0.0);
    map(0, 1) = 4.0;
    map(1, 1) = 2.0;
    MatrixF img(2, 2, 0.2f);
    const auto o = xai::overlay(map, img);
    CHECK(o(0, 0) == doctest::Approx(0.1));
    CHECK(o(0, 1) == doctest::Approx(0.6));
    CHECK(o(1, 1) == doctest::Approx(0.35));
    const auto same = xai::overlay(MatrixD(2, 2, 0.0), img);
    CHECK(same.values()[3] == 0.2f);
    CHECK_THROWS_AS(xai::overlay(MatrixD(3, 2, 0.0), img), ShapeError);
}

TEST_CASE("attention overlap") {
    const auto& layout = augment::layout_for(augment::Method::AllRepeat);
    const auto span = span_columns(20, 30);
    const auto cols = xai::fault_image_columns(layout, span);
    SUBCASE("map inside the span scores one") {
        MatrixD m(224, 224, 0.0);
        for (std::size_t r = 0; r < 224; ++r)
            for (std::size_t c = 0; c < 224; ++c)
                if (cols[c]) m(r, c) = 1.0 + static_cast<double>(r);
        CHECK(xai::attention_overlap(m, layout, span) == 1.0);
    }
    SUBCASE("map outside the span scores zero") {
        MatrixD m(224, 224, 0.0);
        for (std::size_t r = 0; r < 224; ++r)
            for (std::size_t c = 0; c < 224; ++c)
                if (!cols[c]) m(r, c) = 1.0;
        CHECK(xai::attention_overlap(m, layout, span) == 0.0);
    }
    SUBCASE("uniform map scores the area share") {
        const MatrixD m(224, 224, 1.0);
        const double share = xai::fault_area_share(layout, span);
        CHECK(xai::attention_overlap(m, layout, span) == doctest::Approx(share));
        // All_Repeat shows 11 of 31 columns, each repeated 7 times
        CHECK(share == doctest::Approx(11.0 * 7.0 / 224.0));
    }
    SUBCASE("zero map and empty span are rejected") {
        CHECK_THROWS_AS(xai::attention_overlap(MatrixD(224, 224, 0.0), layout, span), InvalidArgument);
        CHECK_THROWS_AS(xai::attention_overlap(MatrixD(224, 224, 1.0), layout, std::vector<bool>(31, false)),
                        InvalidArgument);
        CHECK_THROWS_AS(xai::attention_overlap(MatrixD(16, 16, 1.0), layout, span), ShapeError);
    }
}

TEST_CASE("fault columns follow the column labels") {
    sdi::SdiMatrix s;
    s.column_labels.fill(0);
    s.column_labels[5] = 3;
    s.column_labels[6] = 3;
    const auto f = xai::fault_columns(s);
    CHECK(f.size() == 31);
    CHECK(std::count(f.begin(), f.end(), true) == 2);
    CHECK(f[5]);
    CHECK(f[6]);
}

TEST_CASE("default layers") {
    CHECK(xai::default_layers(nn::vgg16_fdc()) == std::vector<std::size_t>{1, 2, 6, 10, 13});
    CHECK(xai::default_layers(nn::compact_fdc()) == std::vector<std::size_t>{1, 2, 3});
}

TEST_CASE("overlay export writes every file") {
    const auto net = testing::trained_tiny(3).cast<double>();
    const std::vector<double> img(256, 0.3);
    const auto cam = xai::grad_cam<double>(net, img, 1, 1);
    TempDir dir("xai");
    MatrixF image(16, 16, 0.3f);
    xai::export_overlay(cam, image, dir / "cam", 0.25);
    for (const char* suffix : {"_map.pgm", "_overlay.pgm", "_raw.csv", ".json"})
        CHECK(std::filesystem::exists(dir / (std::string("cam") + suffix)));
}

}  // TEST_SUITE
