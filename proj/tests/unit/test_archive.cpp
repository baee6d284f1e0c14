#include "doctest.h"
#include "oracles.hpp"
#include "util.hpp"

#include "fdc/binary_io.hpp"
#include "fdc/errors.hpp"
#include "fdc/nn/archive.hpp"

using namespace fdc;
using namespace fdc::nn;

namespace {

// Archive of an RGB-input variant of the tiny net, first conv set to `value`.
std::vector<ArchiveTensor> rgb_tensors(float value) {
    const Network ref(testing::tiny_spec());
    std::vector<ArchiveTensor> out;
    const auto names = parameter_names(ref.spec());
    std::size_t k = 0;
    for (std::size_t l : ref.spec().parametric_layers()) {
        for (const Tensor<float>* t : {&ref.params()[l].weight, &ref.params()[l].bias}) {
            ArchiveTensor a;
            a.name = names[k++];
            a.dims = t->shape();
            a.f32.assign(t->values().begin(), t->values().end());
            if (a.name == "conv1.weight") {
                a.dims = {8, 3, 3, 3};
                a.f32.assign(8 * 27, value);
                for (std::size_t i = 0; i < 9; ++i) a.f32[9 + i] = 2 * value;  // channel 1 of filter 0
            }
            out.push_back(std::move(a));
        }
    }
    return out;
}

}  // namespace

TEST_SUITE("archive") {

TEST_CASE("names follow conv/fc numbering") {
    const auto names = parameter_names(testing::tiny_spec());
    REQUIRE(names.size() == 6);
    CHECK(names[0] == "conv1.weight");
    CHECK(names[3] == "conv2.bias");
    CHECK(names[4] == "fc1.weight");
}

TEST_CASE("save, load, save is byte identical") {
    TempDir dir("archive");
    Network net(compact_fdc());
    net.initialize(4);
    save_weights(net, dir / "a.fdcw");
    const Network back = load_weights(dir / "a.fdcw");
    CHECK(back.spec() == net.spec());
    CHECK(back == net);
    save_weights(back, dir / "b.fdcw");
    CHECK(io::read_file(dir / "a.fdcw") == io::read_file(dir / "b.fdcw"));
    const auto bytes = io::read_file(dir / "a.fdcw");
    CHECK(bytes.size() >= 4 * param_count(net.spec()));
    CHECK(bytes.size() <= 4 * param_count(net.spec()) * 101 / 100);
}

TEST_CASE("truncated or corrupted archives raise without a model") {
    Network net(testing::tiny_spec());
    net.initialize(1);
    const auto bytes = serialize_weights(net);
    for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{11}, std::size_t{40}, bytes.size() / 2, bytes.size() - 1}) {
        std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
        CHECK_THROWS_AS(deserialize_weights(part), FormatError);
    }
    auto magic = bytes;
    magic[1] = 'X';
    CHECK_THROWS_AS(deserialize_weights(magic), FormatError);
    auto version = bytes;
    version[4] = 9;
    CHECK_THROWS_AS(deserialize_weights(version), FormatError);
}

TEST_CASE("shape mismatch names the tensor") {
    Network net(testing::tiny_spec());
    const auto bytes = serialize_weights(net);
    NetworkSpec other = testing::tiny_spec();
    other.layers[3].out = 6;
    other.layers[6].in = 96;
    try {
        (void)load_weights_into(other, bytes);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("conv2.weight") != std::string::npos);
    }
}

TEST_CASE("3-channel first conv is reduced by channel mean") {
    const auto bytes = encode_archive(rgb_tensors(0.3f));
    const Network net = load_weights_into(testing::tiny_spec(), bytes);
    const auto& w = net.params()[0].weight;
    CHECK(w.shape() == Shape{8, 1, 3, 3});
    for (std::size_t i = 0; i < 9; ++i) CHECK(w[i] == doctest::Approx((0.3 + 0.6 + 0.3) / 3));
    for (std::size_t i = 9; i < w.size(); ++i) CHECK(w[i] == doctest::Approx(0.3));
}

}  // TEST_SUITE
