#include <algorithm>
#include <unordered_map>
#include <random>

#include "doctest.h"
#include "util.hpp"

#include "fdc/augment.hpp"
#include "fdc/errors.hpp"
#include "fdc/random.hpp"

using namespace fdc;
using namespace fdc::augment;

namespace {

MatrixF from_rows(std::initializer_list<std::initializer_list<float>> rows) {
    const std::size_t r = rows.size(), c = rows.begin()->size();
    std::vector<float> v;
    for (const auto& row : rows) v.insert(v.end(), row.begin(), row.end());
    return MatrixF(r, c, v);
}

bool zero_border(const MatrixF& img) {
    for (std::size_t r = 0; r < 224; ++r)
        for (std::size_t c = 0; c < 224; ++c) {
            const bool inside = r >= 7 && r < 217 && c >= 3 && c < 220;
            if (!inside && img(r, c) != 0.0f) return false;
        }
    return true;
}

// Interior value multiset equals the SDI multiset with every multiplicity x98.
bool multiset_98(const MatrixF& sdi, const MatrixF& img) {
    std::unordered_map<float, std::size_t> slot;
    std::vector<long> balance;
    for (float v : sdi.values()) {
        auto [it, fresh] = slot.try_emplace(v, balance.size());
        if (fresh) balance.push_back(0);
        balance[it->second] += 98;
    }
    for (std::size_t r = 7; r < 217; ++r)
        for (std::size_t c = 3; c < 220; ++c) {
            const auto it = slot.find(img(r, c));
            if (it == slot.end()) return false;
            --balance[it->second];
        }
    return std::all_of(balance.begin(), balance.end(), [](long b) { return b == 0; });
}

MatrixF random_sdi(Rng& rng) {
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    MatrixF m(sdi::kRows, sdi::kCols);
    for (float& v : m.values()) v = u(rng);
    return m;
}

}  // namespace

TEST_SUITE("augment") {

TEST_CASE("primitives") {
    const MatrixF m = from_rows({{1, 2}, {3, 4}});
    CHECK(tile(m, 2, 2) == from_rows({{1, 2, 1, 2}, {3, 4, 3, 4}, {1, 2, 1, 2}, {3, 4, 3, 4}}));
    CHECK(tile(m, 1, 1) == m);
    CHECK(repeat_elements(from_rows({{1, 2}}), 2, 2) == from_rows({{1, 1, 2, 2}, {1, 1, 2, 2}}));
    CHECK(repeat_elements(from_rows({{5}}), 3, 3) == MatrixF(3, 3, 5.0f));
    CHECK(tile(from_rows({{5}}), 3, 3) == repeat_elements(from_rows({{5}}), 3, 3));
    CHECK(flip(from_rows({{1, 2, 3}}), Axis::LeftRight) == from_rows({{3, 2, 1}}));
    CHECK(flip(m, Axis::UpDown) == from_rows({{3, 4}, {1, 2}}));
    CHECK(flip(flip(m, Axis::LeftRight), Axis::UpDown) == flip(flip(m, Axis::UpDown), Axis::LeftRight));
    CHECK(flip(flip(m, Axis::UpDown), Axis::LeftRight) == from_rows({{4, 3}, {2, 1}}));
    CHECK(alternate_lr(m, 3) == from_rows({{1, 2, 2, 1, 1, 2}, {3, 4, 4, 3, 3, 4}}));
    CHECK(alternate_ud(from_rows({{1}, {2}}), 3) == from_rows({{1}, {2}, {2}, {1}, {1}, {2}}));
    CHECK(tile(MatrixF(15, 31), 14, 7).rows() == 210);
    CHECK(tile(MatrixF(15, 31), 14, 7).cols() == 217);
}

TEST_CASE("zero padding layout") {
    MatrixF ones(210, 217, 1.0f);
    const MatrixF p = zero_pad(ones);
    double sum = 0;
    for (float v : p.values()) sum += v;
    CHECK(sum == 45570.0);
    MatrixF ramp(210, 217);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp.values()[i] = static_cast<float>(i + 1);
    const MatrixF q = zero_pad(ramp);
    CHECK(q(7, 3) == ramp(0, 0));
    CHECK(q(216, 219) == ramp(209, 216));
    CHECK(zero_pad(MatrixF(210, 217)) == MatrixF(224, 224));
    CHECK_THROWS_AS(zero_pad(MatrixF(210, 216)), ShapeError);
}

TEST_CASE("method names round trip") {
    CHECK(kAllMethods.size() == 7);
    for (auto m : kAllMethods) CHECK(parse_method(to_string(m)) == m);
    CHECK(to_string(Method::AllTile) == "All_Tile");
    CHECK_THROWS_AS(parse_method("Nope"), InvalidArgument);
}

TEST_CASE("method layouts on a small index image") {
    MatrixF sdi(sdi::kRows, sdi::kCols);
    for (std::size_t i = 0; i < sdi.size(); ++i) sdi.values()[i] = static_cast<float>(i);
    const MatrixF t = augment::augment(sdi, Method::AllTile);
    CHECK(t(7 + 15, 3 + 31) == sdi(0, 0));
    CHECK(t(7 + 3, 3 + 5) == sdi(3, 5));
    const MatrixF r = augment::augment(sdi, Method::AllRepeat);
    CHECK(r(7 + 14 * 2 + 13, 3 + 7 * 4 + 6) == sdi(2, 4));
    const MatrixF f = augment::augment(sdi, Method::AllFlip);
    CHECK(f(7, 3 + 31) == sdi(0, 30));           // second column block is mirrored
    CHECK(f(7 + 15, 3) == sdi(14, 0));           // second row block is flipped upside down
    CHECK(f(7 + 15, 3 + 31) == sdi(14, 30));
    const MatrixF lrt = augment::augment(sdi, Method::LrFlipTile);
    CHECK(lrt(7 + 15, 3 + 31) == sdi(0, 30));
    const MatrixF lrr = augment::augment(sdi, Method::LrFlipRepeat);
    CHECK(lrr(7 + 13, 3 + 31) == sdi(0, 30));
    CHECK(lrr(7 + 14, 3) == sdi(1, 0));
    const MatrixF udt = augment::augment(sdi, Method::UdFlipTile);
    CHECK(udt(7 + 15, 3 + 31) == sdi(14, 0));
    const MatrixF udr = augment::augment(sdi, Method::UdFlipRepeat);
    CHECK(udr(7 + 15, 3 + 6) == sdi(14, 0));
    CHECK(udr(7, 3 + 7) == sdi(0, 1));
}

TEST_CASE("constant SDI gives identical images for all methods") {
    const MatrixF c(sdi::kRows, sdi::kCols, 0.625f);
    const MatrixF ref = augment::augment(c, Method::AllTile);
    for (auto m : kAllMethods) CHECK(augment::augment(c, m) == ref);
}

TEST_CASE("gather table reproduces augment and maps columns back") {
    Rng rng(4);
    for (auto m : kAllMethods) {
        const MatrixF sdi = random_sdi(rng);
        const MatrixF img = augment::augment(sdi, m);
        std::vector<float> out(kImageSize * kImageSize, -1.0f);
        const LayoutMap& layout = layout_for(m);
        layout.apply(sdi.values(), out);
        CHECK(std::equal(out.begin(), out.end(), img.values().begin()));
        CHECK_FALSE(layout.sdi_column(0).has_value());
        CHECK_FALSE(layout.sdi_column(223).has_value());
        CHECK_FALSE(layout.sdi_row(6).has_value());
        for (std::size_t col = 3; col < 220; ++col) {
            const auto sc = layout.sdi_column(col);
            REQUIRE(sc.has_value());
            CHECK(img(100, col) == sdi(*layout.sdi_row(100), *sc));
        }
    }
}

TEST_CASE("property: border and 98x multiset for 1000 random SDIs") {
    Rng rng(2024);
    std::size_t checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const MatrixF sdi = random_sdi(rng);
        for (auto m : kAllMethods) {
            const MatrixF img = augment::augment(sdi, m);
            REQUIRE(img.rows() == 224);
            REQUIRE(img.cols() == 224);
            REQUIRE(zero_border(img));
            REQUIRE(multiset_98(sdi, img));
            ++checked;
        }
    }
    CHECK(checked == 7000);
}

TEST_CASE("image batch container round trip") {
    TempDir dir("aug_batch");
    std::vector<AugmentedImage> imgs;
    Rng rng(1);
    for (auto m : {Method::AllTile, Method::UdFlipRepeat}) {
        sdi::SdiMatrix s;
        s.values = random_sdi(rng);
        s.label = 6;
        imgs.push_back(augment::augment(s, m));
    }
    save_image_batch(imgs, dir.str());
    const auto back = load_image_batch(dir.str());
    REQUIRE(back.size() == 2);
    CHECK(back[0].values == imgs[0].values);
    CHECK(back[1].method == Method::UdFlipRepeat);
    CHECK(back[1].label == 6);
}

}  // TEST_SUITE
