#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fdc/matrix.hpp"
#include "fdc/nn/network.hpp"

// Independent reference computations shared by the unit and acceptance tests.
namespace fdc::testing {

// Tiny classifier used by the pruning and Grad-CAM oracles:
// 1x16x16 -> conv 8 -> relu -> pool -> conv 8 -> relu -> pool -> dense 10.
nn::NetworkSpec tiny_spec();

// n synthetic 16x16 images. The class picks where a bright 4x4 patch sits
// (a 5x2 grid of anchors, jittered by one pixel) over low-level noise.
nn::ImageSet tiny_images(std::size_t n, std::uint64_t seed);

// tiny_spec trained for a few epochs on tiny_images(200, seed).
nn::Network trained_tiny(std::uint64_t seed);

// Random NCHW batch with values in [0, 1) and random labels.
struct RandomBatch {
    std::vector<double> pixels;
    std::vector<std::uint8_t> labels;
};
RandomBatch random_batch(const nn::FeatureShape& shape, std::size_t batch, std::uint64_t seed);

struct GradCheck {
    double max_rel = 0;          // over checked parameters
    std::size_t checked = 0;
    std::size_t excluded = 0;    // perturbation crossed a relu or pool tie
    std::size_t failures = 0;    // rel > tolerance without a tie
};

// Central differences of the mean cross-entropy, every parameter.
// rel = |a - n| / max(|a|, |n|, 1e-6).
GradCheck gradient_check(nn::NetworkD net, std::span<const double> pixels, std::span<const std::uint8_t> labels,
                         double h, double tolerance);

// Direct 3x3, pad 1 cross-correlation over one NCHW sample.
std::vector<double> naive_conv(std::span<const double> in, std::span<const double> weight, std::span<const double> bias,
                               std::size_t in_ch, std::size_t out_ch, std::size_t h, std::size_t w);

// Cost change from zeroing each conv feature map, in conv/filter order.
struct Ablation {
    std::vector<double> dataset;      // |C(D, h=0) - C(D)| with C the mean loss
    std::vector<double> per_example;  // mean over examples of |C_n(h=0) - C_n|
};
Ablation ablation_oracle(const nn::Network& net, const nn::LabeledImages& data);

// Grad-CAM map with alpha_k from a central difference of the class logit
// along the all-ones direction of map A^k (the mean of dy/dA^k_ij).
MatrixD finite_difference_cam(const nn::NetworkD& net, std::span<const double> image, std::size_t cls,
                              std::size_t conv, double h);

}  // namespace fdc::testing
