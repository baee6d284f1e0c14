#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fdc/augment.hpp"
#include "fdc/matrix.hpp"
#include "fdc/nn/network.hpp"

// Grad-CAM heatmaps for the conv layers of a network.
namespace fdc::xai {

struct CamHeatmap {
    std::size_t conv = 0;   // 1-based conv layer number
    std::size_t layer = 0;  // index into NetworkSpec::layers
    std::size_t cls = 0;
    std::vector<double> alpha;  // one weight per feature map
    MatrixD raw;                // activation grid of the layer
    MatrixD upsampled;          // input resolution, nearest neighbour
};

// A^k is the rectified output of the chosen conv layer, y^c the class logit.
// alpha_k = mean over the map of dy^c/dA^k; map = ReLU(sum_k alpha_k A^k).
template <typename T>
CamHeatmap grad_cam(const nn::BasicNetwork<T>& net, std::span<const T> image, std::size_t cls, std::size_t conv);

// src = floor(i * rows / out_rows), likewise for columns.
MatrixD upsample_nearest(const MatrixD& m, std::size_t rows, std::size_t cols);

// 0.5 image + 0.5 map / max(map) when the map has a positive maximum, else the image.
MatrixF overlay(const MatrixD& upsampled, const MatrixF& image);

// Writes <prefix>_map.pgm, <prefix>_overlay.pgm, <prefix>_raw.csv and
// <prefix>.json with the layer, class, alpha values and overlap (when given).
void export_overlay(const CamHeatmap& cam, const MatrixF& image, const std::string& prefix,
                    std::optional<double> overlap = std::nullopt);

// Image columns whose SDI column lies in the fault span; the span is a
// per-SDI-column flag vector of length 31.
std::vector<bool> fault_image_columns(const augment::LayoutMap& layout, const std::vector<bool>& fault_columns);

// Share of the hottest decile of pixels (values >= the ceil(N/10)-th largest
// and > 0) lying in fault columns. Throws when the span is empty or no pixel
// qualifies.
double attention_overlap(const MatrixD& upsampled, const augment::LayoutMap& layout,
                         const std::vector<bool>& fault_columns);

// Area share of the fault columns: the overlap a uniform map would score.
double fault_area_share(const augment::LayoutMap& layout, const std::vector<bool>& fault_columns);

// Fault span of an SDI: columns whose sample carries a nonzero label.
std::vector<bool> fault_columns(const sdi::SdiMatrix& sdi);

// Conv numbers inspected by default: 1, 2, 6, 10, 13 when present, else all.
std::vector<std::size_t> default_layers(const nn::NetworkSpec& spec);

}  // namespace fdc::xai
