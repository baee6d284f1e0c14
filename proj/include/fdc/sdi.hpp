#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "fdc/dynamics.hpp"
#include "fdc/matrix.hpp"

namespace fdc::sdi {

inline constexpr std::size_t kRows = dynamics::kChannelCount;  // 15
inline constexpr std::size_t kCols = 31;
inline constexpr double kWindowSeconds = 30.0;
inline constexpr double kColumnSpacing = kWindowSeconds / (kCols - 1);  // 1 s, i.e. 1 Hz

using ColumnLabels = std::array<std::uint8_t, kCols>;

struct SdiMatrix {
    MatrixF values{kRows, kCols};  // row r is channel r of dynamics::Channel
    std::uint8_t label = 0;        // fault case at t_end
    double t_end = 0;
    ColumnLabels column_labels{};  // fault case at each column's sample
};

// Rows follow dynamics::channel_names().
std::span<const std::string_view> row_order();

// Nearest sample to time t.
std::size_t sample_index(const dynamics::SensorTrajectory& traj, double t);

// 31 columns covering [t - 30, t] at 1 Hz, nearest-sample selection, native units.
MatrixD crop_and_downsample(const dynamics::SensorTrajectory& traj, double t);

// Per-row min-max scaling to [0, 1]; constant rows become 0.5. Throws on NaN.
MatrixF normalize_rows(const MatrixD& raw);

SdiMatrix stack_sdi(const dynamics::SensorTrajectory& traj, double t);

// Image dataset container: manifest JSON + f32 record blob + metadata blob.
struct SdiDataset {
    std::vector<SdiMatrix> records;
    nlohmann::json generator = nlohmann::json::object();  // seeds and config that produced it

    std::size_t size() const noexcept { return records.size(); }
    std::array<std::size_t, 10> label_histogram() const;
};

inline constexpr std::string_view kManifestName = "manifest.json";
inline constexpr std::string_view kBlobName = "sdi.bin";
inline constexpr std::string_view kMetaName = "sdi_meta.bin";

nlohmann::json manifest(const SdiDataset& ds);
void save_dataset(const SdiDataset& ds, const std::string& dir);
SdiDataset load_dataset(const std::string& dir);

// Binary PGM (P5, 8-bit, floor(255 v)).
std::string to_pgm(const MatrixF& image);
void write_pgm(const MatrixF& image, const std::string& path);

}  // namespace fdc::sdi
