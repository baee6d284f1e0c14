#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fdc/matrix.hpp"
#include "fdc/sdi.hpp"

namespace fdc::augment {

inline constexpr std::size_t kImageSize = 224;
inline constexpr std::size_t kRowCopies = 14;   // 15 * 14 = 210
inline constexpr std::size_t kColCopies = 7;    // 31 * 7 = 217
inline constexpr std::size_t kDupRows = sdi::kRows * kRowCopies;
inline constexpr std::size_t kDupCols = sdi::kCols * kColCopies;
inline constexpr std::size_t kPadTop = 7, kPadBottom = 7, kPadLeft = 3, kPadRight = 4;

enum class Method {
    AllTile,
    AllRepeat,
    AllFlip,
    LrFlipTile,
    LrFlipRepeat,
    UdFlipTile,
    UdFlipRepeat,
};

inline constexpr std::array kAllMethods{Method::AllTile,    Method::AllRepeat,    Method::AllFlip,
                                        Method::LrFlipTile, Method::LrFlipRepeat, Method::UdFlipTile,
                                        Method::UdFlipRepeat};

std::string_view to_string(Method m);
Method parse_method(std::string_view name);

enum class Axis { LeftRight, UpDown };

MatrixF tile(const MatrixF& m, std::size_t a, std::size_t b);
MatrixF repeat_elements(const MatrixF& m, std::size_t a, std::size_t b);
MatrixF flip(const MatrixF& m, Axis axis);
// Horizontal [M, M_lr, M, ...] with `blocks` blocks, and the vertical analogue.
MatrixF alternate_lr(const MatrixF& m, std::size_t blocks);
MatrixF alternate_ud(const MatrixF& m, std::size_t blocks);
// 210x217 -> 224x224 with 7/7 rows and 3/4 columns of zeros.
MatrixF zero_pad(const MatrixF& m);

// The 210x217 duplicate of a 15x31 matrix before padding.
MatrixF duplicate(const MatrixF& sdi, Method method);

struct AugmentedImage {
    MatrixF values{kImageSize, kImageSize};
    Method method = Method::AllTile;
    std::uint8_t label = 0;
};

AugmentedImage augment(const sdi::SdiMatrix& sdi, Method method);
MatrixF augment(const MatrixF& sdi_values, Method method);

// Precomputed gather table equivalent to augment(): entry p of the 224x224
// image reads SDI element source[p], or 0 where source[p] < 0. Built by
// pushing an index-valued SDI through augment().
class LayoutMap {
public:
    explicit LayoutMap(Method method);
    Method method() const noexcept { return method_; }
    void apply(std::span<const float> sdi_values, std::span<float> image) const;
    // SDI column shown at image column `col`, none inside the padding.
    std::optional<std::size_t> sdi_column(std::size_t col) const;
    std::optional<std::size_t> sdi_row(std::size_t row) const;

private:
    Method method_;
    std::vector<std::int32_t> source_;
};

const LayoutMap& layout_for(Method method);

// Batch container mirroring the SDI dataset layout with 224x224 records.
void save_image_batch(std::span<const AugmentedImage> images, const std::string& dir);
std::vector<AugmentedImage> load_image_batch(const std::string& dir);

}  // namespace fdc::augment
