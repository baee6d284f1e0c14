#include "fdc/augment.hpp"

#include <filesystem>
#include <mutex>

#include "fdc/binary_io.hpp"
#include "fdc/errors.hpp"

namespace fdc::augment {

namespace fs = std::filesystem;

std::string_view to_string(Method m) {
    switch (m) {
        case Method::AllTile: return "All_Tile";
        case Method::AllRepeat: return "All_Repeat";
        case Method::AllFlip: return "All_Flip";
        case Method::LrFlipTile: return "LR_Flip_Tile";
        case Method::LrFlipRepeat: return "LR_Flip_Repeat";
        case Method::UdFlipTile: return "UD_Flip_Tile";
        case Method::UdFlipRepeat: return "UD_Flip_Repeat";
    }
    return "unknown";
}

Method parse_method(std::string_view name) {
    for (Method m : kAllMethods)
        if (to_string(m) == name) return m;
    throw InvalidArgument("unknown augmentation method: " + std::string(name));
}

MatrixF tile(const MatrixF& m, std::size_t a, std::size_t b) {
    if (a == 0 || b == 0) throw InvalidArgument("tile counts must be >= 1");
    MatrixF out(m.rows() * a, m.cols() * b);
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = m(r % m.rows(), c % m.cols());
    return out;
}

MatrixF repeat_elements(const MatrixF& m, std::size_t a, std::size_t b) {
    if (a == 0 || b == 0) throw InvalidArgument("repeat counts must be >= 1");
    MatrixF out(m.rows() * a, m.cols() * b);
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = m(r / a, c / b);
    return out;
}

MatrixF flip(const MatrixF& m, Axis axis) {
    MatrixF out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c)
            out(r, c) = axis == Axis::LeftRight ? m(r, m.cols() - 1 - c) : m(m.rows() - 1 - r, c);
    return out;
}

MatrixF alternate_lr(const MatrixF& m, std::size_t blocks) {
    const MatrixF mirrored = flip(m, Axis::LeftRight);
    MatrixF out(m.rows(), m.cols() * blocks);
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) {
            const std::size_t block = c / m.cols();
            out(r, c) = (block % 2 == 0 ? m : mirrored)(r, c % m.cols());
        }
    return out;
}

MatrixF alternate_ud(const MatrixF& m, std::size_t blocks) {
    const MatrixF mirrored = flip(m, Axis::UpDown);
    MatrixF out(m.rows() * blocks, m.cols());
    for (std::size_t r = 0; r < out.rows(); ++r) {
        const std::size_t block = r / m.rows();
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = (block % 2 == 0 ? m : mirrored)(r % m.rows(), c);
    }
    return out;
}

MatrixF zero_pad(const MatrixF& m) {
    if (m.rows() != kDupRows || m.cols() != kDupCols)
        throw ShapeError("zero_pad expects a 210x217 matrix, got " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
    MatrixF out(kImageSize, kImageSize, 0.0f);
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out(r + kPadTop, c + kPadLeft) = m(r, c);
    return out;
}

MatrixF duplicate(const MatrixF& sdi, Method method) {
    if (sdi.rows() != sdi::kRows || sdi.cols() != sdi::kCols)
        throw ShapeError("augmentation expects a 15x31 SDI, got " + std::to_string(sdi.rows()) + "x" +
                         std::to_string(sdi.cols()));
    switch (method) {
        case Method::AllTile: return tile(sdi, kRowCopies, kColCopies);
        case Method::AllRepeat: return repeat_elements(sdi, kRowCopies, kColCopies);
        case Method::AllFlip: return alternate_ud(alternate_lr(sdi, kColCopies), kRowCopies);
        case Method::LrFlipTile: return tile(alternate_lr(sdi, kColCopies), kRowCopies, 1);
        case Method::LrFlipRepeat: return repeat_elements(alternate_lr(sdi, kColCopies), kRowCopies, 1);
        case Method::UdFlipTile: return tile(alternate_ud(sdi, kRowCopies), 1, kColCopies);
        case Method::UdFlipRepeat: return repeat_elements(alternate_ud(sdi, kRowCopies), 1, kColCopies);
    }
    throw InvalidArgument("unknown augmentation method");
}

MatrixF augment(const MatrixF& sdi_values, Method method) { return zero_pad(duplicate(sdi_values, method)); }

AugmentedImage augment(const sdi::SdiMatrix& sdi, Method method) {
    return {augment(sdi.values, method), method, sdi.label};
}

LayoutMap::LayoutMap(Method method) : method_(method) {
    // Indices up to 465 are exact in float; +1 keeps the padding's 0 distinct.
    MatrixF probe(sdi::kRows, sdi::kCols);
    for (std::size_t i = 0; i < probe.size(); ++i) probe.values()[i] = static_cast<float>(i + 1);
    const MatrixF image = augment(probe, method);
    source_.resize(image.size());
    for (std::size_t p = 0; p < image.size(); ++p) source_[p] = static_cast<std::int32_t>(image.values()[p]) - 1;
}

void LayoutMap::apply(std::span<const float> sdi_values, std::span<float> image) const {
    if (sdi_values.size() != sdi::kRows * sdi::kCols || image.size() != source_.size())
        throw ShapeError("layout map buffer size mismatch");
    for (std::size_t p = 0; p < source_.size(); ++p)
        image[p] = source_[p] < 0 ? 0.0f : sdi_values[static_cast<std::size_t>(source_[p])];
}

std::optional<std::size_t> LayoutMap::sdi_column(std::size_t col) const {
    if (col < kPadLeft || col >= kPadLeft + kDupCols) return std::nullopt;
    return static_cast<std::size_t>(source_[kPadTop * kImageSize + col]) % sdi::kCols;
}

std::optional<std::size_t> LayoutMap::sdi_row(std::size_t row) const {
    if (row < kPadTop || row >= kPadTop + kDupRows) return std::nullopt;
    return static_cast<std::size_t>(source_[row * kImageSize + kPadLeft]) / sdi::kCols;
}

const LayoutMap& layout_for(Method method) {
    static std::once_flag once;
    static std::vector<LayoutMap> maps;
    std::call_once(once, [] {
        for (Method m : kAllMethods) maps.emplace_back(m);
    });
    return maps.at(static_cast<std::size_t>(method));
}

namespace {
constexpr std::string_view kBatchBlob = "aug.bin";
constexpr std::size_t kPixels = kImageSize * kImageSize;
}  // namespace

void save_image_batch(std::span<const AugmentedImage> images, const std::string& dir) {
    fs::create_directories(dir);
    io::ByteWriter blob;
    std::array<std::size_t, 10> histogram{};
    nlohmann::json methods = nlohmann::json::array();
    for (const auto& img : images) {
        if (img.values.rows() != kImageSize || img.values.cols() != kImageSize)
            throw ShapeError("augmented image is not 224x224");
        blob.put_span(img.values.values());
        blob.put(img.label);
        histogram.at(img.label)++;
        methods.push_back(to_string(img.method));
    }
    nlohmann::json j{{"format", "FDC-AUG"},
                     {"version", 1},
                     {"count", images.size()},
                     {"rows", kImageSize},
                     {"cols", kImageSize},
                     {"methods", methods},
                     {"label_histogram", histogram},
                     {"blob", {{"file", kBatchBlob}, {"record", "f32le[224*224] row-major, u8 label"}}}};
    io::write_file((fs::path(dir) / kBatchBlob).string(), blob.bytes());
    io::write_text((fs::path(dir) / sdi::kManifestName).string(), j.dump(2) + "\n");
}

std::vector<AugmentedImage> load_image_batch(const std::string& dir) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file((fs::path(dir) / sdi::kManifestName).string()));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad batch manifest: ") + e.what());
    }
    if (j.value("format", "") != "FDC-AUG") throw FormatError("not an augmented image batch");
    const auto count = j.at("count").get<std::size_t>();
    const auto blob = io::read_file((fs::path(dir) / kBatchBlob).string());
    if (blob.size() != count * (kPixels * sizeof(float) + 1)) throw FormatError("batch blob size mismatch");
    std::vector<AugmentedImage> images(count);
    io::ByteReader r(blob);
    for (std::size_t i = 0; i < count; ++i) {
        images[i].values = MatrixF(kImageSize, kImageSize);
        r.get_into(images[i].values.values());
        images[i].label = r.get<std::uint8_t>();
        images[i].method = parse_method(j.at("methods").at(i).get<std::string>());
    }
    return images;
}

}  // namespace fdc::augment
