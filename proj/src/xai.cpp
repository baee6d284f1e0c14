#include "fdc/xai.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "fdc/binary_io.hpp"
#include "fdc/errors.hpp"

namespace fdc::xai {

template <typename T>
CamHeatmap grad_cam(const nn::BasicNetwork<T>& net, std::span<const T> image, std::size_t cls, std::size_t conv) {
    const auto& spec = net.spec();
    const auto convs = spec.conv_layers();
    if (conv == 0 || conv > convs.size())
        throw InvalidArgument("conv layer " + std::to_string(conv) + " does not exist; network has " +
                              std::to_string(convs.size()));
    if (cls >= spec.classes()) throw RangeError("class " + std::to_string(cls) + " out of range");
    const std::size_t l = convs[conv - 1];
    const std::size_t a = l + 1 < spec.layers.size() && spec.layers[l + 1].kind == nn::LayerKind::Relu ? l + 2 : l + 1;

    const auto trace = net.forward_trace(image, 1);
    std::vector<T> seed(spec.classes(), T{0});
    seed[cls] = T{1};
    const auto grads = net.backward(trace, seed, true);

    const nn::FeatureShape fs = net.shapes()[a];
    const std::size_t M = fs.height * fs.width;
    const auto& A = trace.activations[a];
    const auto& dA = grads.activations[a];
    CamHeatmap cam{conv, l, cls, std::vector<double>(fs.channels, 0.0), MatrixD(fs.height, fs.width, 0.0), {}};
    for (std::size_t k = 0; k < fs.channels; ++k) {
        double s = 0;
        for (std::size_t m = 0; m < M; ++m) s += static_cast<double>(dA[k * M + m]);
        cam.alpha[k] = s / static_cast<double>(M);
    }
    for (std::size_t m = 0; m < M; ++m) {
        double v = 0;
        for (std::size_t k = 0; k < fs.channels; ++k) v += cam.alpha[k] * static_cast<double>(A[k * M + m]);
        cam.raw.values()[m] = std::max(v, 0.0);
    }
    cam.upsampled = upsample_nearest(cam.raw, spec.input.height, spec.input.width);
    return cam;
}

template CamHeatmap grad_cam<float>(const nn::BasicNetwork<float>&, std::span<const float>, std::size_t, std::size_t);
template CamHeatmap grad_cam<double>(const nn::BasicNetwork<double>&, std::span<const double>, std::size_t,
                                     std::size_t);

MatrixD upsample_nearest(const MatrixD& m, std::size_t rows, std::size_t cols) {
    if (m.rows() == 0 || m.cols() == 0) throw ShapeError("cannot upsample an empty map");
    MatrixD out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out(i, j) = m(i * m.rows() / rows, j * m.cols() / cols);
    return out;
}

MatrixF overlay(const MatrixD& upsampled, const MatrixF& image) {
    if (upsampled.rows() != image.rows() || upsampled.cols() != image.cols())
        throw ShapeError("heatmap and image sizes differ");
    const auto vals = upsampled.values();
    const double mx = vals.empty() ? 0.0 : *std::max_element(vals.begin(), vals.end());
    if (!(mx > 0)) return image;
    MatrixF out(image.rows(), image.cols());
    for (std::size_t i = 0; i < out.size(); ++i)
        out.values()[i] = static_cast<float>(0.5 * image.values()[i] + 0.5 * vals[i] / mx);
    return out;
}

namespace {

MatrixF scaled_to_unit(const MatrixD& m) {
    const auto vals = m.values();
    const double mx = *std::max_element(vals.begin(), vals.end());
    MatrixF out(m.rows(), m.cols(), 0.0f);
    if (mx > 0)
        for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = static_cast<float>(vals[i] / mx);
    return out;
}

}  // namespace

void export_overlay(const CamHeatmap& cam, const MatrixF& image, const std::string& prefix,
                    std::optional<double> overlap) {
    const std::filesystem::path p(prefix);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    sdi::write_pgm(scaled_to_unit(cam.upsampled), prefix + "_map.pgm");
    sdi::write_pgm(overlay(cam.upsampled, image), prefix + "_overlay.pgm");
    std::ostringstream csv;
    csv.precision(17);
    for (std::size_t r = 0; r < cam.raw.rows(); ++r) {
        for (std::size_t c = 0; c < cam.raw.cols(); ++c) csv << (c ? "," : "") << cam.raw(r, c);
        csv << "\n";
    }
    io::write_text(prefix + "_raw.csv", csv.str());
    nlohmann::json j{{"layer", cam.conv}, {"class", cam.cls}, {"alpha", cam.alpha},
                     {"raw_rows", cam.raw.rows()}, {"raw_cols", cam.raw.cols()}};
    j["overlap"] = overlap ? nlohmann::json(*overlap) : nlohmann::json(nullptr);
    io::write_text(prefix + ".json", j.dump(2) + "\n");
}

std::vector<bool> fault_image_columns(const augment::LayoutMap& layout, const std::vector<bool>& fault_columns) {
    if (fault_columns.size() != sdi::kCols) throw ShapeError("fault span must have one flag per SDI column");
    if (std::none_of(fault_columns.begin(), fault_columns.end(), [](bool b) { return b; }))
        throw InvalidArgument("no fault span: attention overlap is undefined for healthy samples");
    std::vector<bool> cols(augment::kImageSize, false);
    for (std::size_t c = 0; c < cols.size(); ++c)
        if (const auto s = layout.sdi_column(c)) cols[c] = fault_columns[*s];
    return cols;
}

double attention_overlap(const MatrixD& upsampled, const augment::LayoutMap& layout,
                         const std::vector<bool>& fault_columns) {
    if (upsampled.cols() != augment::kImageSize || upsampled.rows() != augment::kImageSize)
        throw ShapeError("attention overlap needs a 224x224 map");
    const auto in_span = fault_image_columns(layout, fault_columns);
    std::vector<double> sorted(upsampled.values().begin(), upsampled.values().end());
    const std::size_t k = (sorted.size() + 9) / 10;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end(),
                     std::greater<>());
    const double threshold = sorted[k - 1];
    std::size_t hot = 0, inside = 0;
    for (std::size_t r = 0; r < upsampled.rows(); ++r)
        for (std::size_t c = 0; c < upsampled.cols(); ++c) {
            const double v = upsampled(r, c);
            if (v >= threshold && v > 0) {
                ++hot;
                inside += in_span[c];
            }
        }
    if (hot == 0) throw InvalidArgument("heatmap has no positive pixels; no hottest decile");
    return static_cast<double>(inside) / static_cast<double>(hot);
}

double fault_area_share(const augment::LayoutMap& layout, const std::vector<bool>& fault_columns) {
    const auto cols = fault_image_columns(layout, fault_columns);
    return static_cast<double>(std::count(cols.begin(), cols.end(), true)) / static_cast<double>(cols.size());
}

std::vector<bool> fault_columns(const sdi::SdiMatrix& sdi) {
    std::vector<bool> v(sdi::kCols);
    for (std::size_t c = 0; c < sdi::kCols; ++c) v[c] = sdi.column_labels[c] != 0;
    return v;
}

std::vector<std::size_t> default_layers(const nn::NetworkSpec& spec) {
    const std::size_t n = spec.conv_layers().size();
    std::vector<std::size_t> out;
    if (n >= 13) return {1, 2, 6, 10, 13};
    for (std::size_t i = 1; i <= n; ++i) out.push_back(i);
    return out;
}

}  // namespace fdc::xai
