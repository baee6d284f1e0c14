#include "fdc/sdi.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "fdc/binary_io.hpp"
#include "fdc/errors.hpp"

namespace fdc::sdi {

namespace fs = std::filesystem;

std::span<const std::string_view> row_order() { return dynamics::channel_names(); }

std::size_t sample_index(const dynamics::SensorTrajectory& traj, double t) {
    return static_cast<std::size_t>(std::llround(t * traj.sample_rate));
}

MatrixD crop_and_downsample(const dynamics::SensorTrajectory& traj, double t) {
    const double start = t - kWindowSeconds;
    const bool in_range = start >= -1e-9 && traj.size() > 0 && sample_index(traj, t) < traj.size();
    if (!in_range) {
        std::ostringstream os;
        os << "window [" << start << ", " << t << "] s outside available span [0, " << traj.duration() << "] s";
        throw RangeError(os.str());
    }
    MatrixD raw(kRows, kCols);
    for (std::size_t k = 0; k < kCols; ++k) {
        const std::size_t s = sample_index(traj, start + static_cast<double>(k) * kColumnSpacing);
        for (std::size_t r = 0; r < kRows; ++r) raw(r, k) = traj.measured[s][r];
    }
    return raw;
}

MatrixF normalize_rows(const MatrixD& raw) {
    MatrixF out(raw.rows(), raw.cols());
    for (std::size_t r = 0; r < raw.rows(); ++r) {
        const auto row = raw.row(r);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (double v : row) {
            if (std::isnan(v)) throw InvalidArgument("NaN in SDI row " + std::to_string(r));
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double span = hi - lo;
        for (std::size_t c = 0; c < row.size(); ++c)
            out(r, c) = span > 0 ? static_cast<float>((row[c] - lo) / span) : 0.5f;
    }
    return out;
}

SdiMatrix stack_sdi(const dynamics::SensorTrajectory& traj, double t) {
    SdiMatrix m;
    m.values = normalize_rows(crop_and_downsample(traj, t));
    m.t_end = t;
    m.label = traj.labels.at(sample_index(traj, t));
    for (std::size_t k = 0; k < kCols; ++k)
        m.column_labels[k] =
            traj.labels[sample_index(traj, t - kWindowSeconds + static_cast<double>(k) * kColumnSpacing)];
    return m;
}

std::array<std::size_t, 10> SdiDataset::label_histogram() const {
    std::array<std::size_t, 10> h{};
    for (const auto& r : records) h.at(r.label)++;
    return h;
}

nlohmann::json manifest(const SdiDataset& ds) {
    nlohmann::json j;
    j["format"] = "FDC-SDI";
    j["version"] = 1;
    j["count"] = ds.size();
    j["rows"] = kRows;
    j["cols"] = kCols;
    j["row_order"] = std::vector<std::string>(row_order().begin(), row_order().end());
    j["label_histogram"] = ds.label_histogram();
    j["generator"] = ds.generator;
    j["blob"] = {{"file", kBlobName}, {"record", "f32le[15*31] row-major, u8 label"}};
    j["meta"] = {{"file", kMetaName}, {"record", "f64le t_end, u8[31] column labels"}};
    return j;
}

namespace {
constexpr std::size_t kValuesPerRecord = kRows * kCols;
constexpr std::size_t kBlobRecordBytes = kValuesPerRecord * sizeof(float) + 1;
constexpr std::size_t kMetaRecordBytes = sizeof(double) + kCols;
}  // namespace

void save_dataset(const SdiDataset& ds, const std::string& dir) {
    fs::create_directories(dir);
    io::ByteWriter blob, meta;
    for (const auto& r : ds.records) {
        if (r.values.rows() != kRows || r.values.cols() != kCols) throw ShapeError("SDI record is not 15x31");
        blob.put_span(r.values.values());
        blob.put(r.label);
        meta.put(r.t_end);
        meta.put_span(std::span<const std::uint8_t>(r.column_labels));
    }
    io::write_file((fs::path(dir) / kBlobName).string(), blob.bytes());
    io::write_file((fs::path(dir) / kMetaName).string(), meta.bytes());
    io::write_text((fs::path(dir) / kManifestName).string(), manifest(ds).dump(2) + "\n");
}

SdiDataset load_dataset(const std::string& dir) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file((fs::path(dir) / kManifestName).string()));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad dataset manifest: ") + e.what());
    }
    if (j.value("format", "") != "FDC-SDI") throw FormatError("not an SDI dataset manifest");
    const auto count = j.at("count").get<std::size_t>();
    const auto blob = io::read_file((fs::path(dir) / kBlobName).string());
    const auto meta = io::read_file((fs::path(dir) / kMetaName).string());
    if (blob.size() != count * kBlobRecordBytes || meta.size() != count * kMetaRecordBytes)
        throw FormatError("dataset blob size does not match manifest count");

    SdiDataset ds;
    ds.generator = j.value("generator", nlohmann::json::object());
    ds.records.resize(count);
    io::ByteReader br(blob), mr(meta);
    for (auto& r : ds.records) {
        br.get_into(r.values.values());
        r.label = br.get<std::uint8_t>();
        if (r.label >= 10) throw FormatError("label out of range in dataset blob");
        r.t_end = mr.get<double>();
        mr.get_into(std::span<std::uint8_t>(r.column_labels));
    }
    return ds;
}

std::string to_pgm(const MatrixF& image) {
    std::string out = "P5\n" + std::to_string(image.cols()) + " " + std::to_string(image.rows()) + "\n255\n";
    out.reserve(out.size() + image.size());
    for (float v : image.values()) {
        const double clamped = std::clamp(static_cast<double>(v), 0.0, 1.0);
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::min(255.0, std::floor(255.0 * clamped)))));
    }
    return out;
}

void write_pgm(const MatrixF& image, const std::string& path) { io::write_text(path, to_pgm(image)); }

}  // namespace fdc::sdi
