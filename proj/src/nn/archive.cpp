#include "fdc/nn/archive.hpp"

#include <cstring>

#include "fdc/binary_io.hpp"
#include "fdc/errors.hpp"

namespace fdc::nn {

namespace {

constexpr char kMagic[4] = {'F', 'D', 'C', 'W'};

std::size_t element_size(std::uint8_t dtype) {
    switch (dtype) {
        case kDtypeF32: return 4;
        case kDtypeU8: return 1;
    }
    throw FormatError("unknown tensor dtype tag " + std::to_string(dtype));
}

std::size_t payload_count(const ArchiveTensor& t) { return t.dtype == kDtypeF32 ? t.f32.size() : t.u8.size(); }

}  // namespace

std::vector<std::uint8_t> encode_archive(std::span<const ArchiveTensor> tensors) {
    io::ByteWriter w;
    w.put_raw(std::string_view(kMagic, 4));
    w.put(kArchiveVersion);
    w.put(static_cast<std::uint32_t>(tensors.size()));
    std::vector<std::size_t> offset_slots;
    for (const auto& t : tensors) {
        element_size(t.dtype);
        if (payload_count(t) != element_count(t.dims))
            throw ShapeError("tensor " + t.name + " payload does not match dims " + to_string(t.dims));
        if (t.dims.size() > 0xFF) throw InvalidArgument("tensor rank too large");
        w.put_string16(t.name);
        w.put(static_cast<std::uint8_t>(t.dims.size()));
        for (std::size_t d : t.dims) {
            if (d > 0xFFFFFFFFu) throw InvalidArgument("tensor dimension exceeds u32");
            w.put(static_cast<std::uint32_t>(d));
        }
        w.put(t.dtype);
        offset_slots.push_back(w.size());
        w.put(std::uint64_t{0});
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        w.patch(offset_slots[i], static_cast<std::uint64_t>(w.size()));
        if (tensors[i].dtype == kDtypeF32)
            w.put_span<float>(tensors[i].f32);
        else
            w.put_span<std::uint8_t>(tensors[i].u8);
    }
    return w.take();
}

std::vector<ArchiveTensor> decode_archive(std::span<const std::uint8_t> bytes) {
    io::ByteReader r(bytes);
    if (r.get_raw(4) != std::string_view(kMagic, 4)) throw FormatError("not an FDCW weight archive (bad magic)");
    const auto version = r.get<std::uint32_t>();
    if (version != kArchiveVersion)
        throw FormatError("unsupported weight archive version " + std::to_string(version));
    const auto count = r.get<std::uint32_t>();
    std::vector<ArchiveTensor> out;
    std::vector<std::uint64_t> offsets;
    for (std::uint32_t i = 0; i < count; ++i) {
        ArchiveTensor t;
        t.name = r.get_string16();
        const auto rank = r.get<std::uint8_t>();
        for (std::uint8_t d = 0; d < rank; ++d) t.dims.push_back(r.get<std::uint32_t>());
        t.dtype = r.get<std::uint8_t>();
        element_size(t.dtype);
        offsets.push_back(r.get<std::uint64_t>());
        out.push_back(std::move(t));
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto& t = out[i];
        const std::size_t n = element_count(t.dims);
        const std::size_t len = n * element_size(t.dtype);
        if (offsets[i] > bytes.size() || bytes.size() - offsets[i] < len)
            throw FormatError("truncated container: tensor " + t.name + " runs past the end of the archive");
        r.seek(offsets[i]);
        if (t.dtype == kDtypeF32) {
            t.f32.resize(n);
            r.get_into<float>(t.f32);
        } else {
            t.u8.resize(n);
            r.get_into<std::uint8_t>(t.u8);
        }
    }
    return out;
}

std::vector<std::string> parameter_names(const NetworkSpec& spec) {
    std::vector<std::string> names;
    std::size_t conv = 0, fc = 0;
    for (const auto& l : spec.layers) {
        if (!l.parametric()) continue;
        const std::string base = l.kind == LayerKind::Conv ? "conv" + std::to_string(++conv) : "fc" + std::to_string(++fc);
        names.push_back(base + ".weight");
        names.push_back(base + ".bias");
    }
    return names;
}

std::vector<std::uint8_t> serialize_weights(const Network& net) {
    std::vector<ArchiveTensor> tensors;
    const std::string spec_json = to_json(net.spec()).dump();
    ArchiveTensor s{std::string(kSpecTensor), {spec_json.size()}, kDtypeU8, {}, {}};
    s.u8.assign(spec_json.begin(), spec_json.end());
    tensors.push_back(std::move(s));
    const auto names = parameter_names(net.spec());
    std::size_t k = 0;
    for (std::size_t l : net.spec().parametric_layers()) {
        const auto& p = net.params()[l];
        for (const Tensor<float>* t : {&p.weight, &p.bias}) {
            ArchiveTensor a{names[k++], t->shape(), kDtypeF32, {}, {}};
            a.f32.assign(t->values().begin(), t->values().end());
            tensors.push_back(std::move(a));
        }
    }
    return encode_archive(tensors);
}

Network deserialize_weights(std::span<const std::uint8_t> bytes) {
    const auto tensors = decode_archive(bytes);
    for (const auto& t : tensors)
        if (t.name == kSpecTensor && t.dtype == kDtypeU8) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(t.u8.begin(), t.u8.end());
            } catch (const nlohmann::json::exception& e) {
                throw FormatError(std::string("bad embedded network spec: ") + e.what());
            }
            return load_weights_into(spec_from_json(j), bytes);
        }
    throw FormatError("weight archive has no embedded network spec; use load_weights_into");
}

void save_weights(const Network& net, const std::string& path) { io::write_file(path, serialize_weights(net)); }

Network load_weights(const std::string& path) { return deserialize_weights(io::read_file(path)); }

Network load_weights_into(const NetworkSpec& spec, std::span<const std::uint8_t> bytes) {
    const auto tensors = decode_archive(bytes);
    std::vector<const ArchiveTensor*> params;
    for (const auto& t : tensors)
        if (t.name != kSpecTensor) params.push_back(&t);
    const auto names = parameter_names(spec);
    if (params.size() != names.size())
        throw ShapeError("archive holds " + std::to_string(params.size()) + " parameter tensors, network " + spec.name +
                         " needs " + std::to_string(names.size()));
    Network net(spec);
    std::size_t k = 0;
    for (std::size_t l : spec.parametric_layers()) {
        for (Tensor<float>* dst : {&net.params()[l].weight, &net.params()[l].bias}) {
            const ArchiveTensor& src = *params[k];
            if (src.dtype != kDtypeF32) throw FormatError("tensor " + src.name + " is not f32");
            const Shape& want = dst->shape();
            const bool rgb_first_conv = dst->rank() == 4 && want[1] == 1 && src.dims.size() == 4 &&
                                        src.dims[0] == want[0] && src.dims[1] == 3 && src.dims[2] == 3 &&
                                        src.dims[3] == 3 && l == spec.conv_layers().front();
            if (rgb_first_conv) {
                // out x 3 x 3 x 3 -> out x 1 x 3 x 3 by channel mean.
                for (std::size_t o = 0; o < want[0]; ++o)
                    for (std::size_t i = 0; i < 9; ++i)
                        (*dst)[o * 9 + i] =
                            (src.f32[(o * 3 + 0) * 9 + i] + src.f32[(o * 3 + 1) * 9 + i] + src.f32[(o * 3 + 2) * 9 + i]) /
                            3.0f;
            } else {
                if (src.dims != want)
                    throw ShapeError("tensor " + src.name + " has shape " + to_string(src.dims) + ", " + names[k] +
                                     " of " + spec.name + " needs " + to_string(want));
                std::copy(src.f32.begin(), src.f32.end(), dst->values().begin());
            }
            ++k;
        }
    }
    return net;
}

Network load_weights_into(const NetworkSpec& spec, const std::string& path) {
    return load_weights_into(spec, io::read_file(path));
}

}  // namespace fdc::nn
