#include "fdc/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fdc/errors.hpp"
#include "fdc/nn/kernels.hpp"
#include "fdc/random.hpp"

namespace fdc::nn {

std::string to_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
    return s + "]";
}

std::string_view to_string(LayerKind k) {
    switch (k) {
        case LayerKind::Conv: return "conv";
        case LayerKind::Relu: return "relu";
        case LayerKind::MaxPool: return "maxpool";
        case LayerKind::Dense: return "dense";
    }
    return "unknown";
}

namespace {

LayerKind parse_kind(std::string_view s) {
    for (LayerKind k : {LayerKind::Conv, LayerKind::Relu, LayerKind::MaxPool, LayerKind::Dense})
        if (to_string(k) == s) return k;
    throw FormatError("unknown layer type: " + std::string(s));
}

std::string layer_label(std::size_t i, const LayerSpec& l) {
    return "layer " + std::to_string(i) + " (" + std::string(to_string(l.kind)) + ")";
}

}  // namespace

std::vector<FeatureShape> NetworkSpec::shapes() const {
    if (input.size() == 0) throw ShapeError(name + ": empty input shape");
    std::vector<FeatureShape> out{input};
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        FeatureShape cur = out.back();
        switch (l.kind) {
            case LayerKind::Conv:
                if (l.in != cur.channels || l.out == 0)
                    throw ShapeError(name + ": " + layer_label(i, l) + " expects " + std::to_string(l.in) +
                                     " input channels, previous layer gives " + std::to_string(cur.channels));
                cur.channels = l.out;
                break;
            case LayerKind::Relu: break;
            case LayerKind::MaxPool:
                if (cur.height < 2 || cur.width < 2)
                    throw ShapeError(name + ": " + layer_label(i, l) + " input smaller than 2x2");
                cur.height /= 2;
                cur.width /= 2;
                break;
            case LayerKind::Dense:
                if (l.in != cur.size() || l.out == 0)
                    throw ShapeError(name + ": " + layer_label(i, l) + " expects " + std::to_string(l.in) +
                                     " input features, previous layer gives " + std::to_string(cur.size()));
                cur = {l.out, 1, 1};
                break;
        }
        out.push_back(cur);
    }
    return out;
}

std::size_t NetworkSpec::classes() const {
    if (layers.empty() || layers.back().kind != LayerKind::Dense)
        throw ShapeError(name + ": network must end with a dense layer");
    return layers.back().out;
}

std::vector<std::size_t> NetworkSpec::conv_layers() const {
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].kind == LayerKind::Conv) v.push_back(i);
    return v;
}

std::vector<std::size_t> NetworkSpec::parametric_layers() const {
    std::vector<std::size_t> v;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].parametric()) v.push_back(i);
    return v;
}

nlohmann::json to_json(const NetworkSpec& spec) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : spec.layers) {
        nlohmann::json j{{"type", to_string(l.kind)}};
        if (l.parametric()) {
            j["in"] = l.in;
            j["out"] = l.out;
        }
        layers.push_back(j);
    }
    return {{"name", spec.name},
            {"input", {spec.input.channels, spec.input.height, spec.input.width}},
            {"layers", layers}};
}

NetworkSpec spec_from_json(const nlohmann::json& j) {
    try {
        NetworkSpec s;
        s.name = j.at("name").get<std::string>();
        const auto in = j.at("input").get<std::vector<std::size_t>>();
        if (in.size() != 3) throw FormatError("network input must be [channels, height, width]");
        s.input = {in[0], in[1], in[2]};
        for (const auto& lj : j.at("layers")) {
            LayerSpec l{parse_kind(lj.at("type").get<std::string>())};
            if (l.parametric()) {
                l.in = lj.at("in").get<std::size_t>();
                l.out = lj.at("out").get<std::size_t>();
            }
            s.layers.push_back(l);
        }
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad network spec: ") + e.what());
    }
}

NetworkSpec vgg16_fdc() {
    NetworkSpec s{"VGG16_FDC", {1, 224, 224}, {}};
    const std::vector<std::vector<std::size_t>> stages{
        {64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}};
    std::size_t ch = 1;
    for (const auto& stage : stages) {
        for (std::size_t w : stage) {
            s.layers.push_back({LayerKind::Conv, ch, w});
            s.layers.push_back({LayerKind::Relu});
            ch = w;
        }
        s.layers.push_back({LayerKind::MaxPool});
    }
    s.layers.push_back({LayerKind::Dense, 512 * 7 * 7, 4096});
    s.layers.push_back({LayerKind::Relu});
    s.layers.push_back({LayerKind::Dense, 4096, 4096});
    s.layers.push_back({LayerKind::Relu});
    s.layers.push_back({LayerKind::Dense, 4096, 10});
    return s;
}

NetworkSpec compact_fdc() {
    NetworkSpec s{"COMPACT_FDC", {1, 224, 224}, {}};
    s.layers.push_back({LayerKind::MaxPool});
    s.layers.push_back({LayerKind::MaxPool});
    std::size_t ch = 1;
    for (std::size_t w : {8, 16, 32}) {
        s.layers.push_back({LayerKind::Conv, ch, w});
        s.layers.push_back({LayerKind::Relu});
        s.layers.push_back({LayerKind::MaxPool});
        ch = w;
    }
    s.layers.push_back({LayerKind::Dense, 32 * 7 * 7, 64});
    s.layers.push_back({LayerKind::Relu});
    s.layers.push_back({LayerKind::Dense, 64, 10});
    return s;
}

NetworkSpec preset(std::string_view name) {
    if (name == "VGG16_FDC") return vgg16_fdc();
    if (name == "COMPACT_FDC") return compact_fdc();
    throw InvalidArgument("unknown network preset: " + std::string(name));
}

std::size_t param_count(const NetworkSpec& spec) {
    spec.validate();
    std::size_t n = 0;
    for (const auto& l : spec.layers) {
        if (l.kind == LayerKind::Conv) n += 9 * l.in * l.out + l.out;
        if (l.kind == LayerKind::Dense) n += l.in * l.out + l.out;
    }
    return n;
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits, std::size_t classes) {
    if (classes == 0 || logits.size() % classes) throw ShapeError("logit buffer is not a multiple of the class count");
    std::vector<T> p(logits.size());
    for (std::size_t n = 0; n < logits.size() / classes; ++n) {
        const T* z = logits.data() + n * classes;
        const double m = *std::max_element(z, z + classes);
        double sum = 0;
        for (std::size_t c = 0; c < classes; ++c) sum += std::exp(static_cast<double>(z[c]) - m);
        for (std::size_t c = 0; c < classes; ++c)
            p[n * classes + c] = static_cast<T>(std::exp(static_cast<double>(z[c]) - m) / sum);
    }
    return p;
}

template <typename T>
LossResult softmax_cross_entropy(std::span<const T> logits, std::span<const std::uint8_t> labels,
                                 std::size_t classes, std::span<T> grad) {
    const std::size_t batch = labels.size();
    if (batch == 0 || logits.size() != batch * classes) throw ShapeError("logits do not match labels");
    if (!grad.empty() && grad.size() != logits.size()) throw ShapeError("gradient buffer does not match logits");
    LossResult r;
    r.per_sample.resize(batch);
    for (std::size_t n = 0; n < batch; ++n) {
        if (labels[n] >= classes) throw RangeError("label " + std::to_string(labels[n]) + " outside [0, " +
                                                   std::to_string(classes) + ")");
        const T* z = logits.data() + n * classes;
        const double m = *std::max_element(z, z + classes);
        double sum = 0;
        for (std::size_t c = 0; c < classes; ++c) sum += std::exp(static_cast<double>(z[c]) - m);
        const double lse = m + std::log(sum);
        r.per_sample[n] = lse - static_cast<double>(z[labels[n]]);
        r.loss += r.per_sample[n];
        if (!grad.empty())
            for (std::size_t c = 0; c < classes; ++c) {
                const double p = std::exp(static_cast<double>(z[c]) - lse);
                grad[n * classes + c] = static_cast<T>((p - (c == labels[n] ? 1.0 : 0.0)) / static_cast<double>(batch));
            }
    }
    r.loss /= static_cast<double>(batch);
    return r;
}

template <typename T>
BasicNetwork<T>::BasicNetwork(NetworkSpec spec) : spec_(std::move(spec)), shapes_(spec_.shapes()) {
    (void)spec_.classes();
    params_.resize(spec_.layers.size());
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        const LayerSpec& l = spec_.layers[i];
        if (l.kind == LayerKind::Conv) params_[i].weight = Tensor<T>({l.out, l.in, 3, 3});
        if (l.kind == LayerKind::Dense) params_[i].weight = Tensor<T>({l.out, l.in});
        if (l.parametric()) params_[i].bias = Tensor<T>({l.out});
    }
    velocity_ = params_;
}

template <typename T>
void BasicNetwork<T>::initialize(std::uint64_t seed) {
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        const LayerSpec& l = spec_.layers[i];
        if (!l.parametric()) continue;
        const double fan_in = static_cast<double>(l.kind == LayerKind::Conv ? 9 * l.in : l.in);
        std::uniform_real_distribution<double> dist(-std::sqrt(6.0 / fan_in), std::sqrt(6.0 / fan_in));
        Rng rng(derive_seed(seed, i));
        for (T& w : params_[i].weight.values()) w = static_cast<T>(dist(rng));
        params_[i].bias.fill(T{0});
    }
    reset_velocity();
}

template <typename T>
void BasicNetwork<T>::reset_velocity() {
    for (auto& v : velocity_) {
        v.weight.fill(T{0});
        v.bias.fill(T{0});
    }
}

namespace {

// Kernel table so the layer loop does not branch on the backend everywhere.
template <typename T>
struct KernelSet {
    decltype(&kernels::reference::conv3x3_forward<T>) conv_fwd;
    decltype(&kernels::reference::conv3x3_backward_input<T>) conv_bwd_in;
    decltype(&kernels::reference::conv3x3_backward_params<T>) conv_bwd_params;
    decltype(&kernels::reference::maxpool2x2_forward<T>) pool_fwd;
    decltype(&kernels::reference::maxpool2x2_backward<T>) pool_bwd;
    decltype(&kernels::reference::dense_forward<T>) dense_fwd;
    decltype(&kernels::reference::dense_backward_input<T>) dense_bwd_in;
    decltype(&kernels::reference::dense_backward_params<T>) dense_bwd_params;
    decltype(&kernels::reference::relu_forward<T>) relu_fwd;
    decltype(&kernels::reference::relu_backward<T>) relu_bwd;
};

template <typename T>
KernelSet<T> kernel_set(Backend b) {
    namespace r = kernels::reference;
    namespace p = kernels::parallel;
    if (b == Backend::Reference)
        return {r::conv3x3_forward<T>,     r::conv3x3_backward_input<T>, r::conv3x3_backward_params<T>,
                r::maxpool2x2_forward<T>,  r::maxpool2x2_backward<T>,    r::dense_forward<T>,
                r::dense_backward_input<T>, r::dense_backward_params<T>, r::relu_forward<T>,
                r::relu_backward<T>};
    return {p::conv3x3_forward<T>,     p::conv3x3_backward_input<T>, p::conv3x3_backward_params<T>,
            p::maxpool2x2_forward<T>,  p::maxpool2x2_backward<T>,    p::dense_forward<T>,
            p::dense_backward_input<T>, p::dense_backward_params<T>, p::relu_forward<T>,
            p::relu_backward<T>};
}

}  // namespace

template <typename T>
Trace<T> BasicNetwork<T>::forward_from(std::size_t start, std::span<const T> input, std::size_t batch) const {
    const std::size_t L = spec_.layers.size();
    if (start > L) throw InvalidArgument("forward start past the last layer");
    if (batch == 0 || input.size() != batch * shapes_[start].size())
        throw ShapeError(spec_.name + ": input of " + std::to_string(input.size()) + " values does not match batch " +
                         std::to_string(batch) + " of shape " +
                         to_string(Shape{shapes_[start].channels, shapes_[start].height, shapes_[start].width}));
    const auto k = kernel_set<T>(backend_);
    Trace<T> t;
    t.batch = batch;
    t.start = start;
    t.activations.resize(L + 1);
    t.activations[start].assign(input.begin(), input.end());
    for (std::size_t l = start; l < L; ++l) {
        const LayerSpec& spec = spec_.layers[l];
        const FeatureShape& is = shapes_[l];
        std::span<const T> in = t.activations[l];
        auto& out = t.activations[l + 1];
        out.resize(batch * shapes_[l + 1].size());
        switch (spec.kind) {
            case LayerKind::Conv:
                k.conv_fwd(in, params_[l].weight.values(), params_[l].bias.values(), out,
                           {batch, spec.in, spec.out, is.height, is.width});
                break;
            case LayerKind::Relu: k.relu_fwd(in, out); break;
            case LayerKind::MaxPool: k.pool_fwd(in, out, {batch, is.channels, is.height, is.width}); break;
            case LayerKind::Dense:
                k.dense_fwd(in, params_[l].weight.values(), params_[l].bias.values(), out, {batch, spec.in, spec.out});
                break;
        }
    }
    return t;
}

template <typename T>
std::vector<T> BasicNetwork<T>::forward(std::span<const T> input, std::size_t batch) const {
    return std::move(forward_from(0, input, batch).activations.back());
}

template <typename T>
Gradients<T> BasicNetwork<T>::backward(const Trace<T>& trace, std::span<const T> grad_output,
                                       bool keep_activations) const {
    const std::size_t L = spec_.layers.size();
    const std::size_t batch = trace.batch;
    if (trace.activations.size() != L + 1) throw ShapeError("trace does not belong to this network");
    if (grad_output.size() != trace.activations[L].size()) throw ShapeError("output gradient size mismatch");
    const auto k = kernel_set<T>(backend_);
    Gradients<T> g;
    g.params.resize(L);
    if (keep_activations) g.activations.resize(L + 1);
    std::vector<T> upstream(grad_output.begin(), grad_output.end());
    std::vector<T> downstream;
    // Below the first parametric layer only activation gradients are left.
    std::size_t first_param = L;
    for (std::size_t l = trace.start; l < L; ++l)
        if (spec_.layers[l].parametric()) {
            first_param = l;
            break;
        }
    for (std::size_t l = L; l-- > trace.start;) {
        if (!keep_activations && l < first_param) break;
        const LayerSpec& spec = spec_.layers[l];
        const FeatureShape& is = shapes_[l];
        std::span<const T> in = trace.activations[l];
        const bool need_input_grad = l > first_param || keep_activations;
        if (keep_activations) g.activations[l + 1] = upstream;
        if (need_input_grad) downstream.assign(in.size(), T{0});
        switch (spec.kind) {
            case LayerKind::Conv: {
                const kernels::ConvShape cs{batch, spec.in, spec.out, is.height, is.width};
                g.params[l].weight = Tensor<T>(params_[l].weight.shape());
                g.params[l].bias = Tensor<T>(params_[l].bias.shape());
                k.conv_bwd_params(in, upstream, g.params[l].weight.values(), g.params[l].bias.values(), cs);
                if (need_input_grad) k.conv_bwd_in(upstream, params_[l].weight.values(), downstream, cs);
                break;
            }
            case LayerKind::Relu:
                if (need_input_grad) k.relu_bwd(in, upstream, downstream);
                break;
            case LayerKind::MaxPool:
                if (need_input_grad) k.pool_bwd(in, upstream, downstream, {batch, is.channels, is.height, is.width});
                break;
            case LayerKind::Dense: {
                const kernels::DenseShape ds{batch, spec.in, spec.out};
                g.params[l].weight = Tensor<T>(params_[l].weight.shape());
                g.params[l].bias = Tensor<T>(params_[l].bias.shape());
                k.dense_bwd_params(in, upstream, g.params[l].weight.values(), g.params[l].bias.values(), ds);
                if (need_input_grad) k.dense_bwd_in(upstream, params_[l].weight.values(), downstream, ds);
                break;
            }
        }
        if (need_input_grad) std::swap(upstream, downstream);
    }
    if (keep_activations) g.activations[trace.start] = std::move(upstream);
    return g;
}

template <typename T>
std::pair<LossResult, Gradients<T>> BasicNetwork<T>::loss_and_gradients(std::span<const T> input,
                                                                        std::span<const std::uint8_t> labels) const {
    const Trace<T> t = forward_trace(input, labels.size());
    std::vector<T> grad(t.activations.back().size());
    LossResult r = softmax_cross_entropy<T>(t.activations.back(), labels, spec_.classes(), grad);
    return {std::move(r), backward(t, grad)};
}

template <typename T>
void BasicNetwork<T>::sgd_step(const Gradients<T>& grads, double lr, double momentum) {
    if (grads.params.size() != params_.size()) throw ShapeError("gradient set does not match the network");
    const T mu = static_cast<T>(momentum), eta = static_cast<T>(lr);
    auto update = [&](Tensor<T>& w, Tensor<T>& v, const Tensor<T>& g) {
        if (g.size() != w.size()) throw ShapeError("gradient tensor does not match its parameter");
        for (std::size_t i = 0; i < w.size(); ++i) {
            v[i] = mu * v[i] + g[i];
            w[i] -= eta * v[i];
        }
    };
    for (std::size_t l = 0; l < params_.size(); ++l) {
        if (!spec_.layers[l].parametric()) continue;
        update(params_[l].weight, velocity_[l].weight, grads.params[l].weight);
        update(params_[l].bias, velocity_[l].bias, grads.params[l].bias);
    }
}

template <typename T>
template <typename U>
BasicNetwork<U> BasicNetwork<T>::cast() const {
    BasicNetwork<U> out;
    out.spec_ = spec_;
    out.shapes_ = shapes_;
    out.backend_ = backend_;
    auto convert = [](const std::vector<LayerParams<T>>& src) {
        std::vector<LayerParams<U>> dst(src.size());
        for (std::size_t i = 0; i < src.size(); ++i) {
            dst[i].weight = src[i].weight.template cast<U>();
            dst[i].bias = src[i].bias.template cast<U>();
        }
        return dst;
    };
    out.params_ = convert(params_);
    out.velocity_ = convert(velocity_);
    return out;
}

template <typename T>
bool BasicNetwork<T>::operator==(const BasicNetwork& o) const {
    auto same = [](const std::vector<LayerParams<T>>& a, const std::vector<LayerParams<T>>& b) {
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (!(a[i].weight == b[i].weight) || !(a[i].bias == b[i].bias)) return false;
        return true;
    };
    return spec_ == o.spec_ && same(params_, o.params_) && same(velocity_, o.velocity_);
}

ImageSet::ImageSet(FeatureShape shape, std::vector<float> pixels, std::vector<std::uint8_t> labels)
    : shape_(shape), pixels_(std::move(pixels)), labels_(std::move(labels)) {
    if (pixels_.size() != labels_.size() * shape_.size()) throw ShapeError("image set pixels do not match labels");
}

void ImageSet::fill(std::size_t i, std::span<float> image) const {
    if (i >= labels_.size() || image.size() != shape_.size()) throw ShapeError("image set fill out of range");
    std::copy_n(pixels_.begin() + static_cast<std::ptrdiff_t>(i * shape_.size()), shape_.size(), image.begin());
}

Subset::Subset(const LabeledImages& base, std::vector<std::size_t> indices)
    : base_(base), indices_(std::move(indices)) {
    for (std::size_t i : indices_)
        if (i >= base_.size()) throw RangeError("subset index " + std::to_string(i) + " out of range");
}

template <typename T>
void gather_batch(const LabeledImages& data, std::span<const std::size_t> indices, std::vector<T>& pixels,
                  std::vector<std::uint8_t>& labels) {
    const std::size_t px = data.shape().size();
    pixels.resize(indices.size() * px);
    labels.resize(indices.size());
    std::vector<float> scratch;
    for (std::size_t b = 0; b < indices.size(); ++b) {
        labels[b] = data.label(indices[b]);
        if constexpr (std::is_same_v<T, float>) {
            data.fill(indices[b], std::span<float>(pixels.data() + b * px, px));
        } else {
            scratch.resize(px);
            data.fill(indices[b], scratch);
            std::copy(scratch.begin(), scratch.end(), pixels.begin() + static_cast<std::ptrdiff_t>(b * px));
        }
    }
}

void TrainConfig::validate() const {
    if (!(lr > 0) || !std::isfinite(lr)) throw InvalidArgument("learning rate must be > 0");
    if (!(momentum >= 0 && momentum < 1)) throw InvalidArgument("momentum must lie in [0, 1)");
    if (batch == 0) throw InvalidArgument("batch size must be >= 1");
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"lr", c.lr}, {"momentum", c.momentum}, {"batch", c.batch}, {"epochs", c.epochs}, {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
    c.lr = j.value("lr", c.lr);
    c.momentum = j.value("momentum", c.momentum);
    c.batch = j.value("batch", c.batch);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

nlohmann::json to_json(const History& h) {
    nlohmann::json a = nlohmann::json::array();
    for (std::size_t e = 0; e < h.epochs.size(); ++e) {
        nlohmann::json j{{"epoch", e + 1}, {"loss", h.epochs[e].loss}, {"train_accuracy", h.epochs[e].train_accuracy}};
        if (h.epochs[e].test_accuracy) j["test_accuracy"] = *h.epochs[e].test_accuracy;
        a.push_back(j);
    }
    return a;
}

std::vector<double> Evaluation::recall() const {
    std::vector<double> r(confusion.rows());
    for (std::size_t c = 0; c < confusion.rows(); ++c) {
        std::uint64_t total = 0;
        for (auto v : confusion.row(c)) total += v;
        r[c] = total ? 100.0 * static_cast<double>(confusion(c, c)) / static_cast<double>(total)
                     : std::numeric_limits<double>::quiet_NaN();
    }
    return r;
}

namespace {

template <typename T>
std::size_t argmax(const T* z, std::size_t n) {
    return static_cast<std::size_t>(std::max_element(z, z + n) - z);
}

}  // namespace

template <typename T>
Evaluation evaluate(const BasicNetwork<T>& net, const LabeledImages& data, std::size_t batch) {
    if (data.size() == 0) throw InvalidArgument("cannot evaluate on an empty dataset");
    if (batch == 0) throw InvalidArgument("batch size must be >= 1");
    const std::size_t classes = net.spec().classes();
    Evaluation ev{0, Matrix<std::uint64_t>(classes, classes, 0)};
    std::vector<T> pixels;
    std::vector<std::uint8_t> labels;
    std::vector<std::size_t> idx;
    std::uint64_t correct = 0;
    for (std::size_t b = 0; b < data.size(); b += batch) {
        idx.resize(std::min(batch, data.size() - b));
        std::iota(idx.begin(), idx.end(), b);
        gather_batch(data, idx, pixels, labels);
        const std::vector<T> logits = net.forward(pixels, idx.size());
        for (std::size_t n = 0; n < idx.size(); ++n) {
            const std::size_t pred = argmax(logits.data() + n * classes, classes);
            if (labels[n] >= classes) throw RangeError("label outside the class range");
            ev.confusion(labels[n], pred)++;
            correct += pred == labels[n];
        }
    }
    ev.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
    return ev;
}

template <typename T>
History train(BasicNetwork<T>& net, const LabeledImages& data, const TrainConfig& config, const LabeledImages* test) {
    config.validate();
    if (data.size() == 0) throw InvalidArgument("cannot train on an empty dataset");
    const std::size_t classes = net.spec().classes();
    std::vector<std::size_t> order(data.size());
    std::vector<T> pixels, grad;
    std::vector<std::uint8_t> labels;
    History h;
    for (std::size_t e = 0; e < config.epochs; ++e) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed(config.seed, e));
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0;
        std::size_t correct = 0;
        for (std::size_t b = 0; b < order.size(); b += config.batch) {
            const std::size_t n = std::min(config.batch, order.size() - b);
            gather_batch(data, std::span<const std::size_t>(order.data() + b, n), pixels, labels);
            const Trace<T> t = net.forward_trace(pixels, n);
            const auto& logits = t.activations.back();
            grad.resize(logits.size());
            const LossResult r = softmax_cross_entropy<T>(logits, labels, classes, grad);
            loss_sum += r.loss * static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) correct += argmax(logits.data() + i * classes, classes) == labels[i];
            net.sgd_step(net.backward(t, grad), config.lr, config.momentum);
        }
        EpochStats s;
        s.loss = loss_sum / static_cast<double>(data.size());
        s.train_accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
        if (test) s.test_accuracy = evaluate(net, *test, config.batch).accuracy;
        h.epochs.push_back(s);
    }
    return h;
}

#define FDC_INSTANTIATE(T)                                                                                        \
    template class BasicNetwork<T>;                                                                               \
    template std::vector<T> softmax<T>(std::span<const T>, std::size_t);                                          \
    template LossResult softmax_cross_entropy<T>(std::span<const T>, std::span<const std::uint8_t>, std::size_t, \
                                                 std::span<T>);                                                   \
    template void gather_batch<T>(const LabeledImages&, std::span<const std::size_t>, std::vector<T>&,           \
                                  std::vector<std::uint8_t>&);                                                    \
    template Evaluation evaluate<T>(const BasicNetwork<T>&, const LabeledImages&, std::size_t);                   \
    template History train<T>(BasicNetwork<T>&, const LabeledImages&, const TrainConfig&, const LabeledImages*);

FDC_INSTANTIATE(float)
FDC_INSTANTIATE(double)

template BasicNetwork<double> BasicNetwork<float>::cast<double>() const;
template BasicNetwork<float> BasicNetwork<double>::cast<float>() const;

}  // namespace fdc::nn
