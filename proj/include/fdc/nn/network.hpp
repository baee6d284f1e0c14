#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fdc/matrix.hpp"
#include "fdc/nn/tensor.hpp"

namespace fdc::nn {

enum class LayerKind { Conv, Relu, MaxPool, Dense };

std::string_view to_string(LayerKind k);

// Conv: in/out are channels of a 3x3, stride 1, pad 1 convolution.
// Dense: in/out are features; its input is the flattened previous activation.
struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    std::size_t in = 0;
    std::size_t out = 0;

    bool parametric() const noexcept { return kind == LayerKind::Conv || kind == LayerKind::Dense; }
    bool operator==(const LayerSpec&) const = default;
};

// Per-sample activation shape; dense outputs use height = width = 1.
struct FeatureShape {
    std::size_t channels = 0, height = 0, width = 0;
    std::size_t size() const noexcept { return channels * height * width; }
    bool operator==(const FeatureShape&) const = default;
};

struct NetworkSpec {
    std::string name;
    FeatureShape input{1, 224, 224};
    std::vector<LayerSpec> layers;

    // Output shape of every layer, preceded by the input shape. Throws
    // ShapeError naming the first layer that does not chain.
    std::vector<FeatureShape> shapes() const;
    void validate() const { (void)shapes(); }
    std::size_t classes() const;
    // Layer indices of the conv layers, in order.
    std::vector<std::size_t> conv_layers() const;
    std::vector<std::size_t> parametric_layers() const;

    bool operator==(const NetworkSpec&) const = default;
};

nlohmann::json to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& j);

// 13 conv layers in 5 stages, dense 4096-4096-10, 1x224x224 input.
NetworkSpec vgg16_fdc();
// Desk-scale variant: two leading pools bring the image to 56x56, then
// conv 8/16/32 each followed by a pool, dense 64-10.
NetworkSpec compact_fdc();
NetworkSpec preset(std::string_view name);

std::size_t param_count(const NetworkSpec& spec);

enum class Backend { Reference, Parallel };

template <typename T>
struct LayerParams {
    Tensor<T> weight;  // conv: out x in x 3 x 3, dense: out x in
    Tensor<T> bias;    // out
};

template <typename T>
struct Trace {
    std::size_t batch = 0;
    std::size_t start = 0;                  // first layer evaluated
    std::vector<std::vector<T>> activations;  // [l] is the input of layer l; back() is the output
};

template <typename T>
struct Gradients {
    std::vector<LayerParams<T>> params;         // empty tensors for parameter-free layers
    std::vector<std::vector<T>> activations;    // d/d(activation l), when requested
};

struct LossResult {
    double loss = 0;
    std::vector<double> per_sample;
};

// Mean softmax cross-entropy over the batch. grad (optional) receives
// (softmax - onehot) / batch. Throws RangeError for labels outside [0, classes).
template <typename T>
LossResult softmax_cross_entropy(std::span<const T> logits, std::span<const std::uint8_t> labels,
                                 std::size_t classes, std::span<T> grad = {});

template <typename T>
std::vector<T> softmax(std::span<const T> logits, std::size_t classes);

template <typename T>
class BasicNetwork {
public:
    BasicNetwork() = default;
    // Zero weights and biases.
    explicit BasicNetwork(NetworkSpec spec);

    // Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases.
    void initialize(std::uint64_t seed);

    const NetworkSpec& spec() const noexcept { return spec_; }
    std::span<const FeatureShape> shapes() const noexcept { return shapes_; }
    std::vector<LayerParams<T>>& params() noexcept { return params_; }
    const std::vector<LayerParams<T>>& params() const noexcept { return params_; }
    std::vector<LayerParams<T>>& velocity() noexcept { return velocity_; }
    const std::vector<LayerParams<T>>& velocity() const noexcept { return velocity_; }

    Backend backend() const noexcept { return backend_; }
    void set_backend(Backend b) noexcept { backend_ = b; }

    // Runs layers [start, L) on `input`, which must have the shape of
    // activation `start` for `batch` samples.
    Trace<T> forward_from(std::size_t start, std::span<const T> input, std::size_t batch) const;
    Trace<T> forward_trace(std::span<const T> input, std::size_t batch) const { return forward_from(0, input, batch); }
    std::vector<T> forward(std::span<const T> input, std::size_t batch) const;

    // Backpropagates d(objective)/d(output) through the traced layers.
    Gradients<T> backward(const Trace<T>& trace, std::span<const T> grad_output, bool keep_activations = false) const;

    // Mean cross-entropy and full parameter gradients for one batch.
    std::pair<LossResult, Gradients<T>> loss_and_gradients(std::span<const T> input,
                                                           std::span<const std::uint8_t> labels) const;

    // Classical momentum: v = mu v + g; w -= lr v.
    void sgd_step(const Gradients<T>& grads, double lr, double momentum);
    void reset_velocity();

    template <typename U>
    BasicNetwork<U> cast() const;

    bool operator==(const BasicNetwork& o) const;

private:
    template <typename U>
    friend class BasicNetwork;

    NetworkSpec spec_;
    std::vector<FeatureShape> shapes_;
    std::vector<LayerParams<T>> params_;
    std::vector<LayerParams<T>> velocity_;
    Backend backend_ = Backend::Parallel;
};

using Network = BasicNetwork<float>;
using NetworkD = BasicNetwork<double>;

// Source of labeled 1-channel images; the training loop pulls samples by index.
class LabeledImages {
public:
    virtual ~LabeledImages() = default;
    virtual std::size_t size() const = 0;
    virtual std::uint8_t label(std::size_t i) const = 0;
    virtual FeatureShape shape() const = 0;
    virtual void fill(std::size_t i, std::span<float> image) const = 0;
};

// Images held in memory.
class ImageSet final : public LabeledImages {
public:
    ImageSet(FeatureShape shape, std::vector<float> pixels, std::vector<std::uint8_t> labels);
    std::size_t size() const override { return labels_.size(); }
    std::uint8_t label(std::size_t i) const override { return labels_.at(i); }
    FeatureShape shape() const override { return shape_; }
    void fill(std::size_t i, std::span<float> image) const override;

private:
    FeatureShape shape_;
    std::vector<float> pixels_;
    std::vector<std::uint8_t> labels_;
};

// Index view onto another set.
class Subset final : public LabeledImages {
public:
    Subset(const LabeledImages& base, std::vector<std::size_t> indices);
    std::size_t size() const override { return indices_.size(); }
    std::uint8_t label(std::size_t i) const override { return base_.label(indices_.at(i)); }
    FeatureShape shape() const override { return base_.shape(); }
    void fill(std::size_t i, std::span<float> image) const override { base_.fill(indices_.at(i), image); }
    std::span<const std::size_t> indices() const noexcept { return indices_; }

private:
    const LabeledImages& base_;
    std::vector<std::size_t> indices_;
};

// Gathers a batch of images into a contiguous NCHW buffer.
template <typename T>
void gather_batch(const LabeledImages& data, std::span<const std::size_t> indices, std::vector<T>& pixels,
                  std::vector<std::uint8_t>& labels);

struct TrainConfig {
    double lr = 1e-4;
    double momentum = 0.90;
    std::size_t batch = 100;
    std::size_t epochs = 30;
    std::uint64_t seed = 0;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig defaults = {});

struct EpochStats {
    double loss = 0;            // mean over samples
    double train_accuracy = 0;  // % of training samples classified correctly during the epoch
    std::optional<double> test_accuracy;
};

struct History {
    std::vector<EpochStats> epochs;
};

nlohmann::json to_json(const History& h);

struct Evaluation {
    double accuracy = 0;  // %
    Matrix<std::uint64_t> confusion;  // row = true label, column = prediction
    std::vector<double> recall() const;  // per class, %; NaN for absent classes
};

template <typename T>
Evaluation evaluate(const BasicNetwork<T>& net, const LabeledImages& data, std::size_t batch = 100);

// Seeded mini-batch SGD. Epoch e shuffles with derive_seed(seed, e). When
// `test` is given, its accuracy is recorded after every epoch.
template <typename T>
History train(BasicNetwork<T>& net, const LabeledImages& data, const TrainConfig& config,
              const LabeledImages* test = nullptr);

}  // namespace fdc::nn
