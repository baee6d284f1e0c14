#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "fdc/nn/network.hpp"

// Structured filter pruning of the conv layers.
namespace fdc::prune {

struct FilterScore {
    std::size_t layer = 0;  // index into NetworkSpec::layers
    std::size_t filter = 0;
    double score = 0;
};

enum class Method { Taylor, Random, L1Unstructured, L2Structured };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);

struct TaylorOptions {
    std::size_t batch = 100;
    double loss_scale = 1.0;  // multiplies the cost; raw scores scale with it
    bool normalize = true;    // per-layer L2 normalization
};

// Theta = |mean over the map of (dC/dz) z| per example, averaged over all
// examples. z is the rectified output of each conv layer and C the
// per-example cross-entropy.
std::vector<FilterScore> taylor_scores(const nn::Network& net, const nn::LabeledImages& data,
                                       const TaylorOptions& options = {});

// random: U[0,1) per filter; l2_structured: filter weight L2 norm;
// l1_unstructured: mean |w| over the filter's weights.
std::vector<FilterScore> baseline_scores(const nn::Network& net, Method method, std::uint64_t seed,
                                         bool normalize = true);

// Divides each layer's scores by their L2 norm (layers with zero norm are left alone).
void normalize_per_layer(std::vector<FilterScore>& scores);

// Removes the given filters (layer index -> filter indices) and the matching
// input slices of the next parametric layer. Momentum buffers are reset.
nn::Network remove_filters(const nn::Network& net, std::span<const FilterScore> victims);

// Picks the `count` globally lowest scores, never emptying a layer.
std::vector<FilterScore> select_victims(const nn::Network& net, std::span<const FilterScore> scores,
                                        std::size_t count);

std::size_t filter_total(const nn::NetworkSpec& spec);

// Removes floor(fraction * total) filters. Throws InvalidArgument for
// fraction outside (0, 1) or when the removal cannot keep one filter per layer.
nn::Network prune_filters(const nn::Network& net, std::span<const FilterScore> scores, double fraction);

struct ModelMetrics {
    std::size_t params = 0;
    std::size_t bytes = 0;
    double latency_ms = 0;  // median single-image forward time
    double accuracy = 0;    // %
};

nlohmann::json to_json(const ModelMetrics& m);

ModelMetrics measure_model(const nn::Network& net, const nn::LabeledImages& samples, std::size_t repetitions = 30);

double relative_change(double before, double after);

struct LoopConfig {
    std::size_t iterations = 10;
    double per_iter_fraction = 0.05;  // of the original filter total
    std::size_t finetune_epochs = 2;
    Method method = Method::Taylor;
    std::size_t score_samples = 500;  // training samples used for scoring
    nn::TrainConfig train;
    std::uint64_t seed = 0;
};

nlohmann::json to_json(const LoopConfig& c);
LoopConfig loop_config_from_json(const nlohmann::json& j, LoopConfig defaults = {});

struct PruneReport {
    std::string method;
    ModelMetrics before, after;
    std::vector<std::size_t> filters_before;  // per conv layer
    std::vector<std::size_t> removed;         // per conv layer
    std::vector<double> accuracy_per_iteration;
};

// Table 5 shaped report. Latency is wall-clock and excluded when
// include_timing is false, which keeps the file reproducible.
nlohmann::json to_json(const PruneReport& r, bool include_timing = true);

struct LoopResult {
    nn::Network model;
    PruneReport report;
};

// score -> prune -> fine-tune, `iterations` times. Iteration k brings the
// cumulative removal to floor(k * per_iter_fraction * original total).
LoopResult prune_finetune_loop(const nn::Network& net, const nn::LabeledImages& train,
                               const nn::LabeledImages& test, const LoopConfig& config);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace fdc::prune
