#include "fdc/prune.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>

#include "fdc/errors.hpp"
#include "fdc/nn/archive.hpp"
#include "fdc/random.hpp"

namespace fdc::prune {

using nn::LayerKind;

std::string_view to_string(Method m) {
    switch (m) {
        case Method::Taylor: return "taylor";
        case Method::Random: return "random";
        case Method::L1Unstructured: return "l1_unstructured";
        case Method::L2Structured: return "l2_structured";
    }
    return "unknown";
}

Method parse_method(std::string_view name) {
    for (Method m : {Method::Taylor, Method::Random, Method::L1Unstructured, Method::L2Structured})
        if (to_string(m) == name) return m;
    throw InvalidArgument("unknown pruning method: " + std::string(name));
}

namespace {

// Activation index holding the rectified output of conv layer l.
std::size_t feature_map_index(const nn::NetworkSpec& spec, std::size_t l) {
    return l + 1 < spec.layers.size() && spec.layers[l + 1].kind == LayerKind::Relu ? l + 2 : l + 1;
}

}  // namespace

void normalize_per_layer(std::vector<FilterScore>& scores) {
    std::map<std::size_t, double> norm;
    for (const auto& s : scores) norm[s.layer] += s.score * s.score;
    for (auto& s : scores) {
        const double n = std::sqrt(norm[s.layer]);
        if (n > 0) s.score /= n;
    }
}

std::vector<FilterScore> taylor_scores(const nn::Network& net, const nn::LabeledImages& data,
                                       const TaylorOptions& options) {
    if (data.size() == 0) throw InvalidArgument("taylor scoring needs at least one sample");
    if (options.batch == 0) throw InvalidArgument("batch size must be >= 1");
    const auto& spec = net.spec();
    const auto convs = spec.conv_layers();
    const auto shapes = net.shapes();
    std::vector<std::vector<double>> sums(convs.size());
    for (std::size_t c = 0; c < convs.size(); ++c) sums[c].assign(spec.layers[convs[c]].out, 0.0);

    std::vector<float> pixels, grad;
    std::vector<std::uint8_t> labels;
    std::vector<std::size_t> idx;
    for (std::size_t b = 0; b < data.size(); b += options.batch) {
        idx.resize(std::min(options.batch, data.size() - b));
        std::iota(idx.begin(), idx.end(), b);
        nn::gather_batch(data, idx, pixels, labels);
        const std::size_t n = idx.size();
        const auto trace = net.forward_trace(pixels, n);
        grad.resize(trace.activations.back().size());
        nn::softmax_cross_entropy<float>(trace.activations.back(), labels, spec.classes(), grad);
        const auto g = net.backward(trace, grad, true);
        // The batch loss is a mean; per-example gradients are n times larger.
        const double per_example = static_cast<double>(n) * options.loss_scale;
        for (std::size_t c = 0; c < convs.size(); ++c) {
            const std::size_t a = feature_map_index(spec, convs[c]);
            const std::size_t K = shapes[a].channels, M = shapes[a].height * shapes[a].width;
            const auto& z = trace.activations[a];
            const auto& dz = g.activations[a];
            for (std::size_t s = 0; s < n; ++s)
                for (std::size_t k = 0; k < K; ++k) {
                    const std::size_t off = (s * K + k) * M;
                    double acc = 0;
                    for (std::size_t m = 0; m < M; ++m)
                        acc += static_cast<double>(dz[off + m]) * static_cast<double>(z[off + m]);
                    sums[c][k] += std::abs(acc * per_example / static_cast<double>(M));
                }
        }
    }
    std::vector<FilterScore> out;
    for (std::size_t c = 0; c < convs.size(); ++c)
        for (std::size_t k = 0; k < sums[c].size(); ++k)
            out.push_back({convs[c], k, sums[c][k] / static_cast<double>(data.size())});
    if (options.normalize) normalize_per_layer(out);
    return out;
}

std::vector<FilterScore> baseline_scores(const nn::Network& net, Method method, std::uint64_t seed, bool normalize) {
    if (method == Method::Taylor) throw InvalidArgument("taylor scores need data; use taylor_scores");
    std::vector<FilterScore> out;
    Rng rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (std::size_t l : net.spec().conv_layers()) {
        const auto& w = net.params()[l].weight;
        const std::size_t per = w.size() / w.dim(0);
        for (std::size_t f = 0; f < w.dim(0); ++f) {
            double s = 0;
            if (method == Method::Random) {
                s = uniform(rng);
            } else {
                for (std::size_t i = 0; i < per; ++i) {
                    const double v = w[f * per + i];
                    s += method == Method::L2Structured ? v * v : std::abs(v);
                }
                s = method == Method::L2Structured ? std::sqrt(s) : s / static_cast<double>(per);
            }
            out.push_back({l, f, s});
        }
    }
    if (normalize) normalize_per_layer(out);
    return out;
}

std::size_t filter_total(const nn::NetworkSpec& spec) {
    std::size_t n = 0;
    for (std::size_t l : spec.conv_layers()) n += spec.layers[l].out;
    return n;
}

nn::Network remove_filters(const nn::Network& net, std::span<const FilterScore> victims) {
    const auto& spec = net.spec();
    std::map<std::size_t, std::vector<bool>> drop;
    for (const auto& v : victims) {
        if (v.layer >= spec.layers.size() || spec.layers[v.layer].kind != LayerKind::Conv ||
            v.filter >= spec.layers[v.layer].out)
            throw InvalidArgument("no conv filter " + std::to_string(v.filter) + " in layer " + std::to_string(v.layer));
        auto& d = drop[v.layer];
        d.resize(spec.layers[v.layer].out, false);
        d[v.filter] = true;
    }
    auto kept = [&](std::size_t layer, std::size_t n) {
        std::vector<std::size_t> k;
        const auto it = drop.find(layer);
        for (std::size_t i = 0; i < n; ++i)
            if (it == drop.end() || !it->second[i]) k.push_back(i);
        return k;
    };

    nn::NetworkSpec ns = spec;
    const auto shapes = net.shapes();
    // Output channels kept for each layer that feeds the next parametric one.
    std::vector<std::size_t> in_keep;  // channels entering the current layer
    bool in_pruned = false;
    std::size_t in_channels = spec.input.channels;
    std::vector<std::vector<std::size_t>> keep_out(spec.layers.size()), keep_in(spec.layers.size());
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const auto& layer = spec.layers[l];
        if (layer.kind == LayerKind::Conv) {
            keep_in[l] = in_pruned ? in_keep : kept(SIZE_MAX, layer.in);
            keep_out[l] = kept(l, layer.out);
            if (keep_out[l].empty()) throw InvalidArgument("pruning would empty conv layer " + std::to_string(l));
            ns.layers[l].in = keep_in[l].size();
            ns.layers[l].out = keep_out[l].size();
            in_keep = keep_out[l];
            in_pruned = true;
            in_channels = layer.out;
        } else if (layer.kind == LayerKind::Dense) {
            if (in_pruned && shapes[l].channels == in_channels && in_keep.size() != in_channels) {
                const std::size_t hw = shapes[l].height * shapes[l].width;
                for (std::size_t c : in_keep)
                    for (std::size_t j = 0; j < hw; ++j) keep_in[l].push_back(c * hw + j);
            } else {
                keep_in[l] = kept(SIZE_MAX, layer.in);
            }
            keep_out[l] = kept(SIZE_MAX, layer.out);
            ns.layers[l].in = keep_in[l].size();
            in_pruned = false;
            in_channels = layer.out;
        }
    }
    nn::Network out(ns);
    out.set_backend(net.backend());
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        if (!spec.layers[l].parametric()) continue;
        const auto& src = net.params()[l];
        auto& dst = out.params()[l];
        const std::size_t old_in = spec.layers[l].in;
        const std::size_t taps = spec.layers[l].kind == LayerKind::Conv ? 9 : 1;
        for (std::size_t a = 0; a < keep_out[l].size(); ++a) {
            const std::size_t o = keep_out[l][a];
            dst.bias[a] = src.bias[o];
            for (std::size_t b = 0; b < keep_in[l].size(); ++b) {
                const std::size_t i = keep_in[l][b];
                for (std::size_t t = 0; t < taps; ++t)
                    dst.weight[(a * keep_in[l].size() + b) * taps + t] = src.weight[(o * old_in + i) * taps + t];
            }
        }
    }
    return out;
}

std::vector<FilterScore> select_victims(const nn::Network& net, std::span<const FilterScore> scores,
                                        std::size_t count) {
    const auto& spec = net.spec();
    const auto convs = spec.conv_layers();
    std::map<std::size_t, std::size_t> remaining;
    for (std::size_t l : convs) remaining[l] = spec.layers[l].out;
    if (scores.size() != filter_total(spec)) throw InvalidArgument("scores do not cover every conv filter");
    if (count > filter_total(spec) - convs.size())
        throw InvalidArgument("removing " + std::to_string(count) + " of " + std::to_string(filter_total(spec)) +
                              " filters would empty a conv layer");
    std::vector<FilterScore> order(scores.begin(), scores.end());
    for (const auto& s : order)
        if (!remaining.count(s.layer) || !std::isfinite(s.score)) throw InvalidArgument("invalid filter score");
    std::stable_sort(order.begin(), order.end(), [](const FilterScore& a, const FilterScore& b) {
        if (a.score != b.score) return a.score < b.score;
        if (a.layer != b.layer) return a.layer < b.layer;
        return a.filter < b.filter;
    });
    std::vector<FilterScore> victims;
    for (const auto& s : order) {
        if (victims.size() == count) break;
        if (remaining[s.layer] <= 1) continue;
        --remaining[s.layer];
        victims.push_back(s);
    }
    return victims;
}

nn::Network prune_filters(const nn::Network& net, std::span<const FilterScore> scores, double fraction) {
    if (!(fraction > 0 && fraction < 1)) throw InvalidArgument("pruning fraction must lie in (0, 1)");
    const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(filter_total(net.spec()))));
    return remove_filters(net, select_victims(net, scores, count));
}

nlohmann::json to_json(const ModelMetrics& m) {
    return {{"params", m.params}, {"bytes", m.bytes}, {"latency_ms", m.latency_ms}, {"accuracy", m.accuracy}};
}

ModelMetrics measure_model(const nn::Network& net, const nn::LabeledImages& samples, std::size_t repetitions) {
    if (repetitions < 30) throw InvalidArgument("latency needs at least 30 repetitions");
    ModelMetrics m;
    m.params = nn::param_count(net.spec());
    m.bytes = nn::serialize_weights(net).size();
    std::vector<float> image(samples.shape().size());
    samples.fill(0, image);
    (void)net.forward(image, 1);
    std::vector<double> ms;
    for (std::size_t r = 0; r < repetitions; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto logits = net.forward(image, 1);
        const auto t1 = std::chrono::steady_clock::now();
        ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    std::sort(ms.begin(), ms.end());
    m.latency_ms = ms.size() % 2 ? ms[ms.size() / 2] : 0.5 * (ms[ms.size() / 2 - 1] + ms[ms.size() / 2]);
    m.accuracy = nn::evaluate(net, samples).accuracy;
    return m;
}

double relative_change(double before, double after) {
    if (before == 0) throw InvalidArgument("relative change from zero");
    return (after - before) / before;
}

nlohmann::json to_json(const LoopConfig& c) {
    return {{"iterations", c.iterations},     {"per_iter_fraction", c.per_iter_fraction},
            {"finetune_epochs", c.finetune_epochs}, {"method", to_string(c.method)},
            {"score_samples", c.score_samples}, {"train", nn::to_json(c.train)},
            {"seed", c.seed}};
}

LoopConfig loop_config_from_json(const nlohmann::json& j, LoopConfig c) {
    c.iterations = j.value("iterations", c.iterations);
    c.per_iter_fraction = j.value("per_iter_fraction", c.per_iter_fraction);
    c.finetune_epochs = j.value("finetune_epochs", c.finetune_epochs);
    if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
    c.score_samples = j.value("score_samples", c.score_samples);
    if (j.contains("train")) c.train = nn::train_config_from_json(j.at("train"), c.train);
    c.seed = j.value("seed", c.seed);
    if (!(c.per_iter_fraction > 0 && c.per_iter_fraction < 1))
        throw InvalidArgument("per_iter_fraction must lie in (0, 1)");
    return c;
}

nlohmann::json to_json(const PruneReport& r, bool include_timing) {
    auto row = [](std::string_view metric, double before, double after) {
        return nlohmann::json{{"metric", metric},
                              {"before", before},
                              {"after", after},
                              {"relative_change", relative_change(before, after)}};
    };
    nlohmann::json rows = nlohmann::json::array();
    rows.push_back(row("parameters", static_cast<double>(r.before.params), static_cast<double>(r.after.params)));
    rows.push_back(row("size_bytes", static_cast<double>(r.before.bytes), static_cast<double>(r.after.bytes)));
    if (include_timing) rows.push_back(row("latency_ms", r.before.latency_ms, r.after.latency_ms));
    nlohmann::json acc{{"metric", "accuracy"}, {"before", r.before.accuracy}, {"after", r.after.accuracy},
                       {"change_points", r.after.accuracy - r.before.accuracy}};
    rows.push_back(acc);
    return {{"method", r.method},
            {"rows", rows},
            {"filters_before", r.filters_before},
            {"removed_per_layer", r.removed},
            {"accuracy_per_iteration", r.accuracy_per_iteration}};
}

LoopResult prune_finetune_loop(const nn::Network& net, const nn::LabeledImages& train, const nn::LabeledImages& test,
                               const LoopConfig& config) {
    config.train.validate();
    LoopResult res{net, {}};
    res.report.method = std::string(to_string(config.method));
    res.report.before = measure_model(net, test);
    for (std::size_t l : net.spec().conv_layers()) res.report.filters_before.push_back(net.spec().layers[l].out);
    const double original = static_cast<double>(filter_total(net.spec()));
    std::size_t removed = 0;
    std::vector<std::size_t> score_idx(std::min(config.score_samples, train.size()));
    std::iota(score_idx.begin(), score_idx.end(), std::size_t{0});
    const nn::Subset score_set(train, score_idx);
    for (std::size_t it = 0; it < config.iterations; ++it) {
        const auto target = static_cast<std::size_t>(
            std::floor(static_cast<double>(it + 1) * config.per_iter_fraction * original + 1e-9));
        const std::size_t count = target - std::min(target, removed);
        if (count > 0) {
            const auto scores = config.method == Method::Taylor
                                    ? taylor_scores(res.model, score_set)
                                    : baseline_scores(res.model, config.method, derive_seed(config.seed, it));
            res.model = remove_filters(res.model, select_victims(res.model, scores, count));
            removed += count;
        }
        nn::TrainConfig tc = config.train;
        tc.epochs = config.finetune_epochs;
        tc.seed = derive_seed(config.seed, 100 + it);
        nn::train(res.model, train, tc);
        res.report.accuracy_per_iteration.push_back(nn::evaluate(res.model, test).accuracy);
    }
    res.report.after = measure_model(res.model, test);
    std::size_t k = 0;
    for (std::size_t l : res.model.spec().conv_layers())
        res.report.removed.push_back(res.report.filters_before[k++] - res.model.spec().layers[l].out);
    return res;
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw InvalidArgument("spearman needs two equal-length samples");
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n, mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0 || sbb == 0) throw InvalidArgument("spearman undefined for constant input");
    return sab / std::sqrt(saa * sbb);
}

}  // namespace fdc::prune
