#include "fdc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "fdc/binary_io.hpp"
#include "fdc/errors.hpp"
#include "fdc/nn/archive.hpp"
#include "fdc/random.hpp"
#include "fdc/xai.hpp"

namespace fdc::harness {

namespace fs = std::filesystem;

void ExperimentConfig::validate() const {
    if (folds < 2) throw InvalidArgument("k-fold needs k >= 2");
    if (data.size < folds) throw InvalidArgument("dataset size must be at least the fold count");
    if (!(data.dt > 0) || data.dt > 0.05) throw InvalidArgument("dt must lie in (0, 0.05] s");
    if (data.trajectory_seconds < sdi::kWindowSeconds + 1) throw InvalidArgument("trajectories shorter than one window");
    if (!(data.stride_seconds > 0)) throw InvalidArgument("stride must be positive");
    train.validate();
    (void)nn::preset(network);
}

nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json presets = nlohmann::json::array();
    for (auto p : c.data.presets) presets.push_back(dynamics::to_string(p));
    return {{"data",
             {{"size", c.data.size},
              {"trajectory_seconds", c.data.trajectory_seconds},
              {"dt", c.data.dt},
              {"stride_seconds", c.data.stride_seconds},
              {"case_weights", c.data.case_weights},
              {"presets", presets},
              {"noise", c.data.noise}}},
            {"method", augment::to_string(c.method)},
            {"network", c.network},
            {"train", nn::to_json(c.train)},
            {"folds", c.folds},
            {"data_seed", c.data_seed},
            {"fold_seed", c.fold_seed},
            {"init_seed", c.init_seed},
            {"prune", prune::to_json(c.prune)},
            {"cam_samples", c.cam_samples},
            {"out_dir", c.out_dir}};
}

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig c) {
    try {
        if (j.contains("data")) {
            const auto& d = j.at("data");
            c.data.size = d.value("size", c.data.size);
            c.data.trajectory_seconds = d.value("trajectory_seconds", c.data.trajectory_seconds);
            c.data.dt = d.value("dt", c.data.dt);
            c.data.stride_seconds = d.value("stride_seconds", c.data.stride_seconds);
            if (d.contains("case_weights")) c.data.case_weights = d.at("case_weights").get<faults::CaseWeights>();
            if (d.contains("presets")) {
                c.data.presets.clear();
                for (const auto& p : d.at("presets")) c.data.presets.push_back(dynamics::parse_profile_preset(p.get<std::string>()));
            }
            c.data.noise = d.value("noise", c.data.noise);
        }
        if (j.contains("method")) c.method = augment::parse_method(j.at("method").get<std::string>());
        c.network = j.value("network", c.network);
        if (j.contains("train")) c.train = nn::train_config_from_json(j.at("train"), c.train);
        c.folds = j.value("folds", c.folds);
        c.data_seed = j.value("data_seed", c.data_seed);
        c.fold_seed = j.value("fold_seed", c.fold_seed);
        c.init_seed = j.value("init_seed", c.init_seed);
        if (j.contains("prune")) c.prune = prune::loop_config_from_json(j.at("prune"), c.prune);
        c.cam_samples = j.value("cam_samples", c.cam_samples);
        c.out_dir = j.value("out_dir", c.out_dir);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad experiment config: ") + e.what());
    }
    c.validate();
    return c;
}

void reseed(ExperimentConfig& c, std::uint64_t seed) {
    c.data_seed = derive_seed(seed, 1);
    c.fold_seed = derive_seed(seed, 2);
    c.init_seed = derive_seed(seed, 3);
    c.train.seed = derive_seed(seed, 4);
    c.prune.seed = derive_seed(seed, 5);
}

sdi::SdiDataset gen_dataset(const DataConfig& config, std::uint64_t seed) {
    std::vector<dynamics::ProfilePreset> presets = config.presets;
    if (presets.empty()) {
        const auto all = dynamics::flight_condition_presets();
        presets.assign(all.begin(), all.end());
    }
    sdi::SdiDataset ds;
    std::size_t flights = 0, skipped = 0;
    const std::size_t max_flights = 64 + 4 * config.size;  // guards against an envelope that always fails
    while (ds.size() < config.size) {
        if (flights >= max_flights) throw RangeError("could not generate enough in-envelope flights");
        const std::size_t f = flights++;
        const auto preset = presets[f % presets.size()];
        dynamics::SensorTrajectory traj;
        faults::FaultSchedule schedule;
        try {
            const auto profile = dynamics::make_profile(preset, derive_seed(seed, 4 * f));
            traj = dynamics::simulate_trajectory(profile, config.dt, config.trajectory_seconds, derive_seed(seed, 4 * f + 1));
        } catch (const SingularityError&) {
            ++skipped;
            continue;
        } catch (const RangeError&) {
            ++skipped;
            continue;
        }
        if (config.noise) traj = dynamics::add_measurement_noise(std::move(traj), {}, derive_seed(seed, 4 * f + 2));
        schedule = faults::sample_schedule(traj.duration(), derive_seed(seed, 4 * f + 3), config.case_weights);
        traj = faults::apply_faults(std::move(traj), schedule, derive_seed(derive_seed(seed, 4 * f + 3), 1));
        for (double t = sdi::kWindowSeconds; t <= traj.duration() + 1e-9 && ds.size() < config.size;
             t += config.stride_seconds)
            ds.records.push_back(sdi::stack_sdi(traj, t));
    }
    nlohmann::json presets_json = nlohmann::json::array();
    for (auto p : presets) presets_json.push_back(dynamics::to_string(p));
    ds.generator = {{"seed", seed},
                    {"size", config.size},
                    {"trajectory_seconds", config.trajectory_seconds},
                    {"dt", config.dt},
                    {"stride_seconds", config.stride_seconds},
                    {"case_weights", config.case_weights},
                    {"presets", presets_json},
                    {"noise", config.noise},
                    {"flights", flights},
                    {"skipped_flights", skipped}};
    return ds;
}

SdiImages::SdiImages(const sdi::SdiDataset& data, augment::Method method)
    : data_(data), layout_(augment::layout_for(method)) {}

void SdiImages::fill(std::size_t i, std::span<float> image) const {
    layout_.apply(data_.records.at(i).values.values(), image);
}

std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k == 0 || n < k) throw InvalidArgument("k-fold needs n >= k >= 1 (n = " + std::to_string(n) +
                                               ", k = " + std::to_string(k) + ")");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<std::size_t>> folds(k);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t len = n / k + (f < n % k ? 1 : 0);
        folds[f].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos), perm.begin() + static_cast<std::ptrdiff_t>(pos + len));
        std::sort(folds[f].begin(), folds[f].end());
        pos += len;
    }
    return folds;
}

std::vector<std::size_t> training_indices(const std::vector<std::vector<std::size_t>>& folds, std::size_t f) {
    std::vector<std::size_t> train;
    for (std::size_t g = 0; g < folds.size(); ++g)
        if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
    std::sort(train.begin(), train.end());
    std::vector<std::size_t> shared;
    std::set_intersection(train.begin(), train.end(), folds.at(f).begin(), folds.at(f).end(), std::back_inserter(shared));
    if (!shared.empty()) throw Error("test-set leakage: fold " + std::to_string(f) + " shares indices with training");
    return train;
}

double mean(std::span<const double> v) {
    if (v.empty()) throw InvalidArgument("mean of an empty set");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
    if (v.size() < 2) throw InvalidArgument("sample STD needs at least two values");
    const double m = mean(v);
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

namespace {

nlohmann::json matrix_json(const Matrix<std::uint64_t>& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(std::vector<std::uint64_t>(m.row(r).begin(), m.row(r).end()));
    return rows;
}

Matrix<std::uint64_t> matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.get<std::vector<std::vector<std::uint64_t>>>();
    Matrix<std::uint64_t> m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols()) throw FormatError("ragged confusion matrix");
        std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
    }
    return m;
}

}  // namespace

nlohmann::json to_json(const FoldReport& r) {
    nlohmann::json conf = nlohmann::json::array(), hist = nlohmann::json::array();
    for (const auto& c : r.confusions) conf.push_back(matrix_json(c));
    for (const auto& h : r.histories) hist.push_back(nn::to_json(h));
    return {{"method", r.method}, {"fold_accuracies", r.accuracies}, {"mean", r.mean}, {"std", r.std},
            {"std_convention", "sample (n-1)"}, {"confusions", conf}, {"histories", hist}, {"folds", r.folds}};
}

FoldReport fold_report_from_json(const nlohmann::json& j) {
    try {
        FoldReport r;
        r.method = j.at("method").get<std::string>();
        r.accuracies = j.at("fold_accuracies").get<std::vector<double>>();
        r.mean = j.at("mean").get<double>();
        r.std = j.at("std").get<double>();
        for (const auto& c : j.at("confusions")) r.confusions.push_back(matrix_from_json(c));
        for (const auto& h : j.at("histories")) {
            nn::History hist;
            for (const auto& e : h) {
                nn::EpochStats s{e.at("loss").get<double>(), e.at("train_accuracy").get<double>(), std::nullopt};
                if (e.contains("test_accuracy")) s.test_accuracy = e.at("test_accuracy").get<double>();
                hist.epochs.push_back(s);
            }
            r.histories.push_back(hist);
        }
        r.folds = j.at("folds").get<std::vector<std::vector<std::size_t>>>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad fold report: ") + e.what());
    }
}

void check_aggregates(const FoldReport& r) {
    if (std::abs(mean(r.accuracies) - r.mean) > 1e-9 || std::abs(sample_std(r.accuracies) - r.std) > 1e-9)
        throw FormatError("stored mean/STD do not match the fold accuracies");
}

ExperimentResult run_experiment(const ExperimentConfig& config, const sdi::SdiDataset& data) {
    config.validate();
    if (data.size() < config.folds) throw InvalidArgument("dataset smaller than the fold count");
    const SdiImages images(data, config.method);
    ExperimentResult res;
    res.report.method = std::string(augment::to_string(config.method));
    res.report.folds = kfold_split(data.size(), config.folds, config.fold_seed);
    for (std::size_t f = 0; f < config.folds; ++f) {
        const nn::Subset test(images, res.report.folds[f]);
        const nn::Subset train(images, training_indices(res.report.folds, f));
        nn::Network net(nn::preset(config.network));
        net.initialize(derive_seed(config.init_seed, f));
        nn::TrainConfig tc = config.train;
        tc.seed = derive_seed(config.train.seed, f);
        nn::History h = nn::train(net, train, tc, &test);
        std::vector<double> tail;
        for (std::size_t e = h.epochs.size() - std::min<std::size_t>(5, h.epochs.size()); e < h.epochs.size(); ++e)
            tail.push_back(*h.epochs[e].test_accuracy);
        res.report.accuracies.push_back(tail.empty() ? nn::evaluate(net, test).accuracy : mean(tail));
        res.report.confusions.push_back(nn::evaluate(net, test).confusion);
        res.report.histories.push_back(std::move(h));
        res.models.push_back(std::move(net));
    }
    res.report.mean = mean(res.report.accuracies);
    res.report.std = sample_std(res.report.accuracies);
    return res;
}

std::vector<FoldReport> compare_augmentations(const ExperimentConfig& config, const sdi::SdiDataset& data) {
    std::vector<FoldReport> rows;
    for (auto m : augment::kAllMethods) {
        ExperimentConfig c = config;
        c.method = m;
        rows.push_back(run_experiment(c, data).report);
    }
    return rows;
}

std::string table_csv(std::span<const FoldReport> rows) {
    std::ostringstream s;
    s.precision(10);
    const std::size_t k = rows.empty() ? 0 : rows[0].accuracies.size();
    s << "method";
    for (std::size_t f = 1; f <= k; ++f) s << ",fold" << f;
    s << ",mean,std\n";
    for (const auto& r : rows) {
        s << r.method;
        for (double a : r.accuracies) s << "," << a;
        s << "," << r.mean << "," << r.std << "\n";
    }
    return s.str();
}

nlohmann::json table_json(std::span<const FoldReport> rows) {
    nlohmann::json t = nlohmann::json::array();
    bool same_folds = true;
    for (const auto& r : rows) {
        t.push_back({{"method", r.method}, {"fold_accuracies", r.accuracies}, {"mean", r.mean}, {"std", r.std}});
        same_folds = same_folds && r.folds == rows[0].folds;
    }
    return {{"rows", t}, {"identical_folds", same_folds}, {"std_convention", "sample (n-1)"}};
}

std::string confusion_csv(const Matrix<std::uint64_t>& m) {
    std::ostringstream s;
    s << "true\\pred";
    for (std::size_t c = 0; c < m.cols(); ++c) s << "," << c;
    s << "\n";
    for (std::size_t r = 0; r < m.rows(); ++r) {
        s << r;
        for (auto v : m.row(r)) s << "," << v;
        s << "\n";
    }
    return s.str();
}

nlohmann::json evaluation_json(const nn::Evaluation& ev) {
    nlohmann::json recall = nlohmann::json::array();
    for (double r : ev.recall()) recall.push_back(std::isnan(r) ? nlohmann::json(nullptr) : nlohmann::json(r));
    return {{"accuracy", ev.accuracy}, {"confusion", matrix_json(ev.confusion)}, {"recall", recall}};
}

void write_json(const std::string& path, const nlohmann::json& j) { io::write_text(path, j.dump(2) + "\n"); }

CamSummary cam_study(const nn::Network& net, const sdi::SdiDataset& data, std::span<const std::size_t> indices,
                     augment::Method method, std::size_t max_samples, std::size_t conv) {
    const auto& layout = augment::layout_for(method);
    if (conv == 0) conv = net.spec().conv_layers().size();
    CamSummary s;
    std::vector<float> image(augment::kImageSize * augment::kImageSize);
    for (std::size_t i : indices) {
        if (s.count >= max_samples) break;
        const auto& rec = data.records.at(i);
        if (rec.label == 0) continue;
        const auto span = xai::fault_columns(rec);
        layout.apply(rec.values.values(), image);
        const auto cam = xai::grad_cam<float>(net, image, rec.label, conv);
        const double share = xai::fault_area_share(layout, span);
        double overlap = 0;  // a map with no positive pixel points nowhere
        try {
            overlap = xai::attention_overlap(cam.upsampled, layout, span);
        } catch (const InvalidArgument&) {
        }
        s.overlaps.push_back(overlap);
        s.shares.push_back(share);
        ++s.count;
    }
    if (s.count) {
        s.overlap = mean(s.overlaps);
        s.area_share = mean(s.shares);
    }
    return s;
}

PipelineResult run_pipeline(const ExperimentConfig& config) {
    config.validate();
    const fs::path out(config.out_dir);
    fs::create_directories(out);
    write_json((out / "config.json").string(), to_json(config));

    const auto data = gen_dataset(config.data, config.data_seed);
    sdi::save_dataset(data, (out / "dataset").string());

    PipelineResult res;
    auto exp = run_experiment(config, data);
    res.cv = exp.report;
    write_json((out / "cv_report.json").string(), to_json(res.cv));
    io::write_text((out / "cv_report.csv").string(), table_csv(std::span(&res.cv, 1)));
    nn::save_weights(exp.models[0], (out / "fold1.fdcw").string());

    const SdiImages images(data, config.method);
    const nn::Subset test(images, res.cv.folds[0]);
    const nn::Subset train(images, training_indices(res.cv.folds, 0));

    const CamSummary cam = cam_study(exp.models[0], data, res.cv.folds[0], config.method, config.cam_samples);
    res.cam_overlap = cam.overlap;
    res.cam_area_share = cam.area_share;
    res.cam_count = cam.count;
    write_json((out / "cam_summary.json").string(),
               {{"layer", exp.models[0].spec().conv_layers().size()},
                {"samples", cam.count},
                {"mean_overlap", cam.overlap},
                {"mean_area_share", cam.area_share},
                {"overlaps", cam.overlaps},
                {"area_shares", cam.shares}});

    prune::LoopConfig lc = config.prune;
    lc.train.lr = config.train.lr;
    lc.train.momentum = config.train.momentum;
    lc.train.batch = config.train.batch;
    auto pruned = prune::prune_finetune_loop(exp.models[0], train, test, lc);
    res.prune = pruned.report;
    write_json((out / "prune_report.json").string(), prune::to_json(res.prune, false));
    write_json((out / "prune_timing.json").string(),
               {{"before_latency_ms", res.prune.before.latency_ms}, {"after_latency_ms", res.prune.after.latency_ms}});
    std::ostringstream csv;
    csv.precision(10);
    csv << "metric,before,after,relative_change\n";
    csv << "parameters," << res.prune.before.params << "," << res.prune.after.params << ","
        << prune::relative_change(static_cast<double>(res.prune.before.params), static_cast<double>(res.prune.after.params)) << "\n";
    csv << "size_bytes," << res.prune.before.bytes << "," << res.prune.after.bytes << ","
        << prune::relative_change(static_cast<double>(res.prune.before.bytes), static_cast<double>(res.prune.after.bytes)) << "\n";
    csv << "accuracy," << res.prune.before.accuracy << "," << res.prune.after.accuracy << ","
        << prune::relative_change(res.prune.before.accuracy, res.prune.after.accuracy) << "\n";
    io::write_text((out / "prune_report.csv").string(), csv.str());
    nn::save_weights(pruned.model, (out / "pruned.fdcw").string());
    return res;
}

}  // namespace fdc::harness
