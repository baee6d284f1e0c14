// Command-line front end: data generation, cross-validation, pruning, Grad-CAM.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fdc/augment.hpp"
#include "fdc/binary_io.hpp"
#include "fdc/errors.hpp"
#include "fdc/harness.hpp"
#include "fdc/nn/archive.hpp"
#include "fdc/nn/kernels.hpp"
#include "fdc/prune.hpp"
#include "fdc/xai.hpp"

using namespace fdc;
namespace fs = std::filesystem;

namespace {

struct Globals {
    std::string config;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seeded = false;
    bool deterministic = false;
};

harness::ExperimentConfig load_config(const Globals& g) {
    harness::ExperimentConfig c;
    if (!g.config.empty()) {
        const auto bytes = io::read_file(g.config);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(bytes);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(g.config + ": " + e.what());
        }
        c = harness::config_from_json(j);
    }
    if (g.seeded) harness::reseed(c, g.seed);
    if (!g.out_dir.empty()) c.out_dir = g.out_dir;
    // The kernels already reduce in a fixed order; one thread also rules out
    // any scheduling effect outside them.
    if (g.deterministic) nn::kernels::set_thread_count(1);
    c.validate();
    return c;
}

fs::path out_path(const harness::ExperimentConfig& c) {
    fs::create_directories(c.out_dir);
    return c.out_dir;
}

std::string dataset_dir(const harness::ExperimentConfig& c, const std::string& override_dir) {
    return override_dir.empty() ? (fs::path(c.out_dir) / "dataset").string() : override_dir;
}

void write_csv(const fs::path& p, const std::string& text) { io::write_text(p.string(), text); }

std::string per_class_csv(const nn::Evaluation& ev) {
    std::ostringstream s;
    s << "class,recall\n";
    const auto r = ev.recall();
    for (std::size_t k = 0; k < r.size(); ++k) s << k << "," << r[k] << "\n";
    return s.str();
}

int cmd_gen_data(const Globals& g) {
    const auto c = load_config(g);
    const auto ds = harness::gen_dataset(c.data, c.data_seed);
    const auto dir = out_path(c) / "dataset";
    sdi::save_dataset(ds, dir.string());
    const auto h = ds.label_histogram();
    std::printf("%zu SDIs written to %s\nlabels:", ds.size(), dir.c_str());
    for (auto n : h) std::printf(" %zu", n);
    std::printf("\n");
    return 0;
}

int cmd_train(const Globals& g, const std::string& data_dir) {
    const auto c = load_config(g);
    const auto ds = sdi::load_dataset(dataset_dir(c, data_dir));
    const auto res = harness::run_experiment(c, ds);
    const auto out = out_path(c);
    harness::write_json((out / "config.json").string(), harness::to_json(c));
    harness::write_json((out / "cv_report.json").string(), harness::to_json(res.report));
    write_csv(out / "cv_report.csv", harness::table_csv(std::span(&res.report, 1)));
    for (std::size_t f = 0; f < res.models.size(); ++f)
        nn::save_weights(res.models[f], (out / ("fold" + std::to_string(f + 1) + ".fdcw")).string());
    std::printf("%s: mean %.2f%%, std %.4f over %zu folds\n", res.report.method.c_str(), res.report.mean,
                res.report.std, res.report.accuracies.size());
    return 0;
}

int cmd_eval(const Globals& g, const std::string& model, const std::string& data_dir, int fold) {
    const auto c = load_config(g);
    const auto ds = sdi::load_dataset(dataset_dir(c, data_dir));
    const auto net = nn::load_weights(model);
    const harness::SdiImages images(ds, c.method);
    std::vector<std::size_t> idx;
    if (fold > 0) {
        idx = harness::kfold_split(ds.size(), c.folds, c.fold_seed).at(static_cast<std::size_t>(fold - 1));
    } else {
        idx.resize(ds.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
    }
    const nn::Subset subset(images, idx);
    const auto ev = nn::evaluate(net, subset);
    const auto out = out_path(c);
    harness::write_json((out / "evaluation.json").string(), harness::evaluation_json(ev));
    write_csv(out / "confusion.csv", harness::confusion_csv(ev.confusion));
    write_csv(out / "recall.csv", per_class_csv(ev));
    std::printf("accuracy %.2f%% on %zu samples\n", ev.accuracy, subset.size());
    return 0;
}

int cmd_prune(const Globals& g, const std::string& model, const std::string& data_dir) {
    const auto c = load_config(g);
    const auto ds = sdi::load_dataset(dataset_dir(c, data_dir));
    const auto net = nn::load_weights(model);
    const harness::SdiImages images(ds, c.method);
    const auto folds = harness::kfold_split(ds.size(), c.folds, c.fold_seed);
    const nn::Subset test(images, folds[0]);
    const nn::Subset train(images, harness::training_indices(folds, 0));
    prune::LoopConfig lc = c.prune;
    lc.train.lr = c.train.lr;
    lc.train.momentum = c.train.momentum;
    lc.train.batch = c.train.batch;
    const auto res = prune::prune_finetune_loop(net, train, test, lc);
    const auto out = out_path(c);
    harness::write_json((out / "prune_report.json").string(), prune::to_json(res.report, true));
    nn::save_weights(res.model, (out / "pruned.fdcw").string());
    std::printf("%s: params %zu -> %zu, accuracy %.2f%% -> %.2f%%\n", res.report.method.c_str(),
                res.report.before.params, res.report.after.params, res.report.before.accuracy,
                res.report.after.accuracy);
    return 0;
}

int cmd_cam(const Globals& g, const std::string& model, const std::string& data_dir, std::vector<std::size_t> indices,
            std::vector<std::size_t> layers, std::size_t samples) {
    const auto c = load_config(g);
    const auto ds = sdi::load_dataset(dataset_dir(c, data_dir));
    const auto net = nn::load_weights(model);
    const auto& layout = augment::layout_for(c.method);
    if (layers.empty()) layers = xai::default_layers(net.spec());
    const auto out = out_path(c) / "cam";
    fs::create_directories(out);
    if (indices.empty())
        for (std::size_t i = 0; i < ds.size() && indices.size() < 5; ++i)
            if (ds.records[i].label != 0) indices.push_back(i);
    std::vector<float> image(augment::kImageSize * augment::kImageSize);
    for (std::size_t i : indices) {
        const auto& rec = ds.records.at(i);
        layout.apply(rec.values.values(), image);
        const MatrixF img(augment::kImageSize, augment::kImageSize, std::vector<float>(image.begin(), image.end()));
        for (std::size_t l : layers) {
            const auto cam = xai::grad_cam<float>(net, image, rec.label, l);
            std::optional<double> overlap;
            if (rec.label != 0) {
                try {
                    overlap = xai::attention_overlap(cam.upsampled, layout, xai::fault_columns(rec));
                } catch (const InvalidArgument&) {
                }
            }
            xai::export_overlay(cam, img, (out / ("sample" + std::to_string(i) + "_conv" + std::to_string(l))).string(),
                                overlap);
        }
    }
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto s = harness::cam_study(net, ds, all, c.method, samples);
    harness::write_json((out / "summary.json").string(), {{"samples", s.count},
                                                            {"mean_overlap", s.overlap},
                                                            {"mean_area_share", s.area_share},
                                                            {"overlaps", s.overlaps},
                                                            {"area_shares", s.shares}});
    std::printf("overlays for %zu samples; mean overlap %.4f vs uniform %.4f over %zu faulted samples\n",
                indices.size(), s.overlap, s.area_share, s.count);
    return 0;
}

int cmd_bench(const Globals& g, std::size_t batch, std::size_t reps) {
    const auto c = load_config(g);
    nn::Network net(nn::preset(c.network));
    net.initialize(c.init_seed);
    std::vector<float> x(net.spec().input.size() * batch, 0.5f);
    nlohmann::json rows = nlohmann::json::array();
    for (auto backend : {nn::Backend::Reference, nn::Backend::Parallel}) {
        net.set_backend(backend);
        (void)net.forward(x, batch);
        std::vector<double> ms;
        for (std::size_t r = 0; r < reps; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            (void)net.forward(x, batch);
            ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        }
        std::sort(ms.begin(), ms.end());
        const double median = ms[ms.size() / 2];
        const char* name = backend == nn::Backend::Reference ? "reference" : "parallel";
        rows.push_back({{"backend", name}, {"batch", batch}, {"median_forward_ms", median}});
        std::printf("%-9s batch %zu: median forward %.3f ms\n", name, batch, median);
    }
    const auto out = out_path(c);
    harness::write_json((out / "bench.json").string(),
                        {{"network", c.network}, {"threads", nn::kernels::thread_count()}, {"rows", rows}});
    return 0;
}

int cmd_compare_aug(const Globals& g, const std::string& data_dir) {
    const auto c = load_config(g);
    const auto ds = sdi::load_dataset(dataset_dir(c, data_dir));
    const auto rows = harness::compare_augmentations(c, ds);
    const auto out = out_path(c);
    harness::write_json((out / "augmentation_table.json").string(), harness::table_json(rows));
    write_csv(out / "augmentation_table.csv", harness::table_csv(rows));
    std::printf("%s", harness::table_csv(rows).c_str());
    return 0;
}

int cmd_pipeline(const Globals& g) {
    const auto c = load_config(g);
    const auto r = harness::run_pipeline(c);
    std::printf("cv mean %.2f%% (std %.4f); cam overlap %.4f vs %.4f over %zu; pruned accuracy %.2f%% -> %.2f%%\n",
                r.cv.mean, r.cv.std, r.cam_overlap, r.cam_area_share, r.cam_count, r.prune.before.accuracy,
                r.prune.after.accuracy);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sensor fault detection lab: SDI data, CNN training, pruning, Grad-CAM"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "experiment config JSON (see README)")->check(CLI::ExistingFile);
    app.add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { g.seed = s, g.seeded = true; }, "derive every seed from this one");
    app.add_option("--out-dir", g.out_dir, "output directory (overrides out_dir in the config)");
    app.add_flag("--deterministic", g.deterministic, "single-threaded run");

    std::string data_dir, model;
    int fold = 0;
    std::vector<std::size_t> indices, layers;
    std::size_t samples = 50, batch = 1, reps = 30;

    auto* gen = app.add_subcommand("gen-data", "simulate flights and write an SDI dataset");
    auto* train = app.add_subcommand("train", "k-fold cross-validation; writes cv_report and fold models");
    train->add_option("--data", data_dir, "dataset directory (default <out-dir>/dataset)");
    auto* eval = app.add_subcommand("eval", "evaluate a weight archive");
    eval->add_option("--model", model, "weight archive")->required()->check(CLI::ExistingFile);
    eval->add_option("--data", data_dir, "dataset directory");
    eval->add_option("--fold", fold, "evaluate only this 1-based test fold (0: all samples)");
    auto* pr = app.add_subcommand("prune", "iterative pruning + fine-tuning on the fold 1 split");
    pr->add_option("--model", model, "weight archive")->required()->check(CLI::ExistingFile);
    pr->add_option("--data", data_dir, "dataset directory");
    auto* cam = app.add_subcommand("cam", "Grad-CAM overlays and attention overlap");
    cam->add_option("--model", model, "weight archive")->required()->check(CLI::ExistingFile);
    cam->add_option("--data", data_dir, "dataset directory");
    cam->add_option("--index", indices, "sample indices to export (default: first 5 faulted)");
    cam->add_option("--layer", layers, "1-based conv layers (default: 1, 2, 6, 10, 13 or all)");
    cam->add_option("--samples", samples, "faulted samples in the overlap summary");
    auto* bench = app.add_subcommand("bench", "forward latency, reference vs parallel kernels");
    bench->add_option("--batch", batch, "batch size");
    bench->add_option("--reps", reps, "timed repetitions")->check(CLI::PositiveNumber);
    auto* cmp = app.add_subcommand("compare-aug", "cross-validate all seven augmentation methods");
    cmp->add_option("--data", data_dir, "dataset directory");
    auto* pipe = app.add_subcommand("pipeline", "desk-scale end-to-end run");

    CLI11_PARSE(app, argc, argv);
    try {
        if (gen->parsed()) return cmd_gen_data(g);
        if (train->parsed()) return cmd_train(g, data_dir);
        if (eval->parsed()) return cmd_eval(g, model, data_dir, fold);
        if (pr->parsed()) return cmd_prune(g, model, data_dir);
        if (cam->parsed()) return cmd_cam(g, model, data_dir, indices, layers, samples);
        if (bench->parsed()) return cmd_bench(g, batch, reps);
        if (cmp->parsed()) return cmd_compare_aug(g, data_dir);
        if (pipe->parsed()) return cmd_pipeline(g);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
