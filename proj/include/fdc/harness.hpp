#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fdc/augment.hpp"
#include "fdc/dynamics.hpp"
#include "fdc/faults.hpp"
#include "fdc/nn/network.hpp"
#include "fdc/prune.hpp"
#include "fdc/sdi.hpp"

namespace fdc::harness {

struct DataConfig {
    std::size_t size = 5000;           // SDIs to generate
    double trajectory_seconds = 600;   // per simulated flight
    double dt = 0.05;                  // integration step and sample period (20 Hz)
    double stride_seconds = 1.0;       // spacing of SDI end times
    faults::CaseWeights case_weights = faults::uniform_weights();
    std::vector<dynamics::ProfilePreset> presets;  // empty: every flight-condition preset
    bool noise = true;
};

struct ExperimentConfig {
    DataConfig data;
    augment::Method method = augment::Method::AllTile;
    std::string network = "COMPACT_FDC";
    nn::TrainConfig train{1e-3, 0.90, 100, 30, 0};  // lr 1e-4 scaled x10 for the compact net
    std::size_t folds = 5;
    std::uint64_t data_seed = 1;
    std::uint64_t fold_seed = 2;
    std::uint64_t init_seed = 3;
    prune::LoopConfig prune;
    std::size_t cam_samples = 50;
    std::string out_dir = "fdc_out";

    void validate() const;
};

// Field-by-field documentation lives in README.md.
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig defaults = {});
// Replaces every seed (data, folds, init, training, pruning) by children of `seed`.
void reseed(ExperimentConfig& c, std::uint64_t seed);

// simulate -> noise -> inject faults -> SDIs every stride seconds, flight
// after flight, until `size` records exist. Flights that leave the
// envelope are skipped and counted in the generator metadata.
sdi::SdiDataset gen_dataset(const DataConfig& config, std::uint64_t seed);

// SDI records inflated to 224x224 on the fly.
class SdiImages final : public nn::LabeledImages {
public:
    SdiImages(const sdi::SdiDataset& data, augment::Method method);
    std::size_t size() const override { return data_.size(); }
    std::uint8_t label(std::size_t i) const override { return data_.records.at(i).label; }
    nn::FeatureShape shape() const override { return {1, augment::kImageSize, augment::kImageSize}; }
    void fill(std::size_t i, std::span<float> image) const override;
    const augment::LayoutMap& layout() const noexcept { return layout_; }

private:
    const sdi::SdiDataset& data_;
    const augment::LayoutMap& layout_;
};

// Seeded shuffle split into k folds, sizes differing by at most one (the
// first n % k folds get the extra index). Each fold is sorted.
std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);

// Everything except fold f, sorted; throws if it intersects the test fold.
std::vector<std::size_t> training_indices(const std::vector<std::vector<std::size_t>>& folds, std::size_t f);

double mean(std::span<const double> v);
double sample_std(std::span<const double> v);  // n - 1 denominator

struct FoldReport {
    std::string method;
    std::vector<double> accuracies;  // per fold: mean of the last 5 epoch test accuracies
    double mean = 0;
    double std = 0;
    std::vector<Matrix<std::uint64_t>> confusions;
    std::vector<nn::History> histories;
    std::vector<std::vector<std::size_t>> folds;
};

nlohmann::json to_json(const FoldReport& r);
FoldReport fold_report_from_json(const nlohmann::json& j);
// Recomputes mean and STD from the fold values; throws FormatError beyond 1e-9.
void check_aggregates(const FoldReport& r);

struct ExperimentResult {
    FoldReport report;
    std::vector<nn::Network> models;  // one per fold
};

ExperimentResult run_experiment(const ExperimentConfig& config, const sdi::SdiDataset& data);

// One run_experiment per augmentation method on identical folds and seeds.
std::vector<FoldReport> compare_augmentations(const ExperimentConfig& config, const sdi::SdiDataset& data);

// Table 4 layout: method, fold 1..k, mean, std.
std::string table_csv(std::span<const FoldReport> rows);
nlohmann::json table_json(std::span<const FoldReport> rows);

std::string confusion_csv(const Matrix<std::uint64_t>& m);
nlohmann::json evaluation_json(const nn::Evaluation& ev);

void write_json(const std::string& path, const nlohmann::json& j);

struct PipelineResult {
    FoldReport cv;
    prune::PruneReport prune;
    double cam_overlap = 0;      // mean over faulted test samples
    double cam_area_share = 0;   // uniform-map baseline over the same samples
    std::size_t cam_count = 0;
};

// Desk-scale end-to-end run writing into config.out_dir:
//   dataset/             generated SDIs
//   cv_report.json/.csv  k-fold results
//   fold1.fdcw           fold 1 model
//   prune_report.json/.csv, pruned.fdcw, prune_timing.json
//   cam_summary.json
// Everything except *_timing.json is reproducible for fixed seeds.
PipelineResult run_pipeline(const ExperimentConfig& config);

// Grad-CAM attention on the faulted samples of `data`, last conv layer.
struct CamSummary {
    double overlap = 0;
    double area_share = 0;
    std::size_t count = 0;
    std::vector<double> overlaps;
    std::vector<double> shares;
};
CamSummary cam_study(const nn::Network& net, const sdi::SdiDataset& data, std::span<const std::size_t> indices,
                     augment::Method method, std::size_t max_samples, std::size_t conv = 0);

}  // namespace fdc::harness
