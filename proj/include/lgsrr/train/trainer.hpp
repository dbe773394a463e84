#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "lgsrr/data/dataset.hpp"
#include "lgsrr/srr/classic.hpp"
#include "lgsrr/srr/srr.hpp"
#include "lgsrr/train/config.hpp"
#include "lgsrr/train/metrics.hpp"

namespace lgsrr::train {

/// Either the relational head or one of the classic fusion baselines.
struct Model {
    std::variant<srr::SrrParams, srr::ClassicParams> params;
    srr::Relations relations;

    bool is_srr() const noexcept { return std::holds_alternative<srr::SrrParams>(params); }
    std::string kind() const;

    Vec logits(const srr::SemanticBundle& bundle) const;
    /// Importance over [T, fine...]; absent for baselines and when importance is dropped.
    std::optional<Vec> alpha(const srr::SemanticBundle& bundle) const;

    std::vector<std::span<double>> tensors();
    std::vector<std::span<const double>> tensors() const;

    std::string to_json() const;
    static Model from_json(std::string_view text);
};

/// Builds a freshly initialised model for the config's ablation.
Model make_model(const RunConfig& config, const data::DatasetManifest& manifest, std::uint64_t seed);

struct BatchLoss {
    double loss = 0.0;
    double classification = 0.0;
    double ranking = 0.0;
    /// One gradient block per model tensor.
    std::vector<std::vector<double>> grads;
};

BatchLoss batch_loss(const Model& model, std::span<const data::FeatureRecord* const> batch, const RunConfig& config);

/// Throws std::invalid_argument on an empty split.
MetricsReport evaluate(const Model& model, std::span<const data::FeatureRecord> split, std::size_t classes);

/// Kendall tau over [T, fine...] between the alpha ordering and each stored
/// ranking, averaged over samples. Absent when the model exposes no alpha.
/// Throws std::invalid_argument when a sample has no ranking.
std::optional<double> rank_agreement(const Model& model, std::span<const data::FeatureRecord> split);

struct NonFiniteLoss : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EpochLog {
    std::uint64_t seed = 0;
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_classification = 0.0;
    double train_ranking = 0.0;
    double dev_acc = 0.0;
    double dev_wf1 = 0.0;
};

struct SeedResult {
    std::uint64_t seed = 0;
    Model best;
    std::size_t best_epoch = 0;
    MetricsReport train;
    MetricsReport dev;
    MetricsReport test;
    std::optional<double> rank_agreement;  // on test
    std::vector<EpochLog> curve;
    double seconds = 0.0;
};

struct SummaryStat {
    double mean = 0.0;
    double stddev = 0.0;
};

struct TrainResult {
    std::string label;
    std::vector<SeedResult> seeds;
    /// Test-split metric name -> mean and std over seeds.
    std::map<std::string, SummaryStat> summary;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains one seed; keeps the parameters with the best dev weighted F1.
SeedResult train_single(const RunConfig& config, const data::Dataset& dataset, std::uint64_t seed,
                        const EpochCallback& on_epoch = {});

/// Trains every configured seed and averages the test metrics.
TrainResult train(const RunConfig& config, const data::Dataset& dataset, const EpochCallback& on_epoch = {});

/// Writes report.json, report.txt and per-seed checkpoint, curves and confusion CSVs.
void write_reports(const TrainResult& result, const data::Dataset& dataset, const std::filesystem::path& dir);

struct AblationRow {
    std::string label;
    TrainResult result;
    /// Metric name -> mean difference from the reference row.
    std::map<std::string, double> delta;
};

/// Runs `variants` on top of `base`; deltas are relative to the first variant.
std::vector<AblationRow> run_ablations(const RunConfig& base, const data::Dataset& dataset,
                                       std::span<const Ablation> variants, const EpochCallback& on_epoch = {});

std::string ablation_table(std::span<const AblationRow> rows);
void write_ablation_report(std::span<const AblationRow> rows, const std::filesystem::path& dir);

/// Metric names used in summaries and ablation tables.
std::vector<std::string> summary_metric_names();

} // namespace lgsrr::train
