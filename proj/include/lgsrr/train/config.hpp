#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lgsrr/data/dataset.hpp"
#include "lgsrr/ndcg/neural_ndcg.hpp"
#include "lgsrr/srr/classic.hpp"
#include "lgsrr/train/adamw.hpp"

namespace lgsrr::train {

enum class DropRelation { None, Importance, Complementarity, Inconsistency };

DropRelation parse_drop_relation(std::string_view name);
std::string_view to_string(DropRelation relation);

struct Ablation {
    bool no_rank_loss = false;
    /// Replaces the relational head by summation fusion (the Or baseline).
    bool no_srr = false;
    std::optional<srr::ClassicMode> classic_mode;
    DropRelation drop_relation = DropRelation::None;

    std::string label() const;
};

/// "full", "no-rank-loss", "no-srr", "drop-<relation>" or "classic-<mode>".
Ablation parse_ablation_variant(std::string_view name);
/// The default ablation sweep: full model, each toggle, each classic mode.
std::vector<Ablation> default_ablation_variants();

struct RunConfig {
    std::optional<std::filesystem::path> dataset;
    std::optional<data::SynthSpec> synth;
    /// Optional expectations checked against the loaded dataset.
    std::optional<std::size_t> d;
    std::optional<std::size_t> classes;
    /// 0 selects d / 2.
    std::size_t hidden = 0;
    double lambda = 1.0;
    double tau = 1.0;
    AdamWConfig optimizer;
    std::size_t batch_size = 32;
    std::size_t epochs = 100;
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    ndcg::SinkhornConfig sinkhorn;
    Ablation ablation;
    std::filesystem::path out = "runs/default";

    void validate() const;
};

RunConfig parse_run_config(std::string_view json_text);
/// Accepts either a bare synth object or a run config with a "synth" section.
data::SynthSpec parse_synth_spec(std::string_view json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string to_json_text(const RunConfig& config);

/// Loads the configured manifest, or synthesizes the configured spec.
data::Dataset materialize_dataset(const RunConfig& config);

} // namespace lgsrr::train
