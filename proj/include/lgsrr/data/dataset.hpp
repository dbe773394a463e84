#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lgsrr/ndcg/neural_ndcg.hpp"
#include "lgsrr/srr/srr.hpp"

namespace lgsrr::data {

inline constexpr const char* kTextSlot = "T";

enum class Split { Train, Dev, Test };
inline constexpr std::array<Split, 3> kSplits = {Split::Train, Split::Dev, Split::Test};
const char* split_name(Split split);

/// One sample: pooled features, class label and an optional importance
/// ordering. `ranking` indexes slots as [T, fine...] and always starts with T.
struct FeatureRecord {
    std::string sample_id;
    srr::SemanticBundle features;
    std::size_t label = 0;
    std::optional<std::vector<std::size_t>> ranking;

    ndcg::RankingTarget target() const;
};

struct DatasetManifest {
    std::string name;
    std::size_t d = 0;
    std::size_t classes = 0;
    std::vector<std::string> slots;   // fine slots, e.g. A, E, I
    std::vector<std::string> labels;
    std::map<std::string, std::size_t> splits;
    std::map<std::string, std::string> files;
    std::map<std::string, std::string> sha256;

    /// Split sizes and label count of the two benchmark corpora.
    static DatasetManifest mintrec2_shape(std::size_t d);
    static DatasetManifest iemocap_da_shape(std::size_t d);
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<FeatureRecord> train;
    std::vector<FeatureRecord> dev;
    std::vector<FeatureRecord> test;

    std::vector<FeatureRecord>& split(Split s);
    const std::vector<FeatureRecord>& split(Split s) const;
};

/// Throws std::invalid_argument naming the sample on any violation.
void validate_record(const FeatureRecord& record, const DatasetManifest& manifest);

/// One JSON line; the stored ranking omits T.
std::string record_to_json_line(const FeatureRecord& record, const DatasetManifest& manifest);
FeatureRecord record_from_json_line(std::string_view line, const DatasetManifest& manifest);

/// Writes train/dev/test JSON-lines plus manifest.json (with digests) to `dir`.
/// Returns the manifest path.
std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load(const std::filesystem::path& manifest_path);

// Synthetic planted-structure generator.

struct SynthSpec {
    std::uint64_t seed = 0;
    std::size_t n_train = 2000;
    std::size_t n_dev = 500;
    std::size_t n_test = 500;
    std::size_t d = 16;
    std::size_t classes = 4;
    double separation = 4.0;
    double noise = 0.5;
    /// Scale of the class mean carried by the aligned fine slot; F_T carries it at 1.
    double signal_gain = 0.5;
    std::vector<std::string> slots = {"A", "E", "I"};
    /// Probability that each fine slot is the aligned (rank 1) slot.
    std::vector<double> rank1_proportions = {1476.0 / 6165.0, 523.0 / 6165.0, 4166.0 / 6165.0};
    std::string name = "synthetic";
};

void validate(const SynthSpec& spec);
Dataset synthesize(const SynthSpec& spec);

// Rank distribution statistics over fine slots.

struct RankStats {
    std::vector<std::string> slots;
    /// counts[slot][position], position 0 == Rank@1.
    std::vector<std::vector<std::size_t>> counts;
    std::size_t total = 0;

    std::string to_table() const;
};

/// Orderings are lists of fine slot names, most important first.
RankStats rank_stats(std::span<const std::vector<std::string>> orderings, std::span<const std::string> slots);
RankStats rank_stats(std::span<const FeatureRecord> records, std::span<const std::string> slots);

} // namespace lgsrr::data
