#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lgsrr/data/dataset.hpp"
#include "lgsrr/llm/cache.hpp"
#include "lgsrr/llm/client.hpp"
#include "lgsrr/llm/parse.hpp"

#ifndef LGSRR_DEFAULT_TEMPLATE_DIR
#define LGSRR_DEFAULT_TEMPLATE_DIR "templates"
#endif

namespace lgsrr::llm {

/// Prompt text with {{name}} placeholders; the hash keys the cache.
struct Template {
    std::string name;
    std::string text;
    std::string hash;

    static Template from_text(std::string name, std::string text);
    static Template load(const std::filesystem::path& path);
    /// Throws when a placeholder has no value.
    std::string render(const std::map<std::string, std::string>& values) const;
};

struct PipelineSample {
    std::string sample_id;
    std::string text;
    /// URL or path, passed through to the endpoint untouched.
    std::string video;
    std::optional<std::string> label;
    std::string split = "train";
};

/// JSON-lines with {sample_id, text, video, label?, split?}.
std::vector<PipelineSample> load_samples(const std::filesystem::path& path);

struct PipelineConfig {
    std::filesystem::path samples;
    std::filesystem::path templates = LGSRR_DEFAULT_TEMPLATE_DIR;
    std::filesystem::path out = "runs/cot";
    std::size_t discovery_n = 50;
    std::size_t discovery_chunk = 10;
    std::uint64_t seed = 0;
    std::size_t top_k = 3;
    /// Per-abbreviation instruction text for the description prompt.
    std::map<std::string, std::string> instructions;
    std::vector<std::string> rank_splits = {"train"};
    std::size_t max_in_flight = 1;
    /// Continue from an existing cache in `out`; without it a populated cache is an error.
    bool resume = false;
    HttpClientConfig http;
};

/// Accepts the keys at top level or under an "llm" section. Relative paths
/// resolve against `base_dir`.
PipelineConfig parse_pipeline_config(std::string_view json_text, const std::filesystem::path& base_dir = {});

struct DescriptionSet {
    std::string sample_id;
    std::map<std::string, std::string> text;  // by abbreviation
    bool flagged = false;
};

struct RankRecord {
    std::string sample_id;
    std::vector<std::string> order;  // abbreviations, most contributing first
    bool fallback = false;
};

struct PipelineFlag {
    std::string step;
    std::string id;
    std::string reason;
};

struct PipelineResult {
    std::vector<SemanticAspect> discovered;
    std::vector<SemanticAspect> selected;
    std::vector<DescriptionSet> descriptions;
    std::vector<RankRecord> rankings;
    data::RankStats stats;
    std::vector<PipelineFlag> flags;
};

/// Discovery, description and ranking with per-step JSON-lines caches under
/// <out>/cache. Artifacts: aspects.json, descriptions.jsonl, rankings.jsonl,
/// rank_stats.txt and flags_<step>.json.
class Pipeline {
public:
    Pipeline(PipelineConfig config, ChatClient& client);

    std::vector<SemanticAspect> discover();
    /// Reads the selected aspects from aspects.json.
    std::vector<DescriptionSet> describe();
    /// Reads aspects.json and descriptions.jsonl.
    std::vector<RankRecord> rank();
    PipelineResult run_all();

    const std::vector<PipelineFlag>& flags() const noexcept { return flags_; }

private:
    struct Job {
        std::string id;
        std::vector<Message> messages;
        int attempt = 0;
    };
    struct Answer {
        std::string text;
        bool cached = false;
    };

    std::vector<Answer> query(const std::string& step, const Template& tpl, StepCache& cache,
                              const std::vector<Job>& jobs, const std::function<nlohmann::json(const std::string&)>& parse);
    std::vector<SemanticAspect> selected_aspects() const;
    std::vector<DescriptionSet> load_descriptions() const;
    void write_flags(const std::string& step) const;

    PipelineConfig config_;
    ChatClient& client_;
    Template t1_, t2_, t3_;
    std::vector<PipelineSample> samples_;
    std::unique_ptr<StepCache> discover_cache_, describe_cache_, rank_cache_;
    std::vector<PipelineFlag> flags_;
};

/// Rank@k table over RankRecords, slots in the given abbreviation order.
data::RankStats rank_table(const std::vector<RankRecord>& records, const std::vector<std::string>& abbreviations);

/// The description prompt for one sample; never includes the label.
std::string description_prompt(const Template& tpl, const PipelineSample& sample,
                               const std::vector<SemanticAspect>& aspects,
                               const std::map<std::string, std::string>& instructions);
std::string ranking_prompt(const Template& tpl, const DescriptionSet& desc, const std::string& label,
                           const std::vector<SemanticAspect>& aspects);

} // namespace lgsrr::llm
