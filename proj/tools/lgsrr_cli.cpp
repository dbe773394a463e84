#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lgsrr/data/dataset.hpp"
#include "lgsrr/io/digest.hpp"
#include "lgsrr/llm/client.hpp"
#include "lgsrr/llm/pipeline.hpp"
#include "lgsrr/train/config.hpp"
#include "lgsrr/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace lgsrr;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, bool config_required = true) {
    cmd->add_option("--config", c.config, "JSON config file")->required(config_required)->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "Use a single seed instead of the configured list");
    cmd->add_option("--out", c.out, "Output directory (overrides the config)");
    cmd->add_flag("--quiet", c.quiet, "Suppress per-epoch logging");
}

train::RunConfig run_config(const Common& c) {
    train::RunConfig cfg = train::load_run_config(c.config);
    if (c.seed) {
        cfg.seeds = {*c.seed};
    }
    if (!c.out.empty()) {
        cfg.out = c.out;
    }
    return cfg;
}

train::EpochCallback epoch_logger(bool quiet) {
    if (quiet) {
        return {};
    }
    return [](const train::EpochLog& e) {
        std::fprintf(stderr, "seed %llu epoch %3zu  loss %.5f  ce %.5f  rank %.5f  dev acc %.2f  dev wf1 %.2f\n",
                     static_cast<unsigned long long>(e.seed), e.epoch, e.train_loss, e.train_classification,
                     e.train_ranking, e.dev_acc, e.dev_wf1);
    };
}

data::Split parse_split(const std::string& name) {
    for (data::Split s : data::kSplits) {
        if (name == data::split_name(s)) return s;
    }
    throw std::invalid_argument("unknown split '" + name + "' (expected train, dev, test)");
}

int cmd_synth(const Common& c) {
    data::SynthSpec spec = train::parse_synth_spec(io::read_file(c.config));
    if (c.seed) {
        spec.seed = *c.seed;
    }
    const fs::path out = c.out.empty() ? fs::path("data") / spec.name : fs::path(c.out);
    const data::Dataset ds = data::synthesize(spec);
    const fs::path manifest = data::write_dataset(ds, out);
    std::cout << "wrote " << manifest.string() << "\n";
    std::cout << data::rank_stats(std::span<const data::FeatureRecord>(ds.train), ds.manifest.slots).to_table();
    return 0;
}

int cmd_train(const Common& c) {
    const train::RunConfig cfg = run_config(c);
    const data::Dataset ds = train::materialize_dataset(cfg);
    const train::TrainResult r = train::train(cfg, ds, epoch_logger(c.quiet));
    train::write_reports(r, ds, cfg.out);
    io::write_file_atomic(cfg.out / "config.json", train::to_json_text(cfg) + "\n");
    std::cout << io::read_file(cfg.out / "report.txt");
    return 0;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& split_name) {
    const train::RunConfig cfg = run_config(c);
    const data::Dataset ds = train::materialize_dataset(cfg);
    const train::Model model = train::Model::from_json(io::read_file(checkpoint));
    const auto& split = ds.split(parse_split(split_name));
    const train::MetricsReport m = train::evaluate(model, split, ds.manifest.classes);
    std::optional<double> agreement;
    if (std::all_of(split.begin(), split.end(), [](const data::FeatureRecord& r) { return r.ranking.has_value(); })) {
        agreement = train::rank_agreement(model, split);
    }
    nlohmann::json j = {{"split", split_name},       {"acc", m.acc},         {"macro_f1", m.macro_f1},
                        {"macro_p", m.macro_p},      {"macro_r", m.macro_r}, {"weighted_f1", m.weighted_f1},
                        {"weighted_p", m.weighted_p}, {"per_class_accuracy", m.recall},
                        {"confusion", m.confusion},  {"notes", m.notes}};
    j["rank_agreement"] = agreement ? nlohmann::json(*agreement) : nlohmann::json(nullptr);
    if (!c.out.empty()) {
        fs::create_directories(c.out);
        io::write_file_atomic(fs::path(c.out) / ("eval_" + split_name + ".json"), j.dump(2) + "\n");
        io::write_file_atomic(fs::path(c.out) / ("confusion_" + split_name + ".csv"),
                              m.confusion_csv(ds.manifest.labels));
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_rank_stats(const Common& c, const std::string& manifest, const std::string& split_name) {
    data::Dataset ds;
    if (!manifest.empty()) {
        ds = data::load(manifest);
    } else if (!c.config.empty()) {
        ds = train::materialize_dataset(run_config(c));
    } else {
        throw std::invalid_argument("rank-stats needs --manifest or --config");
    }
    const auto& split = ds.split(parse_split(split_name));
    std::cout << data::rank_stats(std::span<const data::FeatureRecord>(split), ds.manifest.slots).to_table();
    return 0;
}

int cmd_ablate(const Common& c, const std::vector<std::string>& names) {
    const train::RunConfig cfg = run_config(c);
    const data::Dataset ds = train::materialize_dataset(cfg);
    std::vector<train::Ablation> variants;
    if (names.empty()) {
        variants = train::default_ablation_variants();
    } else {
        for (const auto& n : names) variants.push_back(train::parse_ablation_variant(n));
    }
    const auto rows = train::run_ablations(cfg, ds, variants, epoch_logger(c.quiet));
    train::write_ablation_report(rows, cfg.out);
    std::cout << train::ablation_table(rows);
    return 0;
}

int cmd_llm(const std::string& step, const Common& c, const std::string& mock, bool resume) {
    llm::PipelineConfig cfg =
        llm::parse_pipeline_config(io::read_file(c.config), fs::path(c.config).parent_path());
    if (!c.out.empty()) {
        cfg.out = c.out;
    }
    if (c.seed) {
        cfg.seed = *c.seed;
    }
    cfg.resume = cfg.resume || resume;
    std::unique_ptr<llm::ChatClient> client;
    if (!mock.empty()) {
        client = std::make_unique<llm::MockChatClient>(mock, cfg.http.model.empty() ? "mock" : cfg.http.model);
    } else {
        if (cfg.http.endpoint.empty() || cfg.http.model.empty()) {
            throw std::invalid_argument("config needs 'endpoint' and 'model' unless --mock is given");
        }
        client = std::make_unique<llm::HttpChatClient>(cfg.http);
    }
    llm::Pipeline pipeline(cfg, *client);
    if (step == "discover") {
        for (const auto& a : pipeline.discover()) {
            std::cout << a.name << " (" << a.abbreviation << ")\t" << a.frequency << "\n";
        }
    } else if (step == "describe") {
        std::cout << pipeline.describe().size() << " description sets written\n";
    } else if (step == "rank") {
        const auto records = pipeline.rank();
        std::cout << io::read_file(cfg.out / "rank_stats.txt");
        std::cout << records.size() << " rankings written\n";
    } else {
        const auto r = pipeline.run_all();
        std::cout << r.stats.to_table();
    }
    for (const auto& f : pipeline.flags()) {
        std::cerr << "flag [" << f.step << "] " << f.id << ": " << f.reason << "\n";
    }
    std::cerr << client->request_count() << " requests issued\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semantic relation reasoning head: training, evaluation and LLM ranking extraction"};
    app.require_subcommand(1);

    Common synth_opts, train_opts, eval_opts, stats_opts, ablate_opts;
    auto* synth = app.add_subcommand("synth", "Generate a planted synthetic dataset");
    add_common(synth, synth_opts);

    auto* tr = app.add_subcommand("train", "Train over the configured seeds and write reports");
    add_common(tr, train_opts);

    std::string checkpoint;
    std::string eval_split = "test";
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
    add_common(ev, eval_opts);
    ev->add_option("--checkpoint", checkpoint, "checkpoint.json from a training run")
        ->required()
        ->check(CLI::ExistingFile);
    ev->add_option("--split", eval_split, "train, dev or test");

    std::string manifest;
    std::string stats_split = "train";
    auto* rs = app.add_subcommand("rank-stats", "Rank@k counts per slot");
    add_common(rs, stats_opts, false);
    rs->add_option("--manifest", manifest, "Dataset manifest.json")->check(CLI::ExistingFile);
    rs->add_option("--split", stats_split, "train, dev or test");

    std::vector<std::string> variants;
    auto* ab = app.add_subcommand("ablate", "Train ablation variants and report deltas against the first");
    add_common(ab, ablate_opts);
    ab->add_option("--variants", variants,
                   "full, no-rank-loss, no-srr, drop-<relation>, classic-<mode> (default: all)");

    struct LlmOpts {
        Common common;
        std::string mock;
        bool resume = false;
    };
    std::map<std::string, LlmOpts> llm_opts;
    std::vector<std::pair<std::string, CLI::App*>> llm_cmds;
    for (const char* name : {"discover", "describe", "rank", "run-all"}) {
        auto& o = llm_opts[name];
        auto* cmd = app.add_subcommand(name, std::string("Extraction pipeline: ") +
                                                 (std::string(name) == "run-all" ? "all three steps" : name));
        add_common(cmd, o.common);
        cmd->add_option("--mock", o.mock, "Directory of scripted responses")->check(CLI::ExistingDirectory);
        cmd->add_flag("--resume", o.resume, "Continue from the cache in the output directory");
        llm_cmds.emplace_back(name, cmd);
    }

    CLI11_PARSE(app, argc, argv);
    try {
        if (*synth) return cmd_synth(synth_opts);
        if (*tr) return cmd_train(train_opts);
        if (*ev) return cmd_eval(eval_opts, checkpoint, eval_split);
        if (*rs) return cmd_rank_stats(stats_opts, manifest, stats_split);
        if (*ab) return cmd_ablate(ablate_opts, variants);
        for (const auto& [name, cmd] : llm_cmds) {
            if (*cmd) {
                const auto& o = llm_opts[name];
                return cmd_llm(name, o.common, o.mock, o.resume);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
