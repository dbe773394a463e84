#include "lgsrr/train/config.hpp"

#include <stdexcept>

#include "json.hpp"
#include "lgsrr/io/digest.hpp"

namespace lgsrr::train {

using nlohmann::json;

DropRelation parse_drop_relation(std::string_view name) {
    if (name.empty() || name == "none") return DropRelation::None;
    if (name == "importance") return DropRelation::Importance;
    if (name == "complementarity") return DropRelation::Complementarity;
    if (name == "inconsistency") return DropRelation::Inconsistency;
    throw std::invalid_argument("unknown relation '" + std::string(name) +
                                "' (expected importance, complementarity, inconsistency)");
}

std::string_view to_string(DropRelation relation) {
    switch (relation) {
    case DropRelation::None: return "none";
    case DropRelation::Importance: return "importance";
    case DropRelation::Complementarity: return "complementarity";
    case DropRelation::Inconsistency: return "inconsistency";
    }
    return "?";
}

std::string Ablation::label() const {
    if (classic_mode) {
        return "classic-" + std::string(srr::to_string(*classic_mode));
    }
    if (no_srr) {
        return "w/o SRR";
    }
    std::string out = "full";
    if (drop_relation != DropRelation::None) {
        out = "w/o " + std::string(to_string(drop_relation));
    }
    if (no_rank_loss) {
        out = out == "full" ? "w/o rank loss" : out + ", w/o rank loss";
    }
    return out;
}

Ablation parse_ablation_variant(std::string_view name) {
    Ablation a;
    if (name == "full") {
        return a;
    }
    if (name == "no-rank-loss") {
        a.no_rank_loss = true;
        return a;
    }
    if (name == "no-srr") {
        a.no_srr = true;
        return a;
    }
    if (name.rfind("drop-", 0) == 0) {
        a.drop_relation = parse_drop_relation(name.substr(5));
        return a;
    }
    if (name.rfind("classic-", 0) == 0) {
        a.classic_mode = srr::parse_classic_mode(name.substr(8));
        return a;
    }
    throw std::invalid_argument("unknown ablation variant '" + std::string(name) +
                                "' (expected full, no-rank-loss, no-srr, drop-<relation>, classic-<mode>)");
}

std::vector<Ablation> default_ablation_variants() {
    std::vector<Ablation> out;
    for (const char* name : {"full", "no-rank-loss", "no-srr", "drop-importance", "drop-complementarity",
                             "drop-inconsistency", "classic-or", "classic-and", "classic-not", "classic-combination"}) {
        out.push_back(parse_ablation_variant(name));
    }
    return out;
}

void RunConfig::validate() const {
    if (!dataset && !synth) {
        throw std::invalid_argument("config: either 'dataset' or 'synth' is required");
    }
    if (synth) {
        data::validate(*synth);
    }
    if (lambda < 0.0) {
        throw std::invalid_argument("config: lambda must be non-negative");
    }
    if (!(tau > 0.0)) {
        throw std::invalid_argument("config: tau must be positive");
    }
    if (!(optimizer.lr > 0.0) || optimizer.weight_decay < 0.0) {
        throw std::invalid_argument("config: lr must be positive and weight_decay non-negative");
    }
    if (batch_size == 0 || epochs == 0) {
        throw std::invalid_argument("config: batch_size and epochs must be positive");
    }
    if (seeds.empty()) {
        throw std::invalid_argument("config: seeds must be non-empty");
    }
    if (sinkhorn.max_iters < 0 || !(sinkhorn.tol > 0.0)) {
        throw std::invalid_argument("config: sinkhorn max_iters must be >= 0 and tol positive");
    }
}

namespace {

data::SynthSpec synth_from_json(const json& j) {
    data::SynthSpec s;
    s.seed = j.value("seed", s.seed);
    s.n_train = j.value("n_train", s.n_train);
    s.n_dev = j.value("n_dev", s.n_dev);
    s.n_test = j.value("n_test", s.n_test);
    s.d = j.value("d", s.d);
    s.classes = j.value("K", s.classes);
    s.separation = j.value("separation", s.separation);
    s.noise = j.value("noise", s.noise);
    s.signal_gain = j.value("signal_gain", s.signal_gain);
    s.slots = j.value("slots", s.slots);
    s.rank1_proportions = j.value("rank1_proportions", s.rank1_proportions);
    s.name = j.value("name", s.name);
    return s;
}

json synth_to_json(const data::SynthSpec& s) {
    return json{{"seed", s.seed},     {"n_train", s.n_train},       {"n_dev", s.n_dev},
                {"n_test", s.n_test}, {"d", s.d},                   {"K", s.classes},
                {"separation", s.separation}, {"noise", s.noise}, {"signal_gain", s.signal_gain},
                {"slots", s.slots},   {"rank1_proportions", s.rank1_proportions}, {"name", s.name}};
}

} // namespace

RunConfig parse_run_config(std::string_view json_text) {
    const json j = json::parse(json_text);
    RunConfig c;
    try {
        if (j.contains("dataset") && !j.at("dataset").is_null()) {
            c.dataset = j.at("dataset").get<std::string>();
        }
        if (j.contains("synth") && !j.at("synth").is_null()) {
            c.synth = synth_from_json(j.at("synth"));
        }
        if (j.contains("d")) c.d = j.at("d").get<std::size_t>();
        if (j.contains("K")) c.classes = j.at("K").get<std::size_t>();
        c.hidden = j.value("hidden", c.hidden);
        c.lambda = j.value("lambda", c.lambda);
        c.tau = j.value("tau", c.tau);
        c.optimizer.lr = j.value("lr", c.optimizer.lr);
        c.optimizer.weight_decay = j.value("weight_decay", c.optimizer.weight_decay);
        if (j.contains("betas")) {
            const auto betas = j.at("betas").get<std::vector<double>>();
            if (betas.size() != 2) {
                throw std::invalid_argument("config: betas must have two entries");
            }
            c.optimizer.beta1 = betas[0];
            c.optimizer.beta2 = betas[1];
        }
        c.optimizer.eps = j.value("eps", c.optimizer.eps);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.epochs = j.value("epochs", c.epochs);
        c.seeds = j.value("seeds", c.seeds);
        if (j.contains("sinkhorn")) {
            const json& s = j.at("sinkhorn");
            c.sinkhorn.max_iters = s.value("max_iters", c.sinkhorn.max_iters);
            c.sinkhorn.tol = s.value("tol", c.sinkhorn.tol);
            c.sinkhorn.enabled = s.value("enabled", c.sinkhorn.enabled);
        }
        if (j.contains("ablation")) {
            const json& a = j.at("ablation");
            c.ablation.no_rank_loss = a.value("no_rank_loss", false);
            c.ablation.no_srr = a.value("no_srr", false);
            if (a.contains("classic_mode") && !a.at("classic_mode").is_null()) {
                c.ablation.classic_mode = srr::parse_classic_mode(a.at("classic_mode").get<std::string>());
            }
            if (a.contains("drop_relation") && !a.at("drop_relation").is_null()) {
                c.ablation.drop_relation = parse_drop_relation(a.at("drop_relation").get<std::string>());
            }
        }
        c.out = j.value("out", c.out.string());
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

data::SynthSpec parse_synth_spec(std::string_view json_text) {
    const json j = json::parse(json_text);
    try {
        data::SynthSpec s = synth_from_json(j.contains("synth") ? j.at("synth") : j);
        data::validate(s);
        return s;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("synth spec: ") + e.what());
    }
}

RunConfig load_run_config(const std::filesystem::path& path) {
    RunConfig c = parse_run_config(io::read_file(path));
    if (c.dataset && c.dataset->is_relative()) {
        c.dataset = path.parent_path() / *c.dataset;
    }
    return c;
}

std::string to_json_text(const RunConfig& c) {
    json j;
    j["dataset"] = c.dataset ? json(c.dataset->string()) : json(nullptr);
    j["synth"] = c.synth ? synth_to_json(*c.synth) : json(nullptr);
    if (c.d) j["d"] = *c.d;
    if (c.classes) j["K"] = *c.classes;
    j["hidden"] = c.hidden;
    j["lambda"] = c.lambda;
    j["tau"] = c.tau;
    j["lr"] = c.optimizer.lr;
    j["weight_decay"] = c.optimizer.weight_decay;
    j["betas"] = {c.optimizer.beta1, c.optimizer.beta2};
    j["eps"] = c.optimizer.eps;
    j["batch_size"] = c.batch_size;
    j["epochs"] = c.epochs;
    j["seeds"] = c.seeds;
    j["sinkhorn"] = {{"max_iters", c.sinkhorn.max_iters}, {"tol", c.sinkhorn.tol}, {"enabled", c.sinkhorn.enabled}};
    j["ablation"] = {
        {"no_rank_loss", c.ablation.no_rank_loss},
        {"no_srr", c.ablation.no_srr},
        {"classic_mode", c.ablation.classic_mode ? json(std::string(srr::to_string(*c.ablation.classic_mode)))
                                                 : json(nullptr)},
        {"drop_relation", c.ablation.drop_relation == DropRelation::None
                              ? json(nullptr)
                              : json(std::string(to_string(c.ablation.drop_relation)))}};
    j["out"] = c.out.string();
    return j.dump(2);
}

data::Dataset materialize_dataset(const RunConfig& config) {
    data::Dataset ds = config.dataset ? data::load(*config.dataset) : data::synthesize(*config.synth);
    if (config.d && *config.d != ds.manifest.d) {
        throw std::invalid_argument("config declares d=" + std::to_string(*config.d) + " but dataset has d=" +
                                    std::to_string(ds.manifest.d));
    }
    if (config.classes && *config.classes != ds.manifest.classes) {
        throw std::invalid_argument("config declares K=" + std::to_string(*config.classes) +
                                    " but dataset has K=" + std::to_string(ds.manifest.classes));
    }
    return ds;
}

} // namespace lgsrr::train
