#include "lgsrr/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "lgsrr/core/autodiff.hpp"
#include "lgsrr/io/digest.hpp"
#include "lgsrr/train/adamw.hpp"

namespace lgsrr::train {

using nlohmann::json;

namespace {

srr::Relations relations_for(const Ablation& a) {
    srr::Relations r;
    r.importance = a.drop_relation != DropRelation::Importance;
    r.complementarity = a.drop_relation != DropRelation::Complementarity;
    r.inconsistency = a.drop_relation != DropRelation::Inconsistency;
    return r;
}

std::optional<srr::ClassicMode> classic_for(const Ablation& a) {
    if (a.classic_mode) {
        return a.classic_mode;
    }
    if (a.no_srr) {
        return srr::ClassicMode::Or;
    }
    return std::nullopt;
}

std::size_t argmax(const Vec& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

json metrics_json(const MetricsReport& m) {
    return json{{"acc", m.acc},
                {"macro_f1", m.macro_f1},
                {"macro_p", m.macro_p},
                {"macro_r", m.macro_r},
                {"weighted_f1", m.weighted_f1},
                {"weighted_p", m.weighted_p},
                {"per_class_accuracy", m.recall},
                {"precision", m.precision},
                {"f1", m.f1},
                {"support", m.support},
                {"confusion", m.confusion},
                {"total", m.total},
                {"notes", m.notes}};
}

double metric_value(const MetricsReport& m, const std::string& name) {
    if (name == "acc") return m.acc;
    if (name == "macro_f1") return m.macro_f1;
    if (name == "macro_p") return m.macro_p;
    if (name == "macro_r") return m.macro_r;
    if (name == "weighted_f1") return m.weighted_f1;
    if (name == "weighted_p") return m.weighted_p;
    throw std::invalid_argument("unknown metric " + name);
}

SummaryStat summarize(const std::vector<double>& xs) {
    SummaryStat s;
    if (xs.empty()) {
        return s;
    }
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) {
            ss += (x - s.mean) * (x - s.mean);
        }
        s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return s;
}

std::string fixed(double x, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

} // namespace

// Model

std::string Model::kind() const {
    if (const auto* c = std::get_if<srr::ClassicParams>(&params)) {
        return "classic-" + std::string(srr::to_string(c->mode));
    }
    return "srr";
}

Vec Model::logits(const srr::SemanticBundle& bundle) const {
    if (const auto* p = std::get_if<srr::SrrParams>(&params)) {
        return srr::forward(bundle, *p, relations).logits;
    }
    const auto& c = std::get<srr::ClassicParams>(params);
    return srr::classic_fuse(bundle, c.mode, c);
}

std::optional<Vec> Model::alpha(const srr::SemanticBundle& bundle) const {
    const auto* p = std::get_if<srr::SrrParams>(&params);
    if (p == nullptr || !relations.importance) {
        return std::nullopt;
    }
    return srr::importance(bundle, *p);
}

std::vector<std::span<double>> Model::tensors() {
    return std::visit([](auto& p) { return p.tensors(); }, params);
}

std::vector<std::span<const double>> Model::tensors() const {
    return std::visit([](const auto& p) { return p.tensors(); }, params);
}

std::string Model::to_json() const {
    json j;
    j["kind"] = kind();
    j["relations"] = {{"importance", relations.importance},
                      {"complementarity", relations.complementarity},
                      {"inconsistency", relations.inconsistency}};
    if (const auto* p = std::get_if<srr::SrrParams>(&params)) {
        j["shape"] = {{"d", p->dim()}, {"h", p->hidden()}, {"K", p->classes()}};
    } else {
        const auto& c = std::get<srr::ClassicParams>(params);
        const std::size_t d = c.w_cls.cols();
        j["shape"] = {{"d", d}, {"K", c.w_cls.rows()}, {"fine", c.w_not.cols() == 0 ? 1 : c.w_not.cols() / d}};
    }
    json blocks = json::array();
    for (const auto t : tensors()) {
        blocks.push_back(std::vector<double>(t.begin(), t.end()));
    }
    j["tensors"] = std::move(blocks);
    return j.dump();
}

Model Model::from_json(std::string_view text) {
    const json j = json::parse(text);
    Model m;
    const std::string kind = j.at("kind").get<std::string>();
    const json& rel = j.at("relations");
    m.relations.importance = rel.at("importance").get<bool>();
    m.relations.complementarity = rel.at("complementarity").get<bool>();
    m.relations.inconsistency = rel.at("inconsistency").get<bool>();
    const json& shape = j.at("shape");
    if (kind == "srr") {
        m.params = srr::SrrParams::init(shape.at("d"), shape.at("h"), shape.at("K"), 0);
    } else if (kind.rfind("classic-", 0) == 0) {
        m.params = srr::ClassicParams::init(srr::parse_classic_mode(kind.substr(8)), shape.at("d"),
                                            shape.at("fine"), shape.at("K"), 0);
    } else {
        throw std::invalid_argument("checkpoint: unknown model kind '" + kind + "'");
    }
    const json& blocks = j.at("tensors");
    auto dst = m.tensors();
    if (blocks.size() != dst.size()) {
        throw std::invalid_argument("checkpoint: expected " + std::to_string(dst.size()) + " tensors, found " +
                                    std::to_string(blocks.size()));
    }
    for (std::size_t t = 0; t < dst.size(); ++t) {
        const auto values = blocks[t].get<std::vector<double>>();
        if (values.size() != dst[t].size()) {
            throw std::invalid_argument("checkpoint: tensor " + std::to_string(t) + " has " +
                                        std::to_string(values.size()) + " values, expected " +
                                        std::to_string(dst[t].size()));
        }
        std::copy(values.begin(), values.end(), dst[t].begin());
    }
    return m;
}

Model make_model(const RunConfig& config, const data::DatasetManifest& manifest, std::uint64_t seed) {
    Model m;
    m.relations = relations_for(config.ablation);
    if (const auto mode = classic_for(config.ablation)) {
        m.params = srr::ClassicParams::init(*mode, manifest.d, manifest.slots.size(), manifest.classes, seed);
    } else {
        const std::size_t hidden = config.hidden == 0 ? std::max<std::size_t>(1, manifest.d / 2) : config.hidden;
        m.params = srr::SrrParams::init(manifest.d, hidden, manifest.classes, seed);
    }
    return m;
}

// Objective

BatchLoss batch_loss(const Model& model, std::span<const data::FeatureRecord* const> batch,
                     const RunConfig& config) {
    if (batch.empty()) {
        throw std::invalid_argument("batch_loss: empty batch");
    }
    BatchLoss out;
    if (const auto* p = std::get_if<srr::SrrParams>(&model.params)) {
        std::vector<ndcg::RankingTarget> targets;
        targets.reserve(batch.size());
        std::vector<srr::Example> examples;
        examples.reserve(batch.size());
        for (const data::FeatureRecord* r : batch) {
            srr::Example ex{&r->features, r->label, nullptr};
            if (r->ranking) {
                targets.push_back(r->target());
                ex.target = &targets.back();
            }
            examples.push_back(ex);
        }
        srr::LossOptions opts;
        opts.lambda = config.ablation.no_rank_loss ? 0.0 : config.lambda;
        opts.tau = config.tau;
        opts.sinkhorn = config.sinkhorn;
        opts.relations = model.relations;
        const srr::SrrLoss l = srr::srr_loss(examples, *p, opts);
        out.loss = l.loss;
        out.classification = l.classification;
        out.ranking = opts.lambda > 0.0 && model.relations.importance ? l.ranking : 0.0;
        for (const auto t : l.grad.tensors()) {
            out.grads.emplace_back(t.begin(), t.end());
        }
        return out;
    }

    const auto& c = std::get<srr::ClassicParams>(model.params);
    for (const auto t : c.tensors()) {
        out.grads.emplace_back(t.size(), 0.0);
    }
    const double n = static_cast<double>(batch.size());
    ad::Tape tape;
    for (const data::FeatureRecord* r : batch) {
        tape.clear();
        const srr::ClassicParamVars vars = srr::ClassicParamVars::record(tape, c, true);
        const srr::ClassicGraph g = srr::build_classic_graph(tape, c, vars, r->features);
        const ad::Var ce = ad::cross_entropy(g.logits, r->label);
        out.classification += ce.scalar() / n;
        tape.backward(ad::scale(ce, 1.0 / n));
        const ad::Var leaves[] = {vars.w_not, vars.b_not, vars.w_comb, vars.b_comb, vars.w_cls, vars.b_cls};
        for (std::size_t t = 0; t < out.grads.size(); ++t) {
            const auto g_t = tape.grad(leaves[t].id());
            for (std::size_t i = 0; i < g_t.size(); ++i) {
                out.grads[t][i] += g_t[i];
            }
        }
    }
    out.loss = out.classification;
    return out;
}

// Evaluation

MetricsReport evaluate(const Model& model, std::span<const data::FeatureRecord> split, std::size_t classes) {
    if (split.empty()) {
        throw std::invalid_argument("evaluate: split is empty");
    }
    std::vector<std::size_t> truth;
    std::vector<std::size_t> pred;
    truth.reserve(split.size());
    pred.reserve(split.size());
    for (const data::FeatureRecord& r : split) {
        truth.push_back(r.label);
        pred.push_back(argmax(model.logits(r.features)));
    }
    return compute_metrics(truth, pred, classes);
}

std::optional<double> rank_agreement(const Model& model, std::span<const data::FeatureRecord> split) {
    if (split.empty() || !model.alpha(split.front().features)) {
        return std::nullopt;
    }
    double total = 0.0;
    for (const data::FeatureRecord& r : split) {
        if (!r.ranking) {
            throw std::invalid_argument("rank_agreement: sample " + r.sample_id + " has no ranking");
        }
        // the target pins T first; alpha is compared as learned
        const Vec alpha = *model.alpha(r.features);
        const Vec relevance = r.target().relevance();
        total += kendall_tau(alpha.span(), relevance.span());
    }
    return total / static_cast<double>(split.size());
}

// Training

SeedResult train_single(const RunConfig& config, const data::Dataset& dataset, std::uint64_t seed,
                        const EpochCallback& on_epoch) {
    config.validate();
    if (dataset.train.empty()) {
        throw std::invalid_argument("train: training split is empty");
    }
    const auto start = std::chrono::steady_clock::now();
    const std::size_t classes = dataset.manifest.classes;
    SeedResult res;
    res.seed = seed;
    Model model = make_model(config, dataset.manifest, seed);
    res.best = model;
    double best_wf1 = -1.0;
    AdamW opt(config.optimizer);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);

    std::vector<const data::FeatureRecord*> order;
    order.reserve(dataset.train.size());
    for (const auto& r : dataset.train) {
        order.push_back(&r);
    }
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        EpochLog log;
        log.seed = seed;
        log.epoch = epoch;
        std::size_t batch_id = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++batch_id) {
            const std::size_t end = std::min(order.size(), begin + config.batch_size);
            const std::span<const data::FeatureRecord* const> batch(order.data() + begin, end - begin);
            const BatchLoss l = batch_loss(model, batch, config);
            bool finite = std::isfinite(l.loss);
            for (const auto& g : l.grads) {
                finite = finite && std::all_of(g.begin(), g.end(), [](double x) { return std::isfinite(x); });
            }
            if (!finite) {
                throw NonFiniteLoss("non-finite loss " + std::to_string(l.loss) + " at seed " +
                                    std::to_string(seed) + ", epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(batch_id) + " (lr=" + std::to_string(config.optimizer.lr) +
                                    ")");
            }
            const double w = static_cast<double>(batch.size()) / static_cast<double>(order.size());
            log.train_loss += w * l.loss;
            log.train_classification += w * l.classification;
            log.train_ranking += w * l.ranking;
            std::vector<std::span<const double>> grads(l.grads.begin(), l.grads.end());
            opt.step(model.tensors(), grads);
        }
        const MetricsReport dev = evaluate(model, dataset.dev, classes);
        log.dev_acc = dev.acc;
        log.dev_wf1 = dev.weighted_f1;
        if (dev.weighted_f1 >= best_wf1) {
            best_wf1 = dev.weighted_f1;
            res.best = model;
            res.best_epoch = epoch;
        }
        res.curve.push_back(log);
        if (on_epoch) {
            on_epoch(log);
        }
    }
    res.train = evaluate(res.best, dataset.train, classes);
    res.dev = evaluate(res.best, dataset.dev, classes);
    res.test = evaluate(res.best, dataset.test, classes);
    const bool ranked = std::all_of(dataset.test.begin(), dataset.test.end(),
                                    [](const data::FeatureRecord& r) { return r.ranking.has_value(); });
    if (ranked) {
        res.rank_agreement = rank_agreement(res.best, dataset.test);
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

std::vector<std::string> summary_metric_names() {
    return {"acc", "macro_f1", "macro_p", "macro_r", "weighted_f1", "weighted_p", "rank_agreement"};
}

TrainResult train(const RunConfig& config, const data::Dataset& dataset, const EpochCallback& on_epoch) {
    config.validate();
    TrainResult out;
    out.label = config.ablation.label();
    for (std::uint64_t seed : config.seeds) {
        out.seeds.push_back(train_single(config, dataset, seed, on_epoch));
    }
    for (const std::string& name : summary_metric_names()) {
        std::vector<double> xs;
        for (const SeedResult& s : out.seeds) {
            if (name == "rank_agreement") {
                if (s.rank_agreement) {
                    xs.push_back(*s.rank_agreement);
                }
            } else {
                xs.push_back(metric_value(s.test, name));
            }
        }
        if (!xs.empty()) {
            out.summary[name] = summarize(xs);
        }
    }
    return out;
}

// Reports

namespace {

json summary_json(const TrainResult& r) {
    json s = json::object();
    for (const auto& [name, stat] : r.summary) {
        s[name] = {{"mean", stat.mean}, {"std", stat.stddev}};
    }
    return s;
}

std::string summary_table(const TrainResult& r) {
    std::ostringstream out;
    out << "run: " << r.label << " (" << r.seeds.size() << " seed" << (r.seeds.size() == 1 ? "" : "s") << ")\n";
    out << "metric\tmean\tstd\n";
    for (const std::string& name : summary_metric_names()) {
        const auto it = r.summary.find(name);
        if (it != r.summary.end()) {
            const int digits = name == "rank_agreement" ? 4 : 2;
            out << name << '\t' << fixed(it->second.mean, digits) << '\t' << fixed(it->second.stddev, digits)
                << '\n';
        }
    }
    out << "\nseed\tbest_epoch\tACC\tWF1\tWP\tF1\tP\tR\trank_agreement\tseconds\n";
    for (const SeedResult& s : r.seeds) {
        out << s.seed << '\t' << s.best_epoch << '\t' << fixed(s.test.acc) << '\t' << fixed(s.test.weighted_f1)
            << '\t' << fixed(s.test.weighted_p) << '\t' << fixed(s.test.macro_f1) << '\t' << fixed(s.test.macro_p)
            << '\t' << fixed(s.test.macro_r) << '\t' << (s.rank_agreement ? fixed(*s.rank_agreement, 4) : "-")
            << '\t' << fixed(s.seconds, 1) << '\n';
    }
    for (const SeedResult& s : r.seeds) {
        for (const std::string& note : s.test.notes) {
            out << "note (seed " << s.seed << "): " << note << '\n';
        }
    }
    return out.str();
}

} // namespace

void write_reports(const TrainResult& result, const data::Dataset& dataset, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json seeds = json::array();
    for (const SeedResult& s : result.seeds) {
        const auto sub = dir / ("seed_" + std::to_string(s.seed));
        std::filesystem::create_directories(sub);
        io::write_file_atomic(sub / "checkpoint.json", s.best.to_json() + "\n");
        json curve = json::array();
        for (const EpochLog& e : s.curve) {
            curve.push_back({{"epoch", e.epoch},
                             {"train_loss", e.train_loss},
                             {"train_classification", e.train_classification},
                             {"train_ranking", e.train_ranking},
                             {"dev_acc", e.dev_acc},
                             {"dev_wf1", e.dev_wf1}});
        }
        io::write_file_atomic(sub / "curves.json", curve.dump(2) + "\n");
        io::write_file_atomic(sub / "confusion_dev.csv", s.dev.confusion_csv(dataset.manifest.labels));
        io::write_file_atomic(sub / "confusion_test.csv", s.test.confusion_csv(dataset.manifest.labels));
        seeds.push_back({{"seed", s.seed},
                         {"best_epoch", s.best_epoch},
                         {"seconds", s.seconds},
                         {"rank_agreement", s.rank_agreement ? json(*s.rank_agreement) : json(nullptr)},
                         {"train", metrics_json(s.train)},
                         {"dev", metrics_json(s.dev)},
                         {"test", metrics_json(s.test)}});
    }
    const json report = {{"label", result.label},
                         {"dataset", dataset.manifest.name},
                         {"summary", summary_json(result)},
                         {"seeds", std::move(seeds)}};
    io::write_file_atomic(dir / "report.json", report.dump(2) + "\n");
    io::write_file_atomic(dir / "report.txt", summary_table(result));
}

std::vector<AblationRow> run_ablations(const RunConfig& base, const data::Dataset& dataset,
                                       std::span<const Ablation> variants, const EpochCallback& on_epoch) {
    if (variants.empty()) {
        throw std::invalid_argument("run_ablations: no variants");
    }
    std::vector<AblationRow> rows;
    for (const Ablation& a : variants) {
        RunConfig c = base;
        c.ablation = a;
        AblationRow row;
        row.label = a.label();
        row.result = train(c, dataset, on_epoch);
        rows.push_back(std::move(row));
    }
    const auto& ref = rows.front().result.summary;
    for (AblationRow& row : rows) {
        for (const auto& [name, stat] : row.result.summary) {
            const auto it = ref.find(name);
            if (it != ref.end()) {
                row.delta[name] = stat.mean - it->second.mean;
            }
        }
    }
    return rows;
}

std::string ablation_table(std::span<const AblationRow> rows) {
    std::ostringstream out;
    out << "variant";
    const auto names = summary_metric_names();
    for (const std::string& n : names) {
        out << '\t' << n << "\tdelta";
    }
    out << '\n';
    for (const AblationRow& row : rows) {
        out << row.label;
        for (const std::string& n : names) {
            const auto it = row.result.summary.find(n);
            if (it == row.result.summary.end()) {
                out << "\t-\t-";
                continue;
            }
            const int digits = n == "rank_agreement" ? 4 : 2;
            const double delta = row.delta.count(n) ? row.delta.at(n) : 0.0;
            out << '\t' << fixed(it->second.mean, digits) << '\t' << (delta >= 0 ? "+" : "") << fixed(delta, digits);
        }
        out << '\n';
    }
    return out.str();
}

void write_ablation_report(std::span<const AblationRow> rows, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json j = json::array();
    for (const AblationRow& row : rows) {
        json per_seed = json::array();
        for (const SeedResult& s : row.result.seeds) {
            per_seed.push_back({{"seed", s.seed},
                                {"acc", s.test.acc},
                                {"macro_f1", s.test.macro_f1},
                                {"weighted_f1", s.test.weighted_f1},
                                {"rank_agreement", s.rank_agreement ? json(*s.rank_agreement) : json(nullptr)}});
        }
        j.push_back({{"variant", row.label},
                     {"summary", summary_json(row.result)},
                     {"delta", row.delta},
                     {"seeds", std::move(per_seed)}});
    }
    io::write_file_atomic(dir / "ablation.json", j.dump(2) + "\n");
    io::write_file_atomic(dir / "ablation.txt", ablation_table(rows));
}

} // namespace lgsrr::train
