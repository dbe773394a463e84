#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "lgsrr/core/ops.hpp"
#include "lgsrr/train/adamw.hpp"
#include "lgsrr/train/config.hpp"
#include "lgsrr/train/metrics.hpp"
#include "lgsrr/train/trainer.hpp"
#include "lgsrr/io/digest.hpp"
#include "temp_dir.hpp"

using namespace lgsrr;
using namespace lgsrr::train;

namespace {

// pairwise count, no ties
double tau_oracle(const std::vector<std::size_t>& a_order, const std::vector<std::size_t>& b_order) {
    const std::size_t n = a_order.size();
    std::vector<std::size_t> pa(n), pb(n);
    for (std::size_t i = 0; i < n; ++i) {
        pa[a_order[i]] = i;
        pb[b_order[i]] = i;
    }
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            s += ((pa[i] < pa[j]) == (pb[i] < pb[j])) ? 1 : -1;
        }
    }
    return s / (n * (n - 1) / 2.0);
}

// alpha = softmax over the first coordinate of each slot feature
Model probe_model() {
    srr::SrrParams p = srr::SrrParams::init(2, 1, 2, 0);
    p.w1 = Mat{{1, 0}};
    p.b1 = Vec{0};
    p.w2 = Mat{{1}};
    p.b2 = Vec{0};
    return Model{p, {}};
}

data::FeatureRecord probe_record(const std::string& id, const std::vector<double>& scores,
                                 std::vector<std::size_t> ranking) {
    data::FeatureRecord r;
    r.sample_id = id;
    r.features.text = Vec{scores[0], 1};
    for (std::size_t m = 1; m < scores.size(); ++m) r.features.fine.push_back(Vec{scores[m], 1});
    r.ranking = std::move(ranking);
    return r;
}

data::SynthSpec tiny_spec(double noise = 0.5) {
    data::SynthSpec s;
    s.n_train = 200;
    s.n_dev = 80;
    s.n_test = 80;
    s.d = 8;
    s.classes = 3;
    s.noise = noise;
    return s;
}

RunConfig tiny_config(double noise = 0.5) {
    RunConfig c;
    c.synth = tiny_spec(noise);
    c.epochs = 5;
    c.seeds = {0};
    return c;
}

} // namespace

TEST_CASE("metrics: 10-sample 3-class fixture") {
    const std::vector<std::size_t> truth{0, 0, 0, 0, 1, 1, 1, 2, 2, 2};
    const std::vector<std::size_t> pred{0, 0, 1, 2, 1, 1, 0, 2, 2, 1};
    const MetricsReport m = compute_metrics(truth, pred, 3);
    // confusion rows 0: [2,1,1], 1: [1,2,0], 2: [0,1,2]
    CHECK(m.confusion == std::vector<std::vector<std::size_t>>{{2, 1, 1}, {1, 2, 0}, {0, 1, 2}});
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(std::accumulate(m.confusion[c].begin(), m.confusion[c].end(), std::size_t{0}) == m.support[c]);
    }
    const double tol = 1e-12;
    CHECK(std::abs(m.acc - 60.0) <= tol);
    CHECK(std::abs(m.macro_p - 100.0 * 11.0 / 18.0) <= tol);
    CHECK(std::abs(m.macro_r - 100.0 * 11.0 / 18.0) <= tol);
    CHECK(std::abs(m.macro_f1 - 100.0 * 38.0 / 63.0) <= tol);
    CHECK(std::abs(m.weighted_f1 - 60.0) <= tol);
    CHECK(std::abs(m.weighted_p - 100.0 * 37.0 / 60.0) <= tol);
    CHECK(std::abs(m.f1[0] - 100.0 * 4.0 / 7.0) <= tol);
    CHECK(m.weighted_f1 >= *std::min_element(m.f1.begin(), m.f1.end()));
    CHECK(m.weighted_f1 <= *std::max_element(m.f1.begin(), m.f1.end()));
    CHECK(m.notes.empty());
    CHECK(m.confusion_csv(std::vector<std::string>{"a", "b", "c"}) ==
          "true\\pred,a,b,c\na,2,1,1\nb,1,2,0\nc,0,1,2\n");
}

TEST_CASE("metrics: perfect and degenerate predictors") {
    const std::vector<std::size_t> truth{0, 1, 2, 2, 1, 0};
    const MetricsReport p = compute_metrics(truth, truth, 3);
    for (double v : {p.acc, p.macro_f1, p.macro_p, p.macro_r, p.weighted_f1, p.weighted_p}) CHECK(v == 100.0);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) CHECK((i == j) == (p.confusion[i][j] > 0));
    }

    const std::vector<std::size_t> two{0, 0, 1, 1};
    const std::vector<std::size_t> zeros{0, 0, 0, 0};
    const MetricsReport d = compute_metrics(two, zeros, 2);
    CHECK(d.acc == 50.0);
    CHECK(std::abs(d.macro_f1 - 100.0 / 3.0) <= 1e-12);

    const MetricsReport absent = compute_metrics(two, two, 3);
    CHECK(absent.notes.size() == 1);
    CHECK(std::abs(absent.macro_f1 - 200.0 / 3.0) <= 1e-12);

    CHECK_THROWS_AS(compute_metrics(std::vector<std::size_t>{}, std::vector<std::size_t>{}, 2), std::invalid_argument);
    CHECK_THROWS_AS(compute_metrics(two, zeros, 1), std::invalid_argument);
}

TEST_CASE("kendall tau") {
    const std::vector<double> a{4, 3, 2, 1};
    CHECK(kendall_tau(a, a) == 1.0);
    const std::vector<double> r{1, 2, 3, 4};
    CHECK(kendall_tau(a, r) == -1.0);
    const std::vector<double> b{4, 3, 1, 2};
    CHECK(kendall_tau(a, b) == doctest::Approx(4.0 / 6.0));
    const std::vector<double> tied{1, 1, 1, 1};
    CHECK(kendall_tau(a, tied) == 0.0);
}

TEST_CASE("adamw") {
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    std::vector<double> p{0.5, -1.0, 2.0};
    const std::vector<double> zero(3, 0.0);
    AdamWState st;
    adamw_step(p, zero, st, cfg);
    CHECK(p == std::vector<double>{0.5, -1.0, 2.0});

    // one step from zero state: m_hat = g, v_hat = g^2
    AdamWConfig c2;
    c2.lr = 0.1;
    c2.weight_decay = 0.01;
    std::vector<double> q{1.0, -2.0, 0.0};
    const std::vector<double> g{0.3, -4.0, 1e-3};
    AdamWState s2;
    adamw_step(q, g, s2, c2);
    const std::vector<double> start{1.0, -2.0, 0.0};
    for (std::size_t i = 0; i < 3; ++i) {
        const double expect = start[i] * (1 - 0.1 * 0.01) - 0.1 * g[i] / (std::abs(g[i]) + 1e-8);
        CHECK(q[i] == doctest::Approx(expect).epsilon(1e-14));
    }
    CHECK(s2.step == 1);

    // second step against an independent recurrence
    const std::vector<double> g2{-0.1, 1.0, 2.0};
    std::vector<double> ref = q;
    adamw_step(q, g2, s2, c2);
    for (std::size_t i = 0; i < 3; ++i) {
        const double m = 0.9 * (0.1 * g[i]) + 0.1 * g2[i];
        const double v = 0.999 * (0.001 * g[i] * g[i]) + 0.001 * g2[i] * g2[i];
        const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
        const double expect = ref[i] * (1 - 0.001) - 0.1 * mh / (std::sqrt(vh) + 1e-8);
        CHECK(q[i] == doctest::Approx(expect).epsilon(1e-13));
    }

    AdamWConfig c3;
    c3.lr = 0.01;
    c3.weight_decay = 0.5;
    std::vector<double> w{2.0, -3.0};
    AdamWState s3;
    adamw_step(w, std::vector<double>{0, 0}, s3, c3);
    CHECK(w[0] == doctest::Approx(2.0 * (1 - 0.005)).epsilon(1e-15));
    CHECK(w[1] == doctest::Approx(-3.0 * (1 - 0.005)).epsilon(1e-15));
}

TEST_CASE("rank_agreement") {
    const Model m = probe_model();
    // identical orderings
    std::vector<data::FeatureRecord> same{probe_record("a", {4, 3, 2, 1}, {0, 1, 2, 3}),
                                          probe_record("b", {4, 1, 3, 2}, {0, 2, 3, 1})};
    CHECK(*rank_agreement(m, same) == doctest::Approx(1.0).epsilon(1e-12));

    // fine slots reversed, T still first
    std::vector<data::FeatureRecord> rev{probe_record("a", {4, 1, 2, 3}, {0, 1, 2, 3}),
                                         probe_record("b", {4, 2, 3, 1}, {0, 3, 1, 2})};
    double lowest = 1e9;
    std::vector<std::size_t> fine{1, 2, 3};
    do {
        std::vector<std::size_t> order{0};
        order.insert(order.end(), fine.begin(), fine.end());
        lowest = std::min(lowest, tau_oracle(order, {0, 1, 2, 3}));
    } while (std::next_permutation(fine.begin(), fine.end()));
    CHECK(*rank_agreement(m, rev) == doctest::Approx(lowest).epsilon(1e-12));

    // random alphas against random T-first targets
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.01, 5.0);
    std::vector<data::FeatureRecord> rnd;
    for (int i = 0; i < 4000; ++i) {
        std::vector<std::size_t> rest{1, 2, 3};
        std::shuffle(rest.begin(), rest.end(), rng);
        rnd.push_back(probe_record("r" + std::to_string(i), {u(rng), u(rng), u(rng), u(rng)},
                                   {0, rest[0], rest[1], rest[2]}));
    }
    CHECK(std::abs(*rank_agreement(m, rnd)) < 0.03);

    rnd[10].ranking.reset();
    CHECK_THROWS_WITH_AS(rank_agreement(m, rnd), doctest::Contains("r10"), std::invalid_argument);

    const Model classic{srr::ClassicParams::init(srr::ClassicMode::Or, 2, 3, 2, 0), {}};
    CHECK_FALSE(rank_agreement(classic, same).has_value());
}

TEST_CASE("config parsing and ablation labels") {
    const RunConfig c = parse_run_config(R"({"synth": {"d": 8, "K": 3, "n_train": 10}, "lambda": 0.1,
        "seeds": [3], "ablation": {"drop_relation": "inconsistency", "no_rank_loss": true}})");
    CHECK(c.synth->d == 8);
    CHECK(c.synth->n_train == 10);
    CHECK(c.lambda == 0.1);
    CHECK(c.seeds == std::vector<std::uint64_t>{3});
    CHECK(c.ablation.label() == "w/o inconsistency, w/o rank loss");
    const RunConfig back = parse_run_config(to_json_text(c));
    CHECK(to_json_text(back) == to_json_text(c));

    CHECK_THROWS_AS(parse_run_config(R"({"lambda": 1})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_run_config(R"({"synth": {}, "lambda": -1})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_run_config(R"({"synth": {}, "tau": 0})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_run_config(R"({"synth": {}, "ablation": {"drop_relation": "x"}})"), std::invalid_argument);
    CHECK_THROWS_AS(parse_run_config(R"({"synth": {}, "epochs": "many"})"), std::invalid_argument);

    CHECK(parse_ablation_variant("full").label() == "full");
    CHECK(parse_ablation_variant("no-srr").label() == "w/o SRR");
    CHECK(parse_ablation_variant("classic-and").label() == "classic-and");
    CHECK(parse_ablation_variant("drop-importance").label() == "w/o importance");
    CHECK(default_ablation_variants().size() == 10);
    CHECK_THROWS_AS(parse_ablation_variant("bogus"), std::invalid_argument);
}

TEST_CASE("materialize checks declared shape") {
    RunConfig c = tiny_config();
    c.d = 9;
    CHECK_THROWS_WITH_AS(materialize_dataset(c), doctest::Contains("d=9"), std::invalid_argument);
}

TEST_CASE("batch loss: no_rank_loss equals classification") {
    RunConfig c = tiny_config();
    const data::Dataset ds = materialize_dataset(c);
    std::vector<const data::FeatureRecord*> batch;
    for (std::size_t i = 0; i < 16; ++i) batch.push_back(&ds.train[i]);
    const Model m = make_model(c, ds.manifest, 0);
    const BatchLoss full = batch_loss(m, batch, c);
    CHECK(full.ranking != 0.0);
    CHECK(full.loss != doctest::Approx(full.classification));
    c.ablation.no_rank_loss = true;
    const BatchLoss ce = batch_loss(m, batch, c);
    CHECK(ce.loss == ce.classification);
    CHECK(ce.classification == doctest::Approx(full.classification).epsilon(1e-14));
    double mean = 0;
    for (const auto* r : batch) mean += cross_entropy(m.logits(r->features), r->label) / 16.0;
    CHECK(ce.loss == doctest::Approx(mean).epsilon(1e-13));
}

TEST_CASE("make_model dispatch") {
    RunConfig c = tiny_config();
    const data::Dataset ds = materialize_dataset(c);
    CHECK(make_model(c, ds.manifest, 0).kind() == "srr");
    CHECK(std::get<srr::SrrParams>(make_model(c, ds.manifest, 0).params).hidden() == 4);
    c.ablation.no_srr = true;
    CHECK(make_model(c, ds.manifest, 0).kind() == "classic-or");
    c.ablation.no_srr = false;
    c.ablation.classic_mode = srr::ClassicMode::Not;
    CHECK(make_model(c, ds.manifest, 0).kind() == "classic-not");
    c.ablation.classic_mode.reset();
    c.ablation.drop_relation = DropRelation::Importance;
    const Model m = make_model(c, ds.manifest, 0);
    CHECK_FALSE(m.relations.importance);
    CHECK_FALSE(m.alpha(ds.train[0].features).has_value());
}

TEST_CASE("separable data trains to high dev accuracy") {
    RunConfig c = tiny_config(0.0);
    c.epochs = 20;
    const data::Dataset ds = materialize_dataset(c);
    const SeedResult r = train_single(c, ds, 0);
    CHECK(r.dev.acc >= 99.0);
    CHECK(r.curve.size() == 20);
    CHECK(r.best_epoch >= 1);
    CHECK(r.best_epoch <= 20);
    CHECK(r.rank_agreement.has_value());
    std::size_t total = 0;
    for (const auto& row : r.test.confusion) total += std::accumulate(row.begin(), row.end(), std::size_t{0});
    CHECK(total == ds.test.size());
}

TEST_CASE("classic Or path trains end to end") {
    RunConfig c = tiny_config();
    c.ablation.classic_mode = srr::ClassicMode::Or;
    c.epochs = 40;
    const data::Dataset ds = materialize_dataset(c);
    const TrainResult r = train::train(c, ds);
    CHECK(r.label == "classic-or");
    CHECK(r.seeds.front().best.kind() == "classic-or");
    CHECK_FALSE(r.seeds.front().rank_agreement.has_value());
    CHECK(r.seeds.front().test.acc > 50.0);
    CHECK(r.summary.count("rank_agreement") == 0);
}

TEST_CASE("training is deterministic and checkpoints round-trip") {
    RunConfig c = tiny_config();
    c.seeds = {0, 1};
    const data::Dataset ds = materialize_dataset(c);
    const TrainResult a = train::train(c, ds);
    const TrainResult b = train::train(c, ds);
    for (std::size_t s = 0; s < 2; ++s) {
        CHECK(a.seeds[s].test.acc == b.seeds[s].test.acc);
        CHECK(a.seeds[s].test.weighted_f1 == b.seeds[s].test.weighted_f1);
        CHECK(a.seeds[s].best.to_json() == b.seeds[s].best.to_json());
    }
    CHECK(a.seeds[0].best.to_json() != a.seeds[1].best.to_json());
    CHECK(a.summary.at("acc").mean == doctest::Approx((a.seeds[0].test.acc + a.seeds[1].test.acc) / 2));

    const Model& m = a.seeds[0].best;
    const Model back = Model::from_json(m.to_json());
    CHECK(back.to_json() == m.to_json());
    for (std::size_t i = 0; i < 10; ++i) CHECK(back.logits(ds.test[i].features) == m.logits(ds.test[i].features));

    testing::TempDir tmp("reports");
    write_reports(a, ds, tmp.path);
    for (const char* f : {"report.json", "report.txt", "seed_0/checkpoint.json", "seed_1/curves.json",
                          "seed_0/confusion_test.csv", "seed_0/confusion_dev.csv"}) {
        CHECK(std::filesystem::exists(tmp.path / f));
    }
    CHECK(Model::from_json(io::read_file(tmp.path / "seed_0" / "checkpoint.json")).to_json() == m.to_json());
}

TEST_CASE("evaluate rejects an empty split") {
    const Model m = probe_model();
    CHECK_THROWS_AS(evaluate(m, std::vector<data::FeatureRecord>{}, 2), std::invalid_argument);
}

TEST_CASE("non-finite loss aborts with context") {
    RunConfig c = tiny_config();
    c.optimizer.lr = 1e300;
    c.optimizer.weight_decay = 0.0;
    const data::Dataset ds = materialize_dataset(c);
    try {
        train_single(c, ds, 0);
        FAIL("expected abort");
    } catch (const NonFiniteLoss& e) {
        const std::string msg = e.what();
        CHECK(msg.find("seed 0") != std::string::npos);
        CHECK(msg.find("epoch") != std::string::npos);
        CHECK(msg.find("lr=") != std::string::npos);
    }
}

TEST_CASE("ablation rows report deltas against the first variant") {
    RunConfig c = tiny_config();
    c.epochs = 3;
    const data::Dataset ds = materialize_dataset(c);
    const std::vector<Ablation> variants{parse_ablation_variant("full"), parse_ablation_variant("drop-complementarity")};
    const auto rows = run_ablations(c, ds, variants);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].delta.at("acc") == 0.0);
    CHECK(rows[1].delta.at("acc") ==
          doctest::Approx(rows[1].result.summary.at("acc").mean - rows[0].result.summary.at("acc").mean));
    CHECK(ablation_table(rows).find("w/o complementarity") != std::string::npos);
}
