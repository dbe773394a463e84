#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "lgsrr/core/ops.hpp"
#include "lgsrr/data/dataset.hpp"
#include "lgsrr/io/digest.hpp"
#include "temp_dir.hpp"

using namespace lgsrr;
using namespace lgsrr::data;

namespace {

SynthSpec small_spec(std::uint64_t seed = 0) {
    SynthSpec s;
    s.seed = seed;
    s.n_train = 60;
    s.n_dev = 20;
    s.n_test = 20;
    s.d = 6;
    s.classes = 3;
    return s;
}

std::string dir_digest(const std::filesystem::path& manifest) {
    return io::sha256_file(manifest);
}

FeatureRecord record(const std::string& id, std::vector<std::size_t> ranking) {
    FeatureRecord r;
    r.sample_id = id;
    r.features = {Vec(2, 1.0), {Vec(2), Vec(2), Vec(2)}};
    r.ranking = std::move(ranking);
    return r;
}

} // namespace

TEST_CASE("paper-shaped manifests") {
    const DatasetManifest a = DatasetManifest::mintrec2_shape(16);
    CHECK(a.splits.at("train") == 6165);
    CHECK(a.splits.at("dev") == 1106);
    CHECK(a.splits.at("test") == 2033);
    CHECK(a.classes == 30);
    CHECK(a.labels.size() == 30);
    const DatasetManifest b = DatasetManifest::iemocap_da_shape(16);
    CHECK(b.splits.at("train") == 6590);
    CHECK(b.splits.at("dev") == 942);
    CHECK(b.splits.at("test") == 1884);
    CHECK(b.classes == 12);
    CHECK(a.slots == std::vector<std::string>{"A", "E", "I"});
}

TEST_CASE("write and load round-trip") {
    testing::TempDir tmp("roundtrip");
    const Dataset ds = synthesize(small_spec());
    const auto manifest = write_dataset(ds, tmp.path / "ds");
    const Dataset back = load(manifest);
    CHECK(back.manifest.d == ds.manifest.d);
    CHECK(back.manifest.classes == ds.manifest.classes);
    CHECK(back.manifest.labels == ds.manifest.labels);
    for (Split s : kSplits) {
        REQUIRE(back.split(s).size() == ds.split(s).size());
        for (std::size_t i = 0; i < ds.split(s).size(); ++i) {
            const auto& x = ds.split(s)[i];
            const auto& y = back.split(s)[i];
            CHECK(x.sample_id == y.sample_id);
            CHECK(x.label == y.label);
            CHECK(x.features.text == y.features.text);
            CHECK(x.features.fine == y.features.fine);
            CHECK(x.ranking == y.ranking);
        }
    }
    // writing the loaded copy reproduces the same bytes
    const auto again = write_dataset(back, tmp.path / "ds2");
    CHECK(io::read_file(again) == io::read_file(manifest));
    CHECK(io::read_file(tmp.path / "ds2" / "train.jsonl") == io::read_file(tmp.path / "ds" / "train.jsonl"));
}

TEST_CASE("load rejects a short record and names it") {
    testing::TempDir tmp("baddim");
    const std::string good = R"({"sample_id":"ok-1","label":0,"F_T":[1,2,3,4],"fine":{"A":[1,1,1,1],"E":[0,0,0,0],"I":[2,2,2,2]}})";
    const std::string bad = R"({"sample_id":"short-7","label":1,"F_T":[1,2,3],"fine":{"A":[1,1,1],"E":[0,0,0],"I":[2,2,2]}})";
    io::write_file_atomic(tmp.path / "train.jsonl", good + "\n" + bad + "\n");
    io::write_file_atomic(tmp.path / "dev.jsonl", good + "\n");
    io::write_file_atomic(tmp.path / "test.jsonl", good + "\n");
    const nlohmann::json m = {{"name", "tiny"},
                              {"d", 4},
                              {"K", 2},
                              {"slots", {"A", "E", "I"}},
                              {"splits", {{"train", 2}, {"dev", 1}, {"test", 1}}},
                              {"files", {{"train", "train.jsonl"}, {"dev", "dev.jsonl"}, {"test", "test.jsonl"}}}};
    io::write_file_atomic(tmp.path / "manifest.json", m.dump());
    try {
        load(tmp.path / "manifest.json");
        FAIL("expected load to fail");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("short-7") != std::string::npos);
    }
}

TEST_CASE("load detects digest mismatch and count mismatch") {
    testing::TempDir tmp("digest");
    const auto manifest = write_dataset(synthesize(small_spec()), tmp.path);
    std::string body = io::read_file(tmp.path / "dev.jsonl");
    body[body.find("\"label\":") + 8] = body[body.find("\"label\":") + 8] == '0' ? '1' : '0';
    io::write_file_atomic(tmp.path / "dev.jsonl", body);
    CHECK_THROWS_WITH_AS(load(manifest), doctest::Contains("digest mismatch"), std::invalid_argument);
}

TEST_CASE("validate_record") {
    DatasetManifest m;
    m.name = "t";
    m.d = 2;
    m.classes = 2;
    m.slots = {"A", "E", "I"};
    FeatureRecord r = record("r1", {0, 2, 1, 3});
    CHECK_NOTHROW(validate_record(r, m));
    r.ranking = std::vector<std::size_t>{1, 0, 2, 3};
    CHECK_THROWS_WITH_AS(validate_record(r, m), doctest::Contains("r1"), std::invalid_argument);
    r.ranking = std::vector<std::size_t>{0, 1, 1, 3};
    CHECK_THROWS_AS(validate_record(r, m), std::invalid_argument);
    r.ranking.reset();
    r.label = 2;
    CHECK_THROWS_AS(validate_record(r, m), std::invalid_argument);
    r.label = 0;
    r.features.fine[1][0] = std::nan("");
    CHECK_THROWS_AS(validate_record(r, m), std::invalid_argument);
}

TEST_CASE("stored ranking omits T and is restored on load") {
    DatasetManifest m;
    m.d = 2;
    m.classes = 2;
    m.slots = {"A", "E", "I"};
    const FeatureRecord r = record("x", {0, 3, 1, 2});
    const std::string line = record_to_json_line(r, m);
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("ranking") == nlohmann::json({"I", "A", "E"}));
    CHECK(record_from_json_line(line, m).ranking == r.ranking);
    CHECK(record_from_json_line(line, m).target().order() == std::vector<std::size_t>{0, 3, 1, 2});
}

TEST_CASE("synthesize is deterministic per seed") {
    testing::TempDir tmp("det");
    const auto a = write_dataset(synthesize(small_spec(3)), tmp.path / "a");
    const auto b = write_dataset(synthesize(small_spec(3)), tmp.path / "b");
    const auto c = write_dataset(synthesize(small_spec(4)), tmp.path / "c");
    CHECK(dir_digest(a) == dir_digest(b));
    CHECK(dir_digest(a) != dir_digest(c));
}

TEST_CASE("synthesize: rank@1 proportions over 1000 samples") {
    SynthSpec s = small_spec(11);
    s.n_train = 1000;
    s.d = 16;
    s.classes = 4;
    const Dataset ds = synthesize(s);
    std::map<std::size_t, std::size_t> top;
    for (const auto& r : ds.train) {
        REQUIRE(r.ranking);
        CHECK(r.ranking->front() == 0);
        ++top[(*r.ranking)[1] - 1];
    }
    const double total = s.rank1_proportions[0] + s.rank1_proportions[1] + s.rank1_proportions[2];
    for (std::size_t m = 0; m < 3; ++m) {
        CHECK(std::abs(top[m] / 1000.0 - s.rank1_proportions[m] / total) <= 0.03);
    }
}

TEST_CASE("synthesize: noise 0 is linearly separable on F_T") {
    SynthSpec s = small_spec(5);
    s.noise = 0.0;
    s.classes = 4;
    s.d = 16;
    const Dataset ds = synthesize(s);
    // nearest class mean is a linear rule
    std::vector<Vec> means(4, Vec(16));
    std::vector<double> counts(4, 0);
    for (const auto& r : ds.train) {
        means[r.label] = add(means[r.label], r.features.text);
        counts[r.label] += 1;
    }
    for (std::size_t k = 0; k < 4; ++k) {
        REQUIRE(counts[k] > 0);
        means[k] = scaled(means[k], 1.0 / counts[k]);
    }
    std::size_t correct = 0;
    for (const auto& r : ds.train) {
        std::size_t best = 0;
        double bd = 1e300;
        for (std::size_t k = 0; k < 4; ++k) {
            const double dist = mse(r.features.text, means[k]);
            if (dist < bd) {
                bd = dist;
                best = k;
            }
        }
        correct += best == r.label;
    }
    CHECK(correct == ds.train.size());
}

TEST_CASE("synthesize validation") {
    SynthSpec s = small_spec();
    s.rank1_proportions = {1, 2};
    CHECK_THROWS_AS(synthesize(s), std::invalid_argument);
    s = small_spec();
    s.noise = -1;
    CHECK_THROWS_AS(synthesize(s), std::invalid_argument);
    s = small_spec();
    s.n_dev = 0;
    CHECK_THROWS_AS(synthesize(s), std::invalid_argument);
}

TEST_CASE("rank_stats hand counts") {
    const std::vector<std::string> slots{"A", "E", "I"};
    const std::vector<std::vector<std::string>> orders{{"I", "A", "E"}, {"E", "I", "A"}, {"I", "E", "A"}};
    const RankStats st = rank_stats(std::span<const std::vector<std::string>>(orders), slots);
    CHECK(st.total == 3);
    CHECK(st.counts[0] == std::vector<std::size_t>{0, 1, 2});  // A
    CHECK(st.counts[1] == std::vector<std::size_t>{1, 1, 1});  // E
    CHECK(st.counts[2] == std::vector<std::size_t>{2, 1, 0});  // I
    CHECK(st.to_table() == "slot\tRank@1\tRank@2\tRank@3\nA\t0\t1\t2\nE\t1\t1\t1\nI\t2\t1\t0\n");

    const std::vector<FeatureRecord> recs{record("a", {0, 3, 1, 2}), record("b", {0, 2, 3, 1}),
                                          record("c", {0, 3, 2, 1})};
    const RankStats st2 = rank_stats(std::span<const FeatureRecord>(recs), slots);
    CHECK(st2.counts == st.counts);

    const std::vector<std::vector<std::string>> same(5, {"E", "A", "I"});
    const RankStats one = rank_stats(std::span<const std::vector<std::string>>(same), slots);
    CHECK(one.counts[1][0] == 5);
    CHECK(one.counts[0][0] == 0);
    CHECK(one.counts[2][0] == 0);
    for (std::size_t p = 0; p < 3; ++p) {
        CHECK(one.counts[0][p] + one.counts[1][p] + one.counts[2][p] == 5);
    }

    std::vector<FeatureRecord> missing = recs;
    missing[1].ranking.reset();
    missing[2].ranking.reset();
    CHECK_THROWS_WITH_AS(rank_stats(std::span<const FeatureRecord>(missing), slots), doctest::Contains("b, c"),
                         std::invalid_argument);
    const std::vector<std::vector<std::string>> bad{{"A", "Q", "E"}};
    CHECK_THROWS_AS(rank_stats(std::span<const std::vector<std::string>>(bad), slots), std::invalid_argument);
}
