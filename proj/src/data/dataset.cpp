#include "lgsrr/data/dataset.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "lgsrr/io/digest.hpp"

namespace lgsrr::data {

using nlohmann::json;

const char* split_name(Split split) {
    switch (split) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
    }
    return "?";
}

ndcg::RankingTarget FeatureRecord::target() const {
    if (!ranking) {
        throw std::logic_error("sample " + sample_id + " has no ranking");
    }
    return ndcg::RankingTarget::from_order(*ranking);
}

namespace {

DatasetManifest shaped(std::string name, std::size_t d, std::size_t classes, std::size_t train, std::size_t dev,
                       std::size_t test) {
    DatasetManifest m;
    m.name = std::move(name);
    m.d = d;
    m.classes = classes;
    m.slots = {"A", "E", "I"};
    for (std::size_t k = 0; k < classes; ++k) {
        m.labels.push_back("class_" + std::to_string(k));
    }
    m.splits = {{"train", train}, {"dev", dev}, {"test", test}};
    return m;
}

} // namespace

DatasetManifest DatasetManifest::mintrec2_shape(std::size_t d) {
    return shaped("MIntRec2.0", d, 30, 6165, 1106, 2033);
}

DatasetManifest DatasetManifest::iemocap_da_shape(std::size_t d) {
    return shaped("IEMOCAP-DA", d, 12, 6590, 942, 1884);
}

std::vector<FeatureRecord>& Dataset::split(Split s) {
    switch (s) {
    case Split::Train: return train;
    case Split::Dev: return dev;
    case Split::Test: return test;
    }
    throw std::logic_error("bad split");
}

const std::vector<FeatureRecord>& Dataset::split(Split s) const {
    return const_cast<Dataset*>(this)->split(s);
}

void validate_record(const FeatureRecord& r, const DatasetManifest& m) {
    const auto fail = [&](const std::string& why) {
        throw std::invalid_argument("sample " + r.sample_id + ": " + why);
    };
    if (r.features.text.dim() != m.d) {
        fail("F_T has dim " + std::to_string(r.features.text.dim()) + ", dataset declares d=" + std::to_string(m.d));
    }
    if (r.features.fine.size() != m.slots.size()) {
        fail("expected " + std::to_string(m.slots.size()) + " fine slots, got " +
             std::to_string(r.features.fine.size()));
    }
    for (std::size_t s = 0; s < r.features.fine.size(); ++s) {
        if (r.features.fine[s].dim() != m.d) {
            fail("slot " + m.slots[s] + " has dim " + std::to_string(r.features.fine[s].dim()) +
                 ", dataset declares d=" + std::to_string(m.d));
        }
        if (!r.features.fine[s].all_finite()) {
            fail("slot " + m.slots[s] + " has non-finite entries");
        }
    }
    if (!r.features.text.all_finite()) {
        fail("F_T has non-finite entries");
    }
    if (r.label >= m.classes) {
        fail("label " + std::to_string(r.label) + " out of range for K=" + std::to_string(m.classes));
    }
    if (r.ranking) {
        const std::size_t n = m.slots.size() + 1;
        std::vector<bool> seen(n, false);
        if (r.ranking->size() != n) {
            fail("ranking covers " + std::to_string(r.ranking->size()) + " slots, expected " + std::to_string(n));
        }
        for (std::size_t s : *r.ranking) {
            if (s >= n || seen[s]) {
                fail("ranking is not a permutation of the slot set");
            }
            seen[s] = true;
        }
        if (r.ranking->front() != 0) {
            fail("ranking must place T first");
        }
    }
}

std::string record_to_json_line(const FeatureRecord& r, const DatasetManifest& m) {
    json j;
    j["sample_id"] = r.sample_id;
    j["label"] = r.label;
    j["F_T"] = r.features.text.values();
    json fine = json::object();
    for (std::size_t s = 0; s < m.slots.size(); ++s) {
        fine[m.slots[s]] = r.features.fine.at(s).values();
    }
    j["fine"] = std::move(fine);
    if (r.ranking) {
        json order = json::array();
        for (std::size_t k = 1; k < r.ranking->size(); ++k) {
            order.push_back(m.slots.at((*r.ranking)[k] - 1));
        }
        j["ranking"] = std::move(order);
    }
    return j.dump();
}

FeatureRecord record_from_json_line(std::string_view line, const DatasetManifest& m) {
    const json j = json::parse(line);
    FeatureRecord r;
    r.sample_id = j.at("sample_id").get<std::string>();
    const auto fail = [&](const std::string& why) {
        throw std::invalid_argument("sample " + r.sample_id + ": " + why);
    };
    try {
        const auto label = j.at("label").get<long long>();
        if (label < 0) {
            fail("negative label");
        }
        r.label = static_cast<std::size_t>(label);
        r.features.text = Vec(j.at("F_T").get<std::vector<double>>());
        const json& fine = j.at("fine");
        for (const std::string& slot : m.slots) {
            if (!fine.contains(slot)) {
                fail("missing fine slot " + slot);
            }
            r.features.fine.emplace_back(fine.at(slot).get<std::vector<double>>());
        }
        if (j.contains("ranking") && !j.at("ranking").is_null()) {
            std::vector<std::size_t> order{0};
            for (const auto& name : j.at("ranking")) {
                const auto it = std::find(m.slots.begin(), m.slots.end(), name.get<std::string>());
                if (it == m.slots.end()) {
                    fail("ranking names unknown slot " + name.get<std::string>());
                }
                order.push_back(static_cast<std::size_t>(it - m.slots.begin()) + 1);
            }
            r.ranking = std::move(order);
        }
    } catch (const json::exception& e) {
        fail(std::string("malformed record: ") + e.what());
    }
    validate_record(r, m);
    return r;
}

namespace {

json manifest_to_json(const DatasetManifest& m) {
    return json{{"name", m.name},         {"d", m.d},         {"K", m.classes},
                {"slots", m.slots},       {"labels", m.labels}, {"splits", m.splits},
                {"files", m.files},       {"sha256", m.sha256}};
}

DatasetManifest manifest_from_json(const json& j) {
    DatasetManifest m;
    m.name = j.at("name").get<std::string>();
    m.d = j.at("d").get<std::size_t>();
    m.classes = j.at("K").get<std::size_t>();
    m.slots = j.at("slots").get<std::vector<std::string>>();
    m.labels = j.value("labels", std::vector<std::string>{});
    m.splits = j.at("splits").get<std::map<std::string, std::size_t>>();
    m.files = j.at("files").get<std::map<std::string, std::string>>();
    m.sha256 = j.value("sha256", std::map<std::string, std::string>{});
    if (m.d == 0 || m.classes == 0 || m.slots.empty()) {
        throw std::invalid_argument("manifest " + m.name + ": d, K and slots must be non-empty");
    }
    for (const auto& [name, size] : m.splits) {
        if (size == 0) {
            throw std::invalid_argument("manifest " + m.name + ": split " + name + " has size 0");
        }
    }
    return m;
}

} // namespace

std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    DatasetManifest m = dataset.manifest;
    m.files.clear();
    m.sha256.clear();
    m.splits.clear();
    for (Split s : kSplits) {
        const std::string name = split_name(s);
        std::string body;
        for (const FeatureRecord& r : dataset.split(s)) {
            validate_record(r, m);
            body += record_to_json_line(r, m);
            body += '\n';
        }
        const std::string file = name + ".jsonl";
        io::write_file_atomic(dir / file, body);
        m.files[name] = file;
        m.sha256[name] = io::sha256_hex(body);
        m.splits[name] = dataset.split(s).size();
    }
    const auto path = dir / "manifest.json";
    io::write_file_atomic(path, manifest_to_json(m).dump(2) + "\n");
    return path;
}

Dataset load(const std::filesystem::path& manifest_path) {
    Dataset ds;
    ds.manifest = manifest_from_json(json::parse(io::read_file(manifest_path)));
    const auto base = manifest_path.parent_path();
    for (Split s : kSplits) {
        const std::string name = split_name(s);
        const auto file = ds.manifest.files.find(name);
        if (file == ds.manifest.files.end()) {
            throw std::invalid_argument("manifest " + ds.manifest.name + ": no file for split " + name);
        }
        const std::string body = io::read_file(base / file->second);
        const auto digest = ds.manifest.sha256.find(name);
        if (digest != ds.manifest.sha256.end() && digest->second != io::sha256_hex(body)) {
            throw std::invalid_argument("manifest " + ds.manifest.name + ": digest mismatch for " + file->second);
        }
        auto& records = ds.split(s);
        std::istringstream lines(body);
        std::string line;
        while (std::getline(lines, line)) {
            if (!line.empty()) {
                records.push_back(record_from_json_line(line, ds.manifest));
            }
        }
        const auto declared = ds.manifest.splits.find(name);
        if (declared != ds.manifest.splits.end() && declared->second != records.size()) {
            throw std::invalid_argument("manifest " + ds.manifest.name + ": split " + name + " declares " +
                                        std::to_string(declared->second) + " records, file has " +
                                        std::to_string(records.size()));
        }
    }
    return ds;
}

RankStats rank_stats(std::span<const std::vector<std::string>> orderings, std::span<const std::string> slots) {
    RankStats stats;
    stats.slots.assign(slots.begin(), slots.end());
    stats.counts.assign(slots.size(), std::vector<std::size_t>(slots.size(), 0));
    for (const auto& order : orderings) {
        if (order.size() != slots.size()) {
            throw std::invalid_argument("rank_stats: ordering covers " + std::to_string(order.size()) +
                                        " slots, expected " + std::to_string(slots.size()));
        }
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            const auto it = std::find(slots.begin(), slots.end(), order[pos]);
            if (it == slots.end()) {
                throw std::invalid_argument("rank_stats: unknown slot " + order[pos]);
            }
            ++stats.counts[static_cast<std::size_t>(it - slots.begin())][pos];
        }
        ++stats.total;
    }
    return stats;
}

RankStats rank_stats(std::span<const FeatureRecord> records, std::span<const std::string> slots) {
    std::vector<std::string> missing;
    std::vector<std::vector<std::string>> orderings;
    orderings.reserve(records.size());
    for (const FeatureRecord& r : records) {
        if (!r.ranking) {
            missing.push_back(r.sample_id);
            continue;
        }
        std::vector<std::string> order;
        for (std::size_t k = 1; k < r.ranking->size(); ++k) {
            order.push_back(slots[(*r.ranking)[k] - 1]);
        }
        orderings.push_back(std::move(order));
    }
    if (!missing.empty()) {
        std::string ids;
        for (const auto& id : missing) {
            ids += (ids.empty() ? "" : ", ") + id;
        }
        throw std::invalid_argument("rank_stats: samples without rankings: " + ids);
    }
    return rank_stats(orderings, slots);
}

std::string RankStats::to_table() const {
    std::ostringstream out;
    out << "slot";
    for (std::size_t p = 0; p < slots.size(); ++p) {
        out << "\tRank@" << (p + 1);
    }
    out << '\n';
    for (std::size_t s = 0; s < slots.size(); ++s) {
        out << slots[s];
        for (std::size_t c : counts[s]) {
            out << '\t' << c;
        }
        out << '\n';
    }
    return out.str();
}

} // namespace lgsrr::data
