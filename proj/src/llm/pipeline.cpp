#include "lgsrr/llm/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <future>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "lgsrr/io/digest.hpp"

namespace lgsrr::llm {

using nlohmann::json;

// Templates

Template Template::from_text(std::string name, std::string text) {
    Template t{std::move(name), std::move(text), ""};
    t.hash = io::sha256_hex(t.text);
    return t;
}

Template Template::load(const std::filesystem::path& path) {
    return from_text(path.stem().string(), io::read_file(path));
}

std::string Template::render(const std::map<std::string, std::string>& values) const {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const auto open = text.find("{{", pos);
        if (open == std::string::npos) {
            out.append(text, pos, std::string::npos);
            return out;
        }
        const auto close = text.find("}}", open);
        if (close == std::string::npos) {
            throw std::invalid_argument("template " + name + ": unterminated placeholder");
        }
        out.append(text, pos, open - pos);
        const std::string key = text.substr(open + 2, close - open - 2);
        const auto it = values.find(key);
        if (it == values.end()) {
            throw std::invalid_argument("template " + name + ": no value for {{" + key + "}}");
        }
        out += it->second;
        pos = close + 2;
    }
}

// Inputs

std::vector<PipelineSample> load_samples(const std::filesystem::path& path) {
    std::vector<PipelineSample> out;
    std::istringstream lines(io::read_file(path));
    std::string line;
    std::size_t n = 0;
    while (std::getline(lines, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const json j = json::parse(line);
            PipelineSample s;
            s.sample_id = j.at("sample_id").get<std::string>();
            s.text = j.at("text").get<std::string>();
            s.video = j.value("video", "");
            if (j.contains("label") && !j.at("label").is_null()) {
                s.label = j.at("label").get<std::string>();
            }
            s.split = j.value("split", "train");
            out.push_back(std::move(s));
        } catch (const json::exception& e) {
            throw std::invalid_argument(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    if (out.empty()) {
        throw std::invalid_argument("no samples in " + path.string());
    }
    return out;
}

PipelineConfig parse_pipeline_config(std::string_view json_text, const std::filesystem::path& base_dir) {
    const json root = json::parse(json_text);
    const json& j = root.contains("llm") ? root.at("llm") : root;
    const auto resolve = [&](const std::string& p) {
        const std::filesystem::path path(p);
        return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    };
    PipelineConfig c;
    try {
        if (j.contains("samples")) c.samples = resolve(j.at("samples").get<std::string>());
        if (j.contains("templates")) c.templates = resolve(j.at("templates").get<std::string>());
        if (j.contains("out")) c.out = resolve(j.at("out").get<std::string>());
        c.discovery_n = j.value("discovery_n", c.discovery_n);
        c.discovery_chunk = j.value("discovery_chunk", c.discovery_chunk);
        c.seed = j.value("seed", c.seed);
        c.top_k = j.value("top_k", c.top_k);
        c.instructions = j.value("instructions", c.instructions);
        c.rank_splits = j.value("rank_splits", c.rank_splits);
        c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
        c.resume = j.value("resume", c.resume);
        c.http.endpoint = j.value("endpoint", c.http.endpoint);
        c.http.model = j.value("model", c.http.model);
        c.http.token_env = j.value("token_env", c.http.token_env);
        c.http.temperature = j.value("temperature", c.http.temperature);
        c.http.max_tokens = j.value("max_tokens", c.http.max_tokens);
        c.http.timeout = std::chrono::milliseconds(j.value("timeout_ms", c.http.timeout.count()));
        c.http.max_retries = j.value("max_retries", c.http.max_retries);
        c.http.backoff_base = std::chrono::milliseconds(j.value("backoff_ms", c.http.backoff_base.count()));
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("pipeline config: ") + e.what());
    }
    if (c.discovery_n == 0 || c.discovery_chunk == 0 || c.top_k == 0 || c.max_in_flight == 0) {
        throw std::invalid_argument("pipeline config: discovery_n, discovery_chunk, top_k and max_in_flight must be positive");
    }
    return c;
}

// Prompts

namespace {

std::string count_word(std::size_t n) {
    static const char* words[] = {"zero", "one", "two", "three", "four", "five",
                                  "six",  "seven", "eight", "nine", "ten"};
    return n <= 10 ? words[n] : std::to_string(n);
}

std::string join_and(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0) {
            out += i + 1 == items.size() ? " and " : ", ";
        }
        out += items[i];
    }
    return out;
}

std::string lowercase(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

json aspects_json(const std::vector<SemanticAspect>& aspects) {
    json out = json::array();
    for (const auto& a : aspects) {
        out.push_back({{"name", a.name}, {"abbreviation", a.abbreviation}, {"frequency", a.frequency}});
    }
    return out;
}

std::vector<SemanticAspect> aspects_from_json(const json& j) {
    std::vector<SemanticAspect> out;
    for (const auto& a : j) {
        out.push_back({a.at("name"), a.at("abbreviation"), a.at("frequency")});
    }
    return out;
}

std::string request_digest(const std::string& model, const std::vector<Message>& messages) {
    json m = json::array();
    for (const auto& msg : messages) {
        m.push_back({{"role", msg.role}, {"content", msg.content}});
    }
    return io::sha256_hex(json{{"model", model}, {"messages", m}}.dump());
}

} // namespace

std::string description_prompt(const Template& tpl, const PipelineSample& sample,
                               const std::vector<SemanticAspect>& aspects,
                               const std::map<std::string, std::string>& instructions) {
    std::string perspectives;
    for (std::size_t i = 0; i < aspects.size(); ++i) {
        const auto it = instructions.find(aspects[i].abbreviation);
        const std::string instruction = it != instructions.end()
                                            ? it->second
                                            : "describe the " + lowercase(aspects[i].name) +
                                                  " that reveal the speaker's intent";
        perspectives += (i > 0 ? "; (" : "(") + std::to_string(i + 1) + ") " + aspects[i].name + ": " + instruction;
    }
    return tpl.render({{"perspectives", perspectives}, {"text", sample.text}, {"video", sample.video}});
}

std::string ranking_prompt(const Template& tpl, const DescriptionSet& desc, const std::string& label,
                           const std::vector<SemanticAspect>& aspects) {
    std::vector<std::string> names;
    std::vector<std::string> descriptions;
    std::vector<std::string> abbreviations;
    for (const auto& a : aspects) {
        names.push_back(a.name + " (" + a.abbreviation + ")");
        const auto it = desc.text.find(a.abbreviation);
        const std::string text = it == desc.text.end() || it->second.empty() ? "(no description)" : it->second;
        descriptions.push_back("\"" + a.abbreviation + ": " + text + "\"");
        abbreviations.push_back(a.abbreviation);
    }
    return tpl.render({{"count", count_word(aspects.size())},
                       {"aspect_names", join_and(names)},
                       {"intent", label},
                       {"descriptions", join_and(descriptions)},
                       {"abbreviations", join_and(abbreviations)}});
}

data::RankStats rank_table(const std::vector<RankRecord>& records, const std::vector<std::string>& abbreviations) {
    std::vector<std::vector<std::string>> orderings;
    for (const auto& r : records) {
        orderings.push_back(r.order);
    }
    return data::rank_stats(orderings, abbreviations);
}

// Pipeline

Pipeline::Pipeline(PipelineConfig config, ChatClient& client) : config_(std::move(config)), client_(client) {
    t1_ = Template::load(config_.templates / "template1.txt");
    t2_ = Template::load(config_.templates / "template2.txt");
    t3_ = Template::load(config_.templates / "template3.txt");
    samples_ = load_samples(config_.samples);
    const auto cache_dir = config_.out / "cache";
    if (!config_.resume && std::filesystem::exists(cache_dir) && !std::filesystem::is_empty(cache_dir)) {
        throw std::runtime_error("cache already present in " + cache_dir.string() +
                                 "; pass --resume to continue that run or choose another --out");
    }
    std::filesystem::create_directories(cache_dir);
    discover_cache_ = std::make_unique<StepCache>(cache_dir / "discover.jsonl");
    describe_cache_ = std::make_unique<StepCache>(cache_dir / "describe.jsonl");
    rank_cache_ = std::make_unique<StepCache>(cache_dir / "rank.jsonl");
}

std::vector<Pipeline::Answer> Pipeline::query(const std::string& step, const Template& tpl, StepCache& cache,
                                              const std::vector<Job>& jobs,
                                              const std::function<json(const std::string&)>& parse) {
    std::vector<Answer> out(jobs.size());
    std::vector<std::size_t> misses;
    const std::string model = client_.model();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (const auto hit = cache.find(cache_key(jobs[i].id, tpl.hash, model, jobs[i].attempt))) {
            out[i] = {hit->response_text, true};
        } else {
            misses.push_back(i);
        }
    }
    const auto request = [&](std::size_t i) {
        return client_.complete(ChatRequest{jobs[i].messages, step, jobs[i].id});
    };
    for (std::size_t begin = 0; begin < misses.size(); begin += config_.max_in_flight) {
        const std::size_t end = std::min(misses.size(), begin + config_.max_in_flight);
        std::vector<std::optional<std::string>> results(end - begin);
        std::exception_ptr failure;
        if (end - begin == 1) {
            try {
                results[0] = request(misses[begin]);
            } catch (...) {
                failure = std::current_exception();
            }
        } else {
            std::vector<std::future<std::string>> inflight;
            for (std::size_t k = begin; k < end; ++k) {
                inflight.push_back(std::async(std::launch::async, request, misses[k]));
            }
            for (std::size_t k = 0; k < inflight.size(); ++k) {
                try {
                    results[k] = inflight[k].get();
                } catch (...) {
                    if (!failure) failure = std::current_exception();
                }
            }
        }
        // Completed answers are persisted in job order before any failure propagates.
        for (std::size_t k = 0; k < results.size(); ++k) {
            if (!results[k]) continue;
            const Job& job = jobs[misses[begin + k]];
            cache.put({cache_key(job.id, tpl.hash, model, job.attempt), job.id, tpl.hash, model,
                       request_digest(model, job.messages), *results[k], parse(*results[k])});
            out[misses[begin + k]] = {*results[k], false};
        }
        if (failure) {
            std::rethrow_exception(failure);
        }
    }
    return out;
}

std::vector<SemanticAspect> Pipeline::discover() {
    std::vector<std::size_t> order(samples_.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(config_.seed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(std::min(order.size(), config_.discovery_n));

    std::vector<Job> jobs;
    for (std::size_t begin = 0; begin < order.size(); begin += config_.discovery_chunk) {
        std::string listing;
        const std::size_t end = std::min(order.size(), begin + config_.discovery_chunk);
        for (std::size_t k = begin; k < end; ++k) {
            const PipelineSample& s = samples_[order[k]];
            listing += "Sample " + std::to_string(k - begin + 1) + ":\nText: " + s.text + "\nVideo: " + s.video + "\n";
        }
        char id[32];
        std::snprintf(id, sizeof id, "discover-%03zu", jobs.size());
        jobs.push_back({id, {{"user", t1_.render({{"samples", listing}})}}, 0});
    }
    const auto parse = [](const std::string& text) {
        json names = json::array();
        for (const auto& item : parse_aspect_list(text)) {
            names.push_back({{"name", item.name}, {"abbreviation", item.abbreviation}});
        }
        return names;
    };
    const auto answers = query("discover", t1_, *discover_cache_, jobs, parse);

    flags_.erase(std::remove_if(flags_.begin(), flags_.end(), [](const auto& f) { return f.step == "discover"; }),
                 flags_.end());
    AspectTally tally;
    for (std::size_t i = 0; i < answers.size(); ++i) {
        if (tally.add_response(answers[i].text) == 0) {
            flags_.push_back({"discover", jobs[i].id, "no aspects parsed from response"});
        }
    }
    const auto discovered = tally.aspects();
    if (discovered.empty()) {
        write_flags("discover");
        throw std::runtime_error("discovery produced no aspects");
    }
    const Selection sel = select_top_k(discovered, config_.top_k);
    if (sel.warning) {
        flags_.push_back({"discover", "*", *sel.warning});
    }
    const json artifact = {{"discovered", aspects_json(discovered)}, {"selected", aspects_json(sel.aspects)}};
    io::write_file_atomic(config_.out / "aspects.json", artifact.dump(2) + "\n");
    write_flags("discover");
    return discovered;
}

std::vector<SemanticAspect> Pipeline::selected_aspects() const {
    const auto path = config_.out / "aspects.json";
    if (!std::filesystem::exists(path)) {
        throw std::runtime_error(path.string() + " not found; run discovery first");
    }
    return aspects_from_json(json::parse(io::read_file(path)).at("selected"));
}

std::vector<DescriptionSet> Pipeline::describe() {
    const auto aspects = selected_aspects();
    const auto parse = [&aspects](const std::string& text) {
        const ParsedDescriptions p = parse_descriptions(text, aspects);
        return json{{"descriptions", p.text}, {"missing", p.missing}};
    };
    std::vector<Job> jobs;
    for (const auto& s : samples_) {
        jobs.push_back({s.sample_id, {{"user", description_prompt(t2_, s, aspects, config_.instructions)}}, 0});
    }
    const auto first = query("describe", t2_, *describe_cache_, jobs, parse);
    std::vector<ParsedDescriptions> parsed;
    std::vector<Job> retry;
    std::vector<std::size_t> retry_of;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        parsed.push_back(parse_descriptions(first[i].text, aspects));
        if (!parsed.back().missing.empty()) {
            Job again = jobs[i];
            again.attempt = 1;
            retry.push_back(std::move(again));
            retry_of.push_back(i);
        }
    }
    const auto second = query("describe", t2_, *describe_cache_, retry, parse);
    for (std::size_t k = 0; k < retry.size(); ++k) {
        ParsedDescriptions p = parse_descriptions(second[k].text, aspects);
        if (p.missing.size() <= parsed[retry_of[k]].missing.size()) {
            parsed[retry_of[k]] = std::move(p);
        }
    }

    flags_.erase(std::remove_if(flags_.begin(), flags_.end(), [](const auto& f) { return f.step == "describe"; }),
                 flags_.end());
    std::vector<DescriptionSet> out;
    std::string body;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        DescriptionSet d{jobs[i].id, parsed[i].text, !parsed[i].missing.empty()};
        if (d.flagged) {
            std::string missing;
            for (const auto& m : parsed[i].missing) missing += (missing.empty() ? "" : ", ") + m;
            flags_.push_back({"describe", d.sample_id, "missing sections after re-query: " + missing});
        }
        body += json{{"sample_id", d.sample_id}, {"descriptions", d.text}, {"flagged", d.flagged}}.dump() + "\n";
        out.push_back(std::move(d));
    }
    io::write_file_atomic(config_.out / "descriptions.jsonl", body);
    write_flags("describe");
    return out;
}

std::vector<DescriptionSet> Pipeline::load_descriptions() const {
    const auto path = config_.out / "descriptions.jsonl";
    if (!std::filesystem::exists(path)) {
        throw std::runtime_error(path.string() + " not found; run the description step first");
    }
    std::vector<DescriptionSet> out;
    std::istringstream lines(io::read_file(path));
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        out.push_back({j.at("sample_id"), j.at("descriptions").get<std::map<std::string, std::string>>(),
                       j.at("flagged").get<bool>()});
    }
    return out;
}

std::vector<RankRecord> Pipeline::rank() {
    const auto aspects = selected_aspects();
    std::map<std::string, DescriptionSet> descriptions;
    for (auto& d : load_descriptions()) {
        descriptions.emplace(d.sample_id, std::move(d));
    }
    flags_.erase(std::remove_if(flags_.begin(), flags_.end(), [](const auto& f) { return f.step == "rank"; }),
                 flags_.end());
    const auto parse = [&aspects](const std::string& text) {
        const auto order = parse_ranking(text, aspects);
        return order ? json(*order) : json(nullptr);
    };
    std::vector<Job> jobs;
    for (const auto& s : samples_) {
        if (std::find(config_.rank_splits.begin(), config_.rank_splits.end(), s.split) == config_.rank_splits.end()) {
            continue;
        }
        if (!s.label) {
            flags_.push_back({"rank", s.sample_id, "no label; skipped"});
            continue;
        }
        const auto d = descriptions.find(s.sample_id);
        if (d == descriptions.end()) {
            flags_.push_back({"rank", s.sample_id, "no description; skipped"});
            continue;
        }
        jobs.push_back({s.sample_id, {{"user", ranking_prompt(t3_, d->second, *s.label, aspects)}}, 0});
    }
    const auto first = query("rank", t3_, *rank_cache_, jobs, parse);
    std::vector<std::optional<std::vector<std::string>>> orders;
    std::vector<Job> retry;
    std::vector<std::size_t> retry_of;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        orders.push_back(parse_ranking(first[i].text, aspects));
        if (!orders.back()) {
            Job again = jobs[i];
            again.attempt = 1;
            retry.push_back(std::move(again));
            retry_of.push_back(i);
        }
    }
    const auto second = query("rank", t3_, *rank_cache_, retry, parse);
    for (std::size_t k = 0; k < retry.size(); ++k) {
        orders[retry_of[k]] = parse_ranking(second[k].text, aspects);
    }

    // Corpus-level modal ranking, ties broken by the joined abbreviations.
    std::map<std::vector<std::string>, std::size_t> counts;
    for (const auto& o : orders) {
        if (o) ++counts[*o];
    }
    std::vector<std::string> modal;
    std::size_t best = 0;
    for (const auto& [order, n] : counts) {
        if (n > best) {
            best = n;
            modal = order;
        }
    }
    if (modal.empty()) {
        for (const auto& a : aspects) modal.push_back(a.abbreviation);
    }
    std::string modal_text;
    for (const auto& m : modal) modal_text += (modal_text.empty() ? "" : " > ") + m;

    std::vector<RankRecord> out;
    std::string body;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        RankRecord r{jobs[i].id, orders[i] ? *orders[i] : modal, !orders[i]};
        if (r.fallback) {
            flags_.push_back({"rank", r.sample_id, "unparseable after re-query; modal ranking " + modal_text + " used"});
        }
        body += json{{"sample_id", r.sample_id}, {"ranking", r.order}, {"fallback", r.fallback}}.dump() + "\n";
        out.push_back(std::move(r));
    }
    io::write_file_atomic(config_.out / "rankings.jsonl", body);
    std::vector<std::string> abbreviations;
    for (const auto& a : aspects) abbreviations.push_back(a.abbreviation);
    io::write_file_atomic(config_.out / "rank_stats.txt", rank_table(out, abbreviations).to_table());
    write_flags("rank");
    return out;
}

PipelineResult Pipeline::run_all() {
    PipelineResult r;
    r.discovered = discover();
    r.selected = selected_aspects();
    r.descriptions = describe();
    r.rankings = rank();
    std::vector<std::string> abbreviations;
    for (const auto& a : r.selected) abbreviations.push_back(a.abbreviation);
    r.stats = rank_table(r.rankings, abbreviations);
    r.flags = flags_;
    return r;
}

void Pipeline::write_flags(const std::string& step) const {
    json j = json::array();
    for (const auto& f : flags_) {
        if (f.step == step) {
            j.push_back({{"id", f.id}, {"reason", f.reason}});
        }
    }
    io::write_file_atomic(config_.out / ("flags_" + step + ".json"), j.dump(2) + "\n");
}

} // namespace lgsrr::llm
