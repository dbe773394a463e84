#include "lgsrr/llm/cache.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lgsrr/io/digest.hpp"

namespace lgsrr::llm {

using nlohmann::json;

std::string cache_key(std::string_view sample_id, std::string_view template_hash, std::string_view model,
                      int attempt) {
    std::string material(sample_id);
    material += '\n';
    material += template_hash;
    material += '\n';
    material += model;
    if (attempt > 0) {
        material += "\nattempt=" + std::to_string(attempt);
    }
    return io::sha256_hex(material);
}

StepCache::StepCache(std::filesystem::path path) : path_(std::move(path)) {
    if (!std::filesystem::exists(path_)) {
        return;
    }
    const std::string body = io::read_file(path_);
    std::size_t good_end = 0;
    std::size_t start = 0;
    while (start < body.size()) {
        const auto nl = body.find('\n', start);
        if (nl == std::string::npos) {
            break;  // torn tail
        }
        const std::string_view line(body.data() + start, nl - start);
        if (!line.empty()) {
            try {
                const json j = json::parse(line);
                CacheRecord r{j.at("key"),           j.at("sample_id"),     j.at("template_hash"),
                              j.at("model"),         j.at("request_digest"), j.at("response_text"),
                              j.value("parsed", json())};
                records_[r.key] = std::move(r);
            } catch (const json::exception& e) {
                throw std::runtime_error("cache " + path_.string() + ": corrupt record at byte " +
                                         std::to_string(start) + ": " + e.what());
            }
        }
        start = nl + 1;
        good_end = start;
    }
    if (good_end != body.size()) {
        std::filesystem::resize_file(path_, good_end);
    }
}

std::optional<CacheRecord> StepCache::find(const std::string& key) const {
    std::lock_guard lock(mu_);
    const auto it = records_.find(key);
    if (it == records_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void StepCache::put(const CacheRecord& r) {
    const json j = {{"key", r.key},
                    {"sample_id", r.sample_id},
                    {"template_hash", r.template_hash},
                    {"model", r.model},
                    {"request_digest", r.request_digest},
                    {"response_text", r.response_text},
                    {"parsed", r.parsed}};
    const std::string line = j.dump() + "\n";
    std::lock_guard lock(mu_);
    if (path_.has_parent_path()) {
        std::filesystem::create_directories(path_.parent_path());
    }
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.flush();
    if (!out) {
        throw std::runtime_error("cache " + path_.string() + ": write failed");
    }
    records_[r.key] = r;
}

std::size_t StepCache::size() const {
    std::lock_guard lock(mu_);
    return records_.size();
}

} // namespace lgsrr::llm
