#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace lgsrr::llm {

struct CacheRecord {
    std::string key;
    std::string sample_id;
    std::string template_hash;
    std::string model;
    std::string request_digest;
    std::string response_text;
    nlohmann::json parsed;
};

/// sha256 over sample id, template hash and model name. Re-queries pass a
/// nonzero attempt so they occupy their own slot.
std::string cache_key(std::string_view sample_id, std::string_view template_hash, std::string_view model,
                      int attempt = 0);

/// Append-only JSON-lines cache for one pipeline step. A torn final line left
/// by an interrupted run is dropped on open.
class StepCache {
public:
    explicit StepCache(std::filesystem::path path);

    std::optional<CacheRecord> find(const std::string& key) const;
    /// Appends one line with a single write and flush.
    void put(const CacheRecord& record);
    std::size_t size() const;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mu_;
    std::map<std::string, CacheRecord> records_;
};

} // namespace lgsrr::llm
