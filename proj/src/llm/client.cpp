#include "lgsrr/llm/client.hpp"

#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "lgsrr/io/digest.hpp"

namespace lgsrr::llm {

using nlohmann::json;

std::string chat_request_body(const HttpClientConfig& config, const ChatRequest& request) {
    json messages = json::array();
    for (const Message& m : request.messages) {
        messages.push_back({{"role", m.role}, {"content", m.content}});
    }
    return json{{"model", config.model},
                {"messages", std::move(messages)},
                {"temperature", config.temperature},
                {"max_tokens", config.max_tokens}}
        .dump();
}

std::string parse_chat_response(const std::string& body) {
    try {
        const json j = json::parse(body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ChatError(std::string("malformed chat response: ") + e.what());
    }
}

HttpChatClient::HttpChatClient(HttpClientConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleep_(std::move(sleeper)) {
    if (!sleep_) {
        sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
    const auto scheme = config_.endpoint.find("://");
    if (scheme == std::string::npos) {
        throw std::invalid_argument("endpoint must be an absolute http(s) URL: " + config_.endpoint);
    }
    const auto slash = config_.endpoint.find('/', scheme + 3);
    scheme_host_ = config_.endpoint.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : config_.endpoint.substr(slash);
    if (config_.max_retries < 0) {
        throw std::invalid_argument("max_retries must be non-negative");
    }
}

std::string HttpChatClient::complete(const ChatRequest& request) {
    httplib::Client cli(scheme_host_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!config_.token_env.empty()) {
        if (const char* token = std::getenv(config_.token_env.c_str()); token != nullptr && *token != '\0') {
            headers.emplace("Authorization", std::string("Bearer ") + token);
        }
    }
    const std::string body = chat_request_body(config_, request);
    std::string last_error;
    int attempts = 0;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            sleep_(config_.backoff_base * (1 << (attempt - 1)));
        }
        ++requests_;
        ++attempts;
        const auto res = cli.Post(path_, headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) {
            return parse_chat_response(res->body);
        }
        last_error = "HTTP " + std::to_string(res->status);
        if (res->status != 429 && res->status < 500) {
            break;
        }
    }
    throw ChatError("request " + request.request_id + " to " + scheme_host_ + path_ + " failed after " +
                    std::to_string(attempts) + " attempt(s): " + last_error);
}

MockChatClient::MockChatClient(const std::filesystem::path& fixture_dir, std::string model)
    : model_(std::move(model)) {
    if (!std::filesystem::is_directory(fixture_dir)) {
        throw std::invalid_argument("mock fixture directory not found: " + fixture_dir.string());
    }
    for (const auto& entry : std::filesystem::directory_iterator(fixture_dir)) {
        if (entry.path().extension() != ".json") {
            continue;
        }
        const json j = json::parse(io::read_file(entry.path()));
        auto& script = scripts_[entry.path().stem().string()];
        for (const auto& [id, value] : j.items()) {
            if (value.is_string()) {
                script[id] = {value.get<std::string>()};
            } else {
                script[id] = value.get<std::vector<std::string>>();
            }
            if (script[id].empty()) {
                throw std::invalid_argument("mock fixture " + entry.path().string() + ": empty script for " + id);
            }
        }
    }
}

std::string MockChatClient::complete(const ChatRequest& request) {
    std::lock_guard lock(mu_);
    ++requests_;
    history_.push_back(request);
    const auto step = scripts_.find(request.step);
    if (step == scripts_.end()) {
        throw ChatError("mock has no script for step " + request.step);
    }
    auto it = step->second.find(request.request_id);
    if (it == step->second.end()) {
        it = step->second.find("*");
    }
    if (it == step->second.end()) {
        throw ChatError("mock has no response for " + request.step + "/" + request.request_id);
    }
    std::size_t& n = served_[request.step + "/" + request.request_id];
    const std::string& out = it->second[std::min(n, it->second.size() - 1)];
    ++n;
    return out;
}

std::vector<ChatRequest> MockChatClient::history() const {
    std::lock_guard lock(mu_);
    return history_;
}

} // namespace lgsrr::llm
