#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace lgsrr::llm {

struct Message {
    std::string role;
    std::string content;
};

struct ChatRequest {
    std::vector<Message> messages;
    /// Routing tags for caches and mocks; never sent to the endpoint.
    std::string step;
    std::string request_id;
};

/// Raised when a request cannot be completed after all retries.
struct ChatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    /// Returns the assistant text of one completion.
    virtual std::string complete(const ChatRequest& request) = 0;
    virtual std::string model() const = 0;
    /// Requests that reached the backend, retries included.
    virtual std::size_t request_count() const = 0;
};

struct HttpClientConfig {
    /// Full URL of the chat-completions route, e.g. http://localhost:8000/v1/chat/completions.
    std::string endpoint;
    std::string model;
    /// Name of the environment variable holding the bearer token; empty disables auth.
    std::string token_env = "LGSRR_API_TOKEN";
    double temperature = 0.0;
    int max_tokens = 512;
    std::chrono::milliseconds timeout{60000};
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{1000};
};

/// JSON body in the messages-array chat-completion schema.
std::string chat_request_body(const HttpClientConfig& config, const ChatRequest& request);
/// Extracts choices[0].message.content; throws ChatError on other shapes.
std::string parse_chat_response(const std::string& body);

class HttpChatClient : public ChatClient {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit HttpChatClient(HttpClientConfig config, Sleeper sleeper = {});

    std::string complete(const ChatRequest& request) override;
    std::string model() const override { return config_.model; }
    std::size_t request_count() const override { return requests_.load(); }

    const HttpClientConfig& config() const noexcept { return config_; }

private:
    HttpClientConfig config_;
    Sleeper sleep_;
    std::string scheme_host_;
    std::string path_;
    std::atomic<std::size_t> requests_{0};
};

/// Scripted responses read from <dir>/<step>.json. Each file maps a request id
/// (or "*" as a fallback) to a response string or to a list of strings served
/// on successive calls, the last one repeating.
class MockChatClient : public ChatClient {
public:
    explicit MockChatClient(const std::filesystem::path& fixture_dir, std::string model = "mock");

    std::string complete(const ChatRequest& request) override;
    std::string model() const override { return model_; }
    std::size_t request_count() const override { return requests_.load(); }

    /// Every request seen, in arrival order.
    std::vector<ChatRequest> history() const;

private:
    std::string model_;
    std::map<std::string, std::map<std::string, std::vector<std::string>>> scripts_;
    mutable std::mutex mu_;
    std::map<std::string, std::size_t> served_;
    std::vector<ChatRequest> history_;
    std::atomic<std::size_t> requests_{0};
};

} // namespace lgsrr::llm
