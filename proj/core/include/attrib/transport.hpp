#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "attrib/types.hpp"

namespace attrib::llm {

struct ChatMessage {
    std::string role;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct CompletionParams {
    std::string model_id;
    double temperature = 0.0;
    int max_tokens = 1024;
    std::chrono::milliseconds timeout{60000};
};

/// Failure to obtain a completion. Non-retryable errors (missing fixture,
/// missing credentials, 4xx) short-circuit the retry loop.
class TransportError : public Error {
public:
    explicit TransportError(const std::string& what, bool retryable = true)
        : Error(what), retryable_(retryable) {}
    bool retryable() const { return retryable_; }

private:
    bool retryable_;
};

/// Generic chat-completion backend.
class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    virtual std::string complete(const std::vector<ChatMessage>& messages, const CompletionParams& params) = 0;
};

/// Stable key for a rendered prompt: FNV-1a over the role/content sequence,
/// rendered as 16 hex characters. The model id is not part of the key.
std::string prompt_key(const std::vector<ChatMessage>& messages);

/// OpenAI-compatible request body.
nlohmann::json build_chat_request(const std::vector<ChatMessage>& messages, const CompletionParams& params);
/// Extracts choices[0].message.content; throws TransportError otherwise.
std::string parse_chat_response(const std::string& body);

/// Split of "https://host:port/prefix" into origin and path prefix.
struct Endpoint {
    std::string origin;
    std::string path;
};
Endpoint parse_endpoint(const std::string& url);

/// POSTs JSON and returns the parsed reply. 5xx and connection failures are
/// retryable; other non-2xx statuses are not.
nlohmann::json post_json(const std::string& url,
                         const nlohmann::json& body,
                         const std::string& bearer_token,
                         std::chrono::milliseconds timeout);

/// Live transport: POST {base_url}/chat/completions with a bearer token.
class HttpChatTransport final : public ChatTransport {
public:
    HttpChatTransport(std::string base_url, std::string api_key);
    /// Reads the key from ATTRIB_EVAL_API_KEY; throws TransportError if unset.
    static std::unique_ptr<HttpChatTransport> from_env(std::string base_url);

    std::string complete(const std::vector<ChatMessage>& messages, const CompletionParams& params) override;

private:
    std::string base_url_;
    std::string api_key_;
};

/// Replays completions from `<dir>/<prompt_key>.txt`.
class ScriptedTransport final : public ChatTransport {
public:
    explicit ScriptedTransport(std::filesystem::path dir);
    std::string complete(const std::vector<ChatMessage>& messages, const CompletionParams& params) override;

private:
    std::filesystem::path dir_;
};

/// Forwards to another transport and writes every reply as a fixture file
/// readable by ScriptedTransport.
class RecordingTransport final : public ChatTransport {
public:
    RecordingTransport(ChatTransport& inner, std::filesystem::path dir);
    std::string complete(const std::vector<ChatMessage>& messages, const CompletionParams& params) override;

private:
    ChatTransport& inner_;
    std::filesystem::path dir_;
    std::mutex mutex_;
};

/// Wraps a function; handy for tests and in-process fakes.
class CallbackTransport final : public ChatTransport {
public:
    using Fn = std::function<std::string(const std::vector<ChatMessage>&, const CompletionParams&)>;
    explicit CallbackTransport(Fn fn) : fn_(std::move(fn)) {}
    std::string complete(const std::vector<ChatMessage>& messages, const CompletionParams& params) override {
        return fn_(messages, params);
    }

private:
    Fn fn_;
};

/// Enforces a minimum interval between calls to the wrapped transport.
class ThrottledTransport final : public ChatTransport {
public:
    ThrottledTransport(ChatTransport& inner, double requests_per_second);
    std::string complete(const std::vector<ChatMessage>& messages, const CompletionParams& params) override;

private:
    ChatTransport& inner_;
    std::chrono::nanoseconds interval_;
    std::chrono::steady_clock::time_point next_slot_;
    std::mutex mutex_;
};

struct RetryPolicy {
    /// Total attempts for retryable transport errors.
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
};

/// Calls `transport` with exponential backoff on retryable errors.
std::string complete_with_retry(ChatTransport& transport,
                                const std::vector<ChatMessage>& messages,
                                const CompletionParams& params,
                                const RetryPolicy& policy);

}  // namespace attrib::llm
