#include "attrib/transport.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "attrib/rng.hpp"

namespace attrib::llm {

std::string prompt_key(const std::vector<ChatMessage>& messages) {
    std::string buf;
    for (const auto& m : messages) {
        buf += m.role;
        buf.push_back('\0');
        buf += m.content;
        buf.push_back('\0');
    }
    return hex64(fnv1a64(buf));
}

nlohmann::json build_chat_request(const std::vector<ChatMessage>& messages, const CompletionParams& params) {
    auto msgs = nlohmann::json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    return {{"model", params.model_id},
            {"messages", std::move(msgs)},
            {"temperature", params.temperature},
            {"max_tokens", params.max_tokens}};
}

std::string parse_chat_response(const std::string& body) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error&) {
        throw TransportError("completion response is not JSON", false);
    }
    try {
        const auto& content = j.at("choices").at(0).at("message").at("content");
        if (content.is_null()) return {};
        return content.get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw TransportError("completion response has no choices[0].message.content", false);
    }
}

Endpoint parse_endpoint(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw TransportError(fmt::format("invalid URL '{}'", url), false);
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, ""};
    std::string path = url.substr(slash);
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {url.substr(0, slash), path};
}

nlohmann::json post_json(const std::string& url,
                         const nlohmann::json& body,
                         const std::string& bearer_token,
                         std::chrono::milliseconds timeout) {
    const Endpoint ep = parse_endpoint(url);
    httplib::Client client(ep.origin);
    if (!client.is_valid()) throw TransportError(fmt::format("unsupported URL '{}'", url), false);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    if (!bearer_token.empty()) client.set_bearer_token_auth(bearer_token);

    auto res = client.Post(ep.path.empty() ? "/" : ep.path, body.dump(), "application/json");
    if (!res) {
        throw TransportError(fmt::format("request to {} failed: {}", url, httplib::to_string(res.error())));
    }
    if (res->status < 200 || res->status >= 300) {
        const bool retryable = res->status >= 500 || res->status == 429;
        throw TransportError(fmt::format("{} returned HTTP {}", url, res->status), retryable);
    }
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
        throw TransportError(fmt::format("{} returned a non-JSON body", url), false);
    }
}

HttpChatTransport::HttpChatTransport(std::string base_url, std::string api_key)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)) {
    while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

std::unique_ptr<HttpChatTransport> HttpChatTransport::from_env(std::string base_url) {
    const char* key = std::getenv("ATTRIB_EVAL_API_KEY");
    if (key == nullptr || *key == '\0') throw TransportError("ATTRIB_EVAL_API_KEY is not set", false);
    return std::make_unique<HttpChatTransport>(std::move(base_url), key);
}

std::string HttpChatTransport::complete(const std::vector<ChatMessage>& messages, const CompletionParams& params) {
    const auto reply = post_json(base_url_ + "/chat/completions", build_chat_request(messages, params), api_key_,
                                 params.timeout);
    return parse_chat_response(reply.dump());
}

ScriptedTransport::ScriptedTransport(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::string ScriptedTransport::complete(const std::vector<ChatMessage>& messages, const CompletionParams&) {
    const auto path = dir_ / (prompt_key(messages) + ".txt");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TransportError(fmt::format("no fixture for prompt {}", path.string()), false);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RecordingTransport::RecordingTransport(ChatTransport& inner, std::filesystem::path dir)
    : inner_(inner), dir_(std::move(dir)) {}

std::string RecordingTransport::complete(const std::vector<ChatMessage>& messages, const CompletionParams& params) {
    std::string reply = inner_.complete(messages, params);
    std::lock_guard lock(mutex_);
    std::filesystem::create_directories(dir_);
    std::ofstream out(dir_ / (prompt_key(messages) + ".txt"), std::ios::binary | std::ios::trunc);
    out << reply;
    if (!out) throw Error(fmt::format("cannot write fixture into {}", dir_.string()));
    return reply;
}

ThrottledTransport::ThrottledTransport(ChatTransport& inner, double requests_per_second)
    : inner_(inner),
      interval_(requests_per_second > 0
                    ? std::chrono::nanoseconds(static_cast<long long>(1e9 / requests_per_second))
                    : std::chrono::nanoseconds(0)),
      next_slot_(std::chrono::steady_clock::now()) {}

std::string ThrottledTransport::complete(const std::vector<ChatMessage>& messages, const CompletionParams& params) {
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(mutex_);
        const auto now = std::chrono::steady_clock::now();
        slot = std::max(now, next_slot_);
        next_slot_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
    return inner_.complete(messages, params);
}

std::string complete_with_retry(ChatTransport& transport,
                                const std::vector<ChatMessage>& messages,
                                const CompletionParams& params,
                                const RetryPolicy& policy) {
    auto backoff = policy.initial_backoff;
    const int attempts = std::max(1, policy.attempts);
    for (int attempt = 1;; ++attempt) {
        try {
            return transport.complete(messages, params);
        } catch (const TransportError& e) {
            if (!e.retryable() || attempt >= attempts) throw;
            spdlog::warn("transport error (attempt {}/{}): {}", attempt, attempts, e.what());
        }
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
    }
}

}  // namespace attrib::llm
