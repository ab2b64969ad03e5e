#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace consentforge::llm {

enum class Role { System, User, Assistant };

std::string_view to_string(Role r);
Role role_from_string(std::string_view s);

struct Message {
    Role role = Role::User;
    std::string content;

    bool operator==(const Message&) const = default;
};

/// Ordered chat messages. Valid when non-empty, every content is non-empty,
/// and a System message, if any, is the single first message.
struct Transcript {
    std::vector<Message> messages;

    bool operator==(const Transcript&) const = default;

    /// Throws Error(InvalidTranscript) describing the first violation.
    void validate() const;
};

nlohmann::json to_json(const Transcript& t);

/// SHA-256 over (role "\n" content) per message, messages joined by 0x1E.
std::string fingerprint(const Transcript& t);

struct GenerationParams {
    std::string model_id = "mock";
    double temperature = 0.0;
    double top_p = 0.0;
    std::int64_t max_tokens = 3000;

    /// Throws Error(InvalidParams).
    void validate() const;
};

/// temperature 0, top_p 0, max_tokens 3000.
GenerationParams generation_defaults(std::string model_id = "mock");
/// temperature 0, top_p 0, max_tokens 300.
GenerationParams verifier_defaults(std::string model_id = "mock");

struct CompletionResult {
    std::string text;
    std::string model_id;
    std::int64_t latency_ms = 0;
    std::int64_t attempt_count = 1;
};

/// One chat-completion backend. Implementations throw Error with a retryable
/// code (Transport, RateLimited) for transient failures and ProviderError for
/// everything else.
class ChatProvider {
public:
    virtual ~ChatProvider() = default;

    virtual std::string name() const = 0;
    virtual std::string chat(const Transcript& transcript, const GenerationParams& params) = 0;
};

/// Deterministic scripted provider keyed by transcript fingerprint. A key of
/// the form "<model_id>/<fingerprint>" takes precedence over the bare
/// fingerprint, so one script can give a verifier panel distinct answers.
class MockProvider final : public ChatProvider {
public:
    explicit MockProvider(std::map<std::string, std::string> script, std::string name = "mock");

    /// Reads a JSON object mapping fingerprint -> response text.
    static std::map<std::string, std::string> load_script(const std::filesystem::path& path);
    static MockProvider from_file(const std::filesystem::path& path);

    std::string name() const override { return name_; }

    /// Unknown fingerprints raise ProviderError carrying the fingerprint.
    std::string chat(const Transcript& transcript, const GenerationParams& params) override;

    /// The next `count` calls fail with a transient Transport error.
    void fail_next(std::size_t count);

    std::size_t calls() const;
    std::size_t script_size() const { return script_.size(); }

private:
    std::map<std::string, std::string> script_;
    std::string name_;
    mutable std::mutex mutex_;
    std::size_t pending_failures_ = 0;
    std::size_t calls_ = 0;
};

/// OpenAI-compatible chat-completions endpoint:
/// POST {endpoint} {"model", "messages", "temperature", "top_p", "max_tokens"}
/// -> choices[0].message.content.
struct HttpProviderConfig {
    std::string name;
    std::string endpoint;
    /// Environment variable holding the bearer token; empty means no auth header.
    std::string api_key_env;
    std::chrono::seconds timeout{120};
};

class HttpChatProvider final : public ChatProvider {
public:
    explicit HttpChatProvider(HttpProviderConfig config);

    std::string name() const override { return config_.name; }
    std::string chat(const Transcript& transcript, const GenerationParams& params) override;

private:
    HttpProviderConfig config_;
};

nlohmann::json chat_request_body(const Transcript& transcript, const GenerationParams& params);

struct RetryPolicy {
    int max_retries = 2;
    std::chrono::milliseconds base_delay{500};
    double multiplier = 2.0;

    /// Delay before retry number `retry` (1-based).
    std::chrono::milliseconds delay_for(int retry) const;
};

/// Token bucket per provider name. Capacity and refill are both
/// `requests_per_minute`; 0 disables limiting.
class RateLimiter {
public:
    using Clock = std::function<std::chrono::steady_clock::time_point()>;

    explicit RateLimiter(double requests_per_minute = 60.0, Clock clock = {});

    /// Takes one token if available. On failure returns false and the wait
    /// until the next token.
    bool try_acquire(const std::string& provider, std::chrono::milliseconds* wait = nullptr);

    double requests_per_minute() const { return rpm_; }

private:
    struct Bucket {
        double tokens;
        std::chrono::steady_clock::time_point last;
    };

    double rpm_;
    Clock clock_;
    std::mutex mutex_;
    std::map<std::string, Bucket> buckets_;
};

struct GatewayOptions {
    RetryPolicy retry;
    double requests_per_minute = 60.0;
    /// When the budget is spent: false -> throw RateLimited, true -> sleep until a token frees.
    bool wait_for_budget = false;
};

/// Front door for every model call: validates inputs, applies the rate
/// budget, and retries transient failures with exponential backoff.
/// Safe to call concurrently.
class Gateway {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit Gateway(GatewayOptions options = {}, Sleeper sleeper = {}, RateLimiter::Clock clock = {});

    /// Errors: InvalidParams, InvalidTranscript, ProviderError, Exhausted, RateLimited.
    CompletionResult complete(ChatProvider& provider, const Transcript& transcript,
                              const GenerationParams& params);

    const GatewayOptions& options() const { return options_; }

private:
    GatewayOptions options_;
    Sleeper sleeper_;
    RateLimiter limiter_;
};

} // namespace consentforge::llm
