#include "consentforge/llm_gateway.hpp"

#include "consentforge/error.hpp"
#include "consentforge/hash.hpp"
#include "consentforge/jsonl.hpp"
#include "http_util.hpp"

#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <thread>

namespace consentforge::llm {

std::string_view to_string(Role r) {
    switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    }
    return "user";
}

Role role_from_string(std::string_view s) {
    if (s == "system") return Role::System;
    if (s == "user") return Role::User;
    if (s == "assistant") return Role::Assistant;
    throw Error(ErrorCode::InvalidTranscript, "unknown role: " + std::string(s));
}

void Transcript::validate() const {
    if (messages.empty()) throw Error(ErrorCode::InvalidTranscript, "transcript is empty");
    for (std::size_t i = 0; i < messages.size(); ++i) {
        if (messages[i].content.empty()) {
            throw Error(ErrorCode::InvalidTranscript, "message " + std::to_string(i) + " has empty content");
        }
        if (messages[i].role == Role::System && i != 0) {
            throw Error(ErrorCode::InvalidTranscript, "system message must be first and unique");
        }
    }
}

nlohmann::json to_json(const Transcript& t) {
    auto arr = nlohmann::json::array();
    for (const auto& m : t.messages) arr.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    return arr;
}

std::string fingerprint(const Transcript& t) {
    std::string canonical;
    for (std::size_t i = 0; i < t.messages.size(); ++i) {
        if (i > 0) canonical.push_back('\x1e');
        canonical.append(to_string(t.messages[i].role));
        canonical.push_back('\n');
        canonical.append(t.messages[i].content);
    }
    return sha256_hex(canonical);
}

void GenerationParams::validate() const {
    if (!(temperature >= 0.0 && temperature <= 2.0)) {
        throw Error(ErrorCode::InvalidParams, "temperature must be in [0, 2]");
    }
    if (!(top_p >= 0.0 && top_p <= 1.0)) throw Error(ErrorCode::InvalidParams, "top_p must be in [0, 1]");
    if (max_tokens < 1) throw Error(ErrorCode::InvalidParams, "max_tokens must be >= 1");
}

GenerationParams generation_defaults(std::string model_id) {
    return GenerationParams{std::move(model_id), 0.0, 0.0, 3000};
}

GenerationParams verifier_defaults(std::string model_id) {
    return GenerationParams{std::move(model_id), 0.0, 0.0, 300};
}

MockProvider::MockProvider(std::map<std::string, std::string> script, std::string name)
    : script_(std::move(script)), name_(std::move(name)) {}

std::map<std::string, std::string> MockProvider::load_script(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(jsonl::read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::InvalidInput, "mock script " + path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw Error(ErrorCode::InvalidInput, "mock script must be a JSON object");
    std::map<std::string, std::string> script;
    for (auto it = j.begin(); it != j.end(); ++it) script.emplace(it.key(), it.value().get<std::string>());
    return script;
}

MockProvider MockProvider::from_file(const std::filesystem::path& path) { return MockProvider(load_script(path)); }

std::string MockProvider::chat(const Transcript& transcript, const GenerationParams& params) {
    {
        std::lock_guard lock(mutex_);
        ++calls_;
        if (pending_failures_ > 0) {
            --pending_failures_;
            throw Error(ErrorCode::Transport, "mock: scripted transient failure");
        }
    }
    const std::string fp = fingerprint(transcript);
    auto it = script_.find(params.model_id + "/" + fp);
    if (it == script_.end()) it = script_.find(fp);
    if (it == script_.end()) throw Error(ErrorCode::ProviderError, "mock: no scripted response for fingerprint " + fp);
    return it->second;
}

void MockProvider::fail_next(std::size_t count) {
    std::lock_guard lock(mutex_);
    pending_failures_ = count;
}

std::size_t MockProvider::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

nlohmann::json chat_request_body(const Transcript& transcript, const GenerationParams& params) {
    return {{"model", params.model_id},
            {"messages", to_json(transcript)},
            {"temperature", params.temperature},
            {"top_p", params.top_p},
            {"max_tokens", params.max_tokens}};
}

HttpChatProvider::HttpChatProvider(HttpProviderConfig config) : config_(std::move(config)) {}

std::string HttpChatProvider::chat(const Transcript& transcript, const GenerationParams& params) {
    auto url = detail::split_url(config_.endpoint);
    httplib::Client client(url.origin);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);

    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw Error(ErrorCode::ProviderError, config_.name + ": environment variable " + config_.api_key_env + " is not set");
        }
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    auto res = client.Post(url.path.empty() ? "/" : url.path, headers,
                           chat_request_body(transcript, params).dump(), "application/json");
    if (!res) throw Error(ErrorCode::Transport, config_.name + ": " + httplib::to_string(res.error()));
    if (res->status == 429) throw Error(ErrorCode::RateLimited, config_.name + ": HTTP 429");
    if (res->status >= 500) throw Error(ErrorCode::Transport, config_.name + ": HTTP " + std::to_string(res->status));
    if (res->status != 200) {
        throw Error(ErrorCode::ProviderError, config_.name + ": HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    try {
        auto body = nlohmann::json::parse(res->body);
        return body.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ProviderError, config_.name + ": malformed completion: " + e.what());
    }
}

std::chrono::milliseconds RetryPolicy::delay_for(int retry) const {
    const double scale = std::pow(multiplier, std::max(0, retry - 1));
    return std::chrono::milliseconds(static_cast<std::int64_t>(static_cast<double>(base_delay.count()) * scale));
}

RateLimiter::RateLimiter(double requests_per_minute, Clock clock)
    : rpm_(requests_per_minute), clock_(clock ? std::move(clock) : Clock([] { return std::chrono::steady_clock::now(); })) {}

bool RateLimiter::try_acquire(const std::string& provider, std::chrono::milliseconds* wait) {
    if (rpm_ <= 0.0) return true;
    std::lock_guard lock(mutex_);
    const auto now = clock_();
    auto [it, inserted] = buckets_.try_emplace(provider, Bucket{rpm_, now});
    Bucket& b = it->second;
    const double per_ms = rpm_ / 60000.0;
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(now - b.last).count();
    if (elapsed > 0) {
        b.tokens = std::min(rpm_, b.tokens + static_cast<double>(elapsed) * per_ms);
        b.last = now;
    }
    if (b.tokens >= 1.0) {
        b.tokens -= 1.0;
        return true;
    }
    if (wait != nullptr) {
        *wait = std::chrono::milliseconds(static_cast<std::int64_t>(std::ceil((1.0 - b.tokens) / per_ms)));
    }
    return false;
}

Gateway::Gateway(GatewayOptions options, Sleeper sleeper, RateLimiter::Clock clock)
    : options_(options),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })),
      limiter_(options.requests_per_minute, std::move(clock)) {}

CompletionResult Gateway::complete(ChatProvider& provider, const Transcript& transcript,
                                   const GenerationParams& params) {
    params.validate();
    transcript.validate();

    const auto start = std::chrono::steady_clock::now();
    const int max_attempts = options_.retry.max_retries + 1;
    std::string last_error;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        std::chrono::milliseconds wait{0};
        while (!limiter_.try_acquire(provider.name(), &wait)) {
            if (!options_.wait_for_budget) {
                throw Error(ErrorCode::RateLimited,
                            provider.name() + ": request budget exhausted; retry in " + std::to_string(wait.count()) + " ms");
            }
            sleeper_(wait);
        }
        try {
            std::string text = provider.chat(transcript, params);
            CompletionResult result;
            result.text = std::move(text);
            result.model_id = params.model_id;
            result.attempt_count = attempt;
            result.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                    std::chrono::steady_clock::now() - start).count();
            return result;
        } catch (const Error& e) {
            if (!e.retryable()) throw;
            last_error = e.what();
        }
        if (attempt < max_attempts) sleeper_(options_.retry.delay_for(attempt));
    }
    throw Error(ErrorCode::Exhausted,
                provider.name() + ": gave up after " + std::to_string(max_attempts) + " attempts: " + last_error);
}

} // namespace consentforge::llm
