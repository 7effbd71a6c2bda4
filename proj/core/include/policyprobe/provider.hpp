#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>

#include "policyprobe/budget.hpp"
#include "policyprobe/cache.hpp"
#include "policyprobe/clock.hpp"
#include "policyprobe/money.hpp"
#include "policyprobe/prompting.hpp"
#include "policyprobe/rate_limiter.hpp"
#include "policyprobe/transport.hpp"

namespace policyprobe {

// One reachable chat-completion endpoint with its limits and pricing.
// Prices live in configuration, never in code: provider pricing drifts.
struct ModelProfile {
    std::string profile_id;
    std::string endpoint_url;
    std::string model_name;
    long long context_limit = 0;
    long long tokens_per_minute = 0;
    Money price_in_per_1k;   // per 1,000 input tokens
    Money price_out_per_1k;  // per 1,000 output tokens
    bool supports_seed = true;
};

// Defaults are the deterministic regime: temperature 0, top_p 1, fixed seed.
struct ModelParameters {
    double temperature = 0.0;
    double top_p = 1.0;
    std::optional<long long> seed = 42;
    long long max_output_tokens = 512;

    bool operator==(const ModelParameters&) const = default;
};

struct TokenUsage {
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
};

struct ChatExchange {
    std::string profile_id;
    std::string model_name;
    std::string content_hash;  // cache key of the request
    std::string request_body;
    std::string response_text;
    TokenUsage usage;
    std::chrono::milliseconds latency{0};
    bool cache_hit = false;
    int retries = 0;
};

struct ChatClientOptions {
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{1000};  // 1s -> 2s -> 4s
    const char* api_key_env = "POLICYPROBE_API_KEY";
};

// Sends prompt plans over an OpenAI-compatible chat-completions wire:
// POST {endpoint}/v1/chat/completions with {model, messages, temperature,
// top_p, seed?, max_tokens}. Orchestrates the context pre-check, the response
// cache, the rate limiter, and retry backoff. Retries apply only to transport
// errors and server rate-limit responses; other HTTP errors surface with the
// body attached.
class ChatClient {
public:
    ChatClient(std::shared_ptr<HttpTransport> transport, std::shared_ptr<Clock> clock,
               TokenCounter counter, std::shared_ptr<RateLimiter> limiter = nullptr,
               std::shared_ptr<ResponseCache> cache = nullptr, ChatClientOptions options = {});

    // bypass_cache skips both lookup and store (consistency audits need
    // fresh responses).
    ChatExchange send_chat(const PromptPlan& plan, const ModelProfile& profile,
                           const ModelParameters& params, bool bypass_cache = false);

    // Exact serialized request body; tests verify parameter passthrough on it.
    static std::string request_body(const PromptPlan& plan, const ModelProfile& profile,
                                    const ModelParameters& params);
    // Cache key over (profile_id, model_name, params, messages).
    static std::string content_hash(const PromptPlan& plan, const ModelProfile& profile,
                                    const ModelParameters& params);

    long long estimate_prompt_tokens(const PromptPlan& plan) const;

    const TokenCounter& counter() const { return counter_; }

private:
    ChatExchange from_response_body(const PromptPlan& plan, const ModelProfile& profile,
                                    const std::string& hash, const std::string& request,
                                    const std::string& response_body,
                                    std::chrono::milliseconds latency, bool cache_hit,
                                    int retries) const;

    std::shared_ptr<HttpTransport> transport_;
    std::shared_ptr<Clock> clock_;
    TokenCounter counter_;
    std::shared_ptr<RateLimiter> limiter_;
    std::shared_ptr<ResponseCache> cache_;
    ChatClientOptions options_;
};

}  // namespace policyprobe
