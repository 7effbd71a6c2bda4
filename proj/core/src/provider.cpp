#include "policyprobe/provider.hpp"

#include <cstdlib>

#include "json.hpp"

#include "policyprobe/errors.hpp"
#include "policyprobe/sha256.hpp"

namespace policyprobe {

using nlohmann::json;

namespace {

json messages_json(const PromptPlan& plan) {
    json messages = json::array();
    for (const auto& message : plan.messages) {
        messages.push_back({{"role", std::string(to_string(message.role))},
                            {"content", message.content}});
    }
    return messages;
}

bool retryable_status(int status) {
    // server-side rate limit; everything else non-200 surfaces to the caller
    return status == 429;
}

}  // namespace

ChatClient::ChatClient(std::shared_ptr<HttpTransport> transport, std::shared_ptr<Clock> clock,
                       TokenCounter counter, std::shared_ptr<RateLimiter> limiter,
                       std::shared_ptr<ResponseCache> cache, ChatClientOptions options)
    : transport_(std::move(transport)),
      clock_(std::move(clock)),
      counter_(std::move(counter)),
      limiter_(std::move(limiter)),
      cache_(std::move(cache)),
      options_(options) {
    if (!transport_) throw ProviderError("chat client needs a transport");
    if (!clock_) throw ProviderError("chat client needs a clock");
}

std::string ChatClient::request_body(const PromptPlan& plan, const ModelProfile& profile,
                                     const ModelParameters& params) {
    json body = {
        {"model", profile.model_name},
        {"messages", messages_json(plan)},
        {"temperature", params.temperature},
        {"top_p", params.top_p},
        {"max_tokens", params.max_output_tokens},
    };
    if (params.seed && profile.supports_seed) body["seed"] = *params.seed;
    return body.dump();
}

std::string ChatClient::content_hash(const PromptPlan& plan, const ModelProfile& profile,
                                     const ModelParameters& params) {
    json key = {
        {"profile_id", profile.profile_id},
        {"model_name", profile.model_name},
        {"temperature", params.temperature},
        {"top_p", params.top_p},
        {"max_tokens", params.max_output_tokens},
        {"messages", messages_json(plan)},
    };
    if (params.seed) key["seed"] = *params.seed;
    return sha256_hex(key.dump());
}

long long ChatClient::estimate_prompt_tokens(const PromptPlan& plan) const {
    long long total = 0;
    for (const auto& message : plan.messages) total += counter_.count(message.content);
    return total;
}

ChatExchange ChatClient::from_response_body(const PromptPlan& plan, const ModelProfile& profile,
                                            const std::string& hash, const std::string& request,
                                            const std::string& response_body,
                                            std::chrono::milliseconds latency, bool cache_hit,
                                            int retries) const {
    json doc;
    try {
        doc = json::parse(response_body);
    } catch (const json::exception& e) {
        throw ProviderError(std::string("unparseable completion response: ") + e.what(), 200,
                            response_body);
    }

    ChatExchange exchange;
    exchange.profile_id = profile.profile_id;
    exchange.model_name = profile.model_name;
    exchange.content_hash = hash;
    exchange.request_body = request;
    exchange.latency = latency;
    exchange.cache_hit = cache_hit;
    exchange.retries = retries;

    try {
        exchange.response_text =
            doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ProviderError(std::string("completion response lacks choices[0].message.content: ") +
                                e.what(),
                            200, response_body);
    }

    exchange.usage.prompt_tokens = doc.value("usage", json::object()).value("prompt_tokens", 0LL);
    exchange.usage.completion_tokens =
        doc.value("usage", json::object()).value("completion_tokens", 0LL);
    if (exchange.usage.prompt_tokens <= 0)
        exchange.usage.prompt_tokens = estimate_prompt_tokens(plan);
    if (exchange.usage.completion_tokens <= 0)
        exchange.usage.completion_tokens = counter_.count(exchange.response_text);
    return exchange;
}

ChatExchange ChatClient::send_chat(const PromptPlan& plan, const ModelProfile& profile,
                                   const ModelParameters& params, bool bypass_cache) {
    if (plan.messages.empty()) throw ProviderError("prompt plan has no messages");

    const std::string body = request_body(plan, profile, params);
    const std::string hash = content_hash(plan, profile, params);

    const long long prompt_tokens = estimate_prompt_tokens(plan);
    if (profile.context_limit > 0 &&
        prompt_tokens + params.max_output_tokens > profile.context_limit) {
        throw ProviderError("request of ~" + std::to_string(prompt_tokens) + " prompt tokens + " +
                            std::to_string(params.max_output_tokens) +
                            " output tokens exceeds the context limit of " +
                            std::to_string(profile.context_limit) + " for profile '" +
                            profile.profile_id + "'");
    }

    if (!bypass_cache && cache_) {
        if (const auto cached = cache_->lookup(hash)) {
            return from_response_body(plan, profile, hash, cached->request_body,
                                      cached->response_body, std::chrono::milliseconds(0),
                                      /*cache_hit=*/true, /*retries=*/0);
        }
    }

    HttpTransport::Headers headers{{"Content-Type", "application/json"}};
    if (const char* key = std::getenv(options_.api_key_env); key != nullptr && *key != '\0')
        headers.emplace_back("Authorization", std::string("Bearer ") + key);

    const std::string url = profile.endpoint_url + "/v1/chat/completions";

    if (limiter_) limiter_->acquire(prompt_tokens + params.max_output_tokens);

    const auto request_wall_ms = [] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
    };

    int retries = 0;
    std::string last_error;
    const std::int64_t started_unix_ms = request_wall_ms();
    const auto started = clock_->now();

    for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
        if (attempt > 0) {
            clock_->sleep_for(options_.initial_backoff * (1 << (attempt - 1)));
            ++retries;
        }
        HttpResponse response;
        try {
            response = transport_->post(url, headers, body);
        } catch (const ProviderError& e) {
            last_error = e.what();
            continue;  // transport-level failure: retryable
        }

        if (response.status == 200) {
            const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                clock_->now() - started);
            auto exchange = from_response_body(plan, profile, hash, body, response.body, latency,
                                               /*cache_hit=*/false, retries);
            if (!bypass_cache && cache_) {
                cache_->insert(hash, {body, response.body, started_unix_ms, request_wall_ms()});
            }
            return exchange;
        }
        if (retryable_status(response.status)) {
            last_error = "rate-limited (HTTP " + std::to_string(response.status) + ")";
            continue;
        }
        throw ProviderError("HTTP " + std::to_string(response.status) + " from " + url,
                            response.status, response.body);
    }

    throw ProviderError("request failed after " + std::to_string(options_.max_retries) +
                        " retries: " + last_error);
}

}  // namespace policyprobe
