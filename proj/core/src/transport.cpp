#include "policyprobe/transport.hpp"

#include <algorithm>
#include <fstream>

#ifdef POLICYPROBE_TLS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

#include "json.hpp"

#include "policyprobe/errors.hpp"

namespace policyprobe {

using nlohmann::json;

namespace {

// splits "https://host:port/base" into (scheme://host:port, /base)
std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ProviderError("malformed endpoint url '" + url + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport final : public HttpTransport {
public:
    HttpResponse post(const std::string& url, const Headers& headers,
                      const std::string& body) override {
        const auto [origin, path] = split_url(url);
#ifndef POLICYPROBE_TLS
        if (origin.rfind("https://", 0) == 0)
            throw ProviderError("built without TLS support; https endpoints unavailable");
#endif
        httplib::Client client(origin);
        client.set_connection_timeout(30);
        client.set_read_timeout(120);

        httplib::Headers request_headers;
        for (const auto& [name, value] : headers) request_headers.emplace(name, value);

        auto result = client.Post(path.empty() ? "/" : path, request_headers, body,
                                  "application/json");
        if (!result)
            throw ProviderError("transport failure: " + httplib::to_string(result.error()));
        return {result->status, result->body};
    }
};

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport() {
    return std::make_unique<HttplibTransport>();
}

void ScriptedTransport::push_text(std::string text) {
    Entry entry;
    entry.text = std::move(text);
    push(std::move(entry));
}

void ScriptedTransport::push_status(int status, std::string body) {
    Entry entry;
    entry.status = status;
    if (!body.empty()) entry.body = std::move(body);
    push(std::move(entry));
}

void ScriptedTransport::push_transport_error() {
    Entry entry;
    entry.transport_error = true;
    push(std::move(entry));
}

void ScriptedTransport::push(Entry entry) {
    std::lock_guard lock(mutex_);
    sequence_.push_back(std::move(entry));
}

void ScriptedTransport::add_rule(std::string match_substring, std::string text) {
    Entry entry;
    entry.text = std::move(text);
    add_rule(std::vector<std::string>{std::move(match_substring)}, std::move(entry));
}

void ScriptedTransport::add_rule(std::vector<std::string> match_all, Entry entry) {
    std::lock_guard lock(mutex_);
    rules_.push_back({std::move(match_all), std::move(entry)});
}

void ScriptedTransport::set_default_text(std::string text) {
    std::lock_guard lock(mutex_);
    default_text_ = std::move(text);
}

std::shared_ptr<ScriptedTransport> ScriptedTransport::from_json_file(
    const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError("cannot read mock script " + file.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }

    auto transport = std::make_shared<ScriptedTransport>();
    const auto parse_entry = [&](const json& rec) {
        Entry entry;
        if (rec.contains("text")) entry.text = rec.at("text").get<std::string>();
        if (rec.contains("body")) entry.body = rec.at("body").get<std::string>();
        if (rec.contains("status")) entry.status = rec.at("status").get<int>();
        if (rec.contains("transport_error")) entry.transport_error = rec.at("transport_error").get<bool>();
        if (rec.contains("repeat")) entry.repeat = rec.at("repeat").get<int>();
        return entry;
    };

    if (doc.contains("sequence")) {
        for (const auto& rec : doc.at("sequence")) transport->push(parse_entry(rec));
    }
    if (doc.contains("rules")) {
        for (const auto& rec : doc.at("rules")) {
            Rule rule;
            if (rec.contains("match_all"))
                rule.match_all = rec.at("match_all").get<std::vector<std::string>>();
            else
                rule.match_all.push_back(rec.at("match").get<std::string>());
            rule.entry = parse_entry(rec);
            std::lock_guard lock(transport->mutex_);
            transport->rules_.push_back(std::move(rule));
        }
    }
    if (doc.contains("default_text"))
        transport->set_default_text(doc.at("default_text").get<std::string>());
    return transport;
}

std::string ScriptedTransport::chat_completion_body(const std::string& text) {
    const json body = {
        {"id", "mock-chat"},
        {"object", "chat.completion"},
        {"choices",
         json::array({{{"index", 0},
                       {"message", {{"role", "assistant"}, {"content", text}}},
                       {"finish_reason", "stop"}}})},
        {"usage",
         {{"prompt_tokens", 0},
          {"completion_tokens", static_cast<long long>((text.size() + 3) / 4)},
          {"total_tokens", static_cast<long long>((text.size() + 3) / 4)}}},
    };
    return body.dump();
}

HttpResponse ScriptedTransport::post(const std::string& url, const Headers& headers,
                                     const std::string& body) {
    (void)url;
    (void)headers;
    Entry entry;
    {
        std::lock_guard lock(mutex_);
        requests_.push_back(body);

        if (!sequence_.empty()) {
            entry = sequence_.front();
            if (sequence_.front().repeat <= 1)
                sequence_.pop_front();
            else
                --sequence_.front().repeat;
        } else {
            bool matched = false;
            for (const auto& rule : rules_) {
                const bool all_present =
                    std::all_of(rule.match_all.begin(), rule.match_all.end(),
                                [&](const std::string& needle) {
                                    return body.find(needle) != std::string::npos;
                                });
                if (all_present) {
                    entry = rule.entry;
                    matched = true;
                    break;
                }
            }
            if (!matched) {
                if (!default_text_)
                    throw ProviderError("scripted transport has no response for request");
                entry.text = *default_text_;
            }
        }
    }
    return serve(entry);
}

HttpResponse ScriptedTransport::serve(const Entry& entry) {
    if (entry.transport_error) throw ProviderError("scripted transport error");
    if (entry.status != 200) {
        return {entry.status, entry.body.value_or("{\"error\":{\"message\":\"scripted error\"}}")};
    }
    if (entry.body) return {200, *entry.body};
    return {200, chat_completion_body(entry.text.value_or(""))};
}

std::vector<std::string> ScriptedTransport::requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

std::size_t ScriptedTransport::request_count() const {
    std::lock_guard lock(mutex_);
    return requests_.size();
}

std::size_t ScriptedTransport::remaining_sequence() const {
    std::lock_guard lock(mutex_);
    return sequence_.size();
}

}  // namespace policyprobe
