#pragma once

#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace policyprobe {

struct HttpResponse {
    int status = 0;
    std::string body;
};

// Wire seam: everything above this interface is provider-agnostic, and the
// pipeline can run fully offline against a scripted transport.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;

    using Headers = std::vector<std::pair<std::string, std::string>>;

    // Throws ProviderError on transport-level failure (no HTTP response);
    // HTTP error statuses come back in the response for the caller to judge.
    virtual HttpResponse post(const std::string& url, const Headers& headers,
                              const std::string& body) = 0;
};

// Real HTTP client. Supports http:// and, when built with TLS, https:// URLs.
std::unique_ptr<HttpTransport> make_http_transport();

// Deterministic transport for tests and --mock runs. Responses are resolved
// in order: the scripted sequence first, then substring match rules, then the
// default text. Captures every request body so tests can assert exact
// parameter serialization. Never touches the network.
class ScriptedTransport final : public HttpTransport {
public:
    struct Entry {
        std::optional<std::string> text;  // assistant message content
        std::optional<std::string> body;  // overrides the assembled response body
        int status = 200;
        bool transport_error = false;
        int repeat = 1;
    };

    struct Rule {
        std::vector<std::string> match_all;  // every substring must occur in the body
        Entry entry;
    };

    void push_text(std::string text);
    void push_status(int status, std::string body = {});
    void push_transport_error();
    void push(Entry entry);
    void add_rule(std::string match_substring, std::string text);
    void add_rule(std::vector<std::string> match_all, Entry entry);
    void set_default_text(std::string text);

    // {"sequence": [{"text": ...} | {"status": N} | {"transport_error": true}],
    //  "rules": [{"match": ..., "text": ...} | {"match_all": [...], "text": ...}],
    //  "default_text": ...}
    static std::shared_ptr<ScriptedTransport> from_json_file(const std::filesystem::path& file);

    // Chat-completion response body carrying `text` as the assistant message.
    static std::string chat_completion_body(const std::string& text);

    HttpResponse post(const std::string& url, const Headers& headers,
                      const std::string& body) override;

    std::vector<std::string> requests() const;
    std::size_t request_count() const;
    std::size_t remaining_sequence() const;

private:
    HttpResponse serve(const Entry& entry);

    mutable std::mutex mutex_;
    std::deque<Entry> sequence_;
    std::vector<Rule> rules_;
    std::optional<std::string> default_text_;
    std::vector<std::string> requests_;
};

}  // namespace policyprobe
