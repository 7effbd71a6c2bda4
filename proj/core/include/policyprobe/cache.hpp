#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>

namespace policyprobe {

// Append-only store of completed exchanges keyed by the request content hash.
// One length-prefixed binary record per exchange (hash, request body bytes,
// response body bytes, timestamps); reopening a run directory replays the
// file, so identical requests are answered without re-billing the provider.
// Safe for concurrent lookup/insert.
class ResponseCache {
public:
    struct Entry {
        std::string request_body;
        std::string response_body;
        std::int64_t request_unix_ms = 0;
        std::int64_t response_unix_ms = 0;

        bool operator==(const Entry&) const = default;
    };

    // Loads existing records; a truncated trailing record (interrupted write)
    // is dropped so the file stays appendable.
    explicit ResponseCache(std::filesystem::path file);

    std::optional<Entry> lookup(const std::string& key_hex) const;
    // No-op if the key is already present (append-only, first write wins).
    void insert(const std::string& key_hex, const Entry& entry);

    std::size_t size() const;
    const std::filesystem::path& file() const { return file_; }

private:
    void append_record(const std::string& key_hex, const Entry& entry);

    std::filesystem::path file_;
    mutable std::mutex mutex_;
    std::map<std::string, Entry> entries_;
};

}  // namespace policyprobe
