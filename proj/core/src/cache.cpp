#include "policyprobe/cache.hpp"

#include <fstream>

#include "policyprobe/errors.hpp"

namespace policyprobe {

namespace {

constexpr char kMagic[8] = {'P', 'P', 'C', 'A', 'C', 'H', 'E', '1'};
constexpr std::size_t kHashBytes = 32;

void put_u32(std::string& out, std::uint32_t value) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

void put_i64(std::string& out, std::int64_t value) {
    const auto bits = static_cast<std::uint64_t>(value);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const char* p) {
    std::uint32_t value = 0;
    for (int i = 0; i < 4; ++i)
        value |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return value;
}

std::int64_t get_i64(const char* p) {
    std::uint64_t value = 0;
    for (int i = 0; i < 8; ++i)
        value |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return static_cast<std::int64_t>(value);
}

std::string hash_to_raw(const std::string& key_hex) {
    if (key_hex.size() != kHashBytes * 2)
        throw Error("cache key must be a 64-character hex digest");
    std::string raw(kHashBytes, '\0');
    for (std::size_t i = 0; i < kHashBytes; ++i) {
        const auto nibble = [&](char c) -> unsigned {
            if (c >= '0' && c <= '9') return static_cast<unsigned>(c - '0');
            if (c >= 'a' && c <= 'f') return static_cast<unsigned>(c - 'a' + 10);
            if (c >= 'A' && c <= 'F') return static_cast<unsigned>(c - 'A' + 10);
            throw Error("cache key is not hex");
        };
        raw[i] = static_cast<char>((nibble(key_hex[i * 2]) << 4) | nibble(key_hex[i * 2 + 1]));
    }
    return raw;
}

std::string raw_to_hex(const char* raw) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(kHashBytes * 2);
    for (std::size_t i = 0; i < kHashBytes; ++i) {
        const auto byte = static_cast<unsigned char>(raw[i]);
        out.push_back(kHex[byte >> 4]);
        out.push_back(kHex[byte & 0x0f]);
    }
    return out;
}

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path file) : file_(std::move(file)) {
    std::ifstream in(file_, std::ios::binary);
    if (!in) return;  // fresh cache; file appears on first insert

    std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (contents.size() < sizeof(kMagic)) return;
    if (contents.compare(0, sizeof(kMagic), kMagic, sizeof(kMagic)) != 0)
        throw Error("not a cache file: " + file_.string());

    std::size_t pos = sizeof(kMagic);
    std::size_t good_end = pos;
    while (pos + 4 <= contents.size()) {
        const std::uint32_t payload_len = get_u32(contents.data() + pos);
        if (pos + 4 + payload_len > contents.size()) break;  // truncated trailing record
        const char* payload = contents.data() + pos + 4;
        if (payload_len < kHashBytes + 8 + 8 + 4 + 4) break;

        const std::string key = raw_to_hex(payload);
        Entry entry;
        entry.request_unix_ms = get_i64(payload + kHashBytes);
        entry.response_unix_ms = get_i64(payload + kHashBytes + 8);
        std::size_t offset = kHashBytes + 16;
        const std::uint32_t req_len = get_u32(payload + offset);
        offset += 4;
        if (offset + req_len + 4 > payload_len) break;
        entry.request_body.assign(payload + offset, req_len);
        offset += req_len;
        const std::uint32_t resp_len = get_u32(payload + offset);
        offset += 4;
        if (offset + resp_len > payload_len) break;
        entry.response_body.assign(payload + offset, resp_len);

        entries_.emplace(key, std::move(entry));
        pos += 4 + payload_len;
        good_end = pos;
    }

    if (good_end < contents.size()) {
        // drop the partial tail so future appends start at a record boundary
        std::filesystem::resize_file(file_, good_end);
    }
}

std::optional<ResponseCache::Entry> ResponseCache::lookup(const std::string& key_hex) const {
    std::lock_guard lock(mutex_);
    const auto it = entries_.find(key_hex);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ResponseCache::insert(const std::string& key_hex, const Entry& entry) {
    std::lock_guard lock(mutex_);
    if (!entries_.emplace(key_hex, entry).second) return;
    append_record(key_hex, entry);
}

std::size_t ResponseCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

void ResponseCache::append_record(const std::string& key_hex, const Entry& entry) {
    std::string payload;
    payload.reserve(kHashBytes + 24 + entry.request_body.size() + entry.response_body.size());
    payload += hash_to_raw(key_hex);
    put_i64(payload, entry.request_unix_ms);
    put_i64(payload, entry.response_unix_ms);
    put_u32(payload, static_cast<std::uint32_t>(entry.request_body.size()));
    payload += entry.request_body;
    put_u32(payload, static_cast<std::uint32_t>(entry.response_body.size()));
    payload += entry.response_body;

    const bool fresh = !std::filesystem::exists(file_) || std::filesystem::file_size(file_) == 0;
    std::ofstream out(file_, std::ios::binary | std::ios::app);
    if (!out) throw Error("cannot append to cache file " + file_.string());
    if (fresh) out.write(kMagic, sizeof(kMagic));

    std::string header;
    put_u32(header, static_cast<std::uint32_t>(payload.size()));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    out.flush();
    if (!out) throw Error("short write to cache file " + file_.string());
}

}  // namespace policyprobe
