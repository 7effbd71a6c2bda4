#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace policyprobe {

// FIPS 180-4 SHA-256, used for request content hashes (cache keys) and modal
// response fingerprints.
std::array<std::uint8_t, 32> sha256_bytes(std::string_view data);
std::string sha256_hex(std::string_view data);

}  // namespace policyprobe
