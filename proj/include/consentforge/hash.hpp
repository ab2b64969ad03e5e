#pragma once

#include <string>
#include <string_view>

namespace consentforge {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Short stable identifier: `prefix` + first `hex_chars` of the SHA-256 of `data`.
std::string stable_id(std::string_view prefix, std::string_view data, std::size_t hex_chars = 16);

} // namespace consentforge
