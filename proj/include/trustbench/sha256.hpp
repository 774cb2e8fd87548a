#pragma once

#include <string>
#include <string_view>

namespace trustbench {

// Lowercase hex SHA-256 digest of the input bytes.
std::string sha256_hex(std::string_view data);

}  // namespace trustbench
