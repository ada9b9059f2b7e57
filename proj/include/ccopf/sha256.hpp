#pragma once

#include <string>

namespace ccopf {

// Hex digest of the SHA-256 of a byte string.
std::string sha256_hex(const std::string& data);
std::string sha256_file(const std::string& path);

}  // namespace ccopf
