#pragma once

#include <string>

namespace uabs {

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

/// Lowercase hex SHA-256 of a file's contents. Throws IO.
std::string file_sha256_hex(const std::string& path);

}  // namespace uabs
