#pragma once

#include <string>
#include <string_view>

namespace invabc {

/// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

/// SHA-256 of a file's contents, streamed.
std::string sha256_file(const std::string& path);

} // namespace invabc
