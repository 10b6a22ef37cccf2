#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mkfusion {

// Malformed document; the message names the offending line or field.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary and renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace mkfusion
