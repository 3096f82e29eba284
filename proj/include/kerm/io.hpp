#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace kerm::io {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Splits on '\n'; a trailing newline does not produce an empty last line.
std::vector<std::string> split_lines(std::string_view text);

}  // namespace kerm::io
