#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace caseret::io {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it over the destination.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

// Invokes fn(line, line_number) for each line (1-based), newline stripped.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::string_view, std::size_t)>& fn);

// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace caseret::io
