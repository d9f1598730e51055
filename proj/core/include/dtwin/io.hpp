#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dtwin {

/// Writes to a sibling temporary file and renames it over path.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// Shortest decimal with 17 significant digits in scientific notation.
std::string format_sci17(double value);

std::vector<std::string> split_csv_line(std::string_view line);

/// Strict full-string parse; throws InvalidInput naming the context.
double parse_double(std::string_view text, std::string_view context);

}  // namespace dtwin
