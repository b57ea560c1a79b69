#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace qemind::io {

/// Writes via a sibling temp file and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

std::vector<std::string_view> split(std::string_view line, char sep);

/// `%.17g`: round-trips every double.
std::string format_g17(double value);

/// Shortest decimal that parses back to the same double.
std::string format_shortest(double value);

/// Strict full-string parse; returns false on trailing garbage or overflow.
bool parse_double(std::string_view text, double& out);

}  // namespace qemind::io
