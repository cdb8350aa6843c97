#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace safecharge {

// Shortest round-trip decimal form of a double ("." separator, no locale).
// Parsing the result back yields the identical bit pattern, which is what
// makes CSV outputs byte-stable across reruns.
std::string format_double(double value);

std::string format_int(long long value);

// Splits one CSV line on ','. No quoting: none of our fields contain commas.
std::vector<std::string> split_csv_line(const std::string& line);

// Reads a whole file; throws std::runtime_error if it cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Writes content atomically-ish (truncate + write); LF line endings are the
// caller's responsibility. Throws std::runtime_error on failure.
void write_file(const std::filesystem::path& path, const std::string& content);

double parse_double(const std::string& text);

}  // namespace safecharge
