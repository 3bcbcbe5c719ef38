#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace asat::csv {

/// One physical line of a CSV file, split into fields.
struct Row {
    std::size_t line = 0;  // 1-based line number in the source
    std::vector<std::string> fields;
};

/// Splits one line into fields. Double-quoted fields may contain commas and
/// doubled quotes; embedded newlines are not supported.
std::vector<std::string> split_line(std::string_view line);

/// Splits a whole document into rows, skipping blank lines. The header is
/// returned as the first row.
std::vector<Row> parse(std::string_view text);

std::string quote(std::string_view field);
std::string join(const std::vector<std::string>& fields);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace asat::csv
