#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace vidmem::util {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool starts_with_icase(std::string_view s, std::string_view prefix);

// Removes one layer of matching ' or " quotes around the (trimmed) text.
std::string strip_quotes(std::string_view s);

// Python-style repr of a string: '...' unless it contains ' and no ".
std::string py_repr(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace vidmem::util
