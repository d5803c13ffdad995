#pragma once

#include <string>
#include <vector>

namespace sami {

// Write-temp-then-rename so readers never observe a partial file.
void atomic_write_file(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

void ensure_dir(const std::string& path);

// Minimal CSV assembly; fields containing commas, quotes or newlines are
// quoted per RFC 4180.
std::string csv_field(const std::string& s);
std::string csv_line(const std::vector<std::string>& fields);

std::string format_double(double v);  // shortest round-trip representation

}  // namespace sami
