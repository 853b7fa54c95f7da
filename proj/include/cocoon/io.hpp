#pragma once

#include <string>
#include <vector>

namespace cocoon {

// Writes to "<path>.tmp" then renames over path.
void write_text_atomic(const std::string& path, const std::string& content);
void write_lines_atomic(const std::string& path, const std::vector<std::string>& lines);

std::string read_text(const std::string& path);

// Fixed-point decimal rendering ("%.*f"), locale independent.
std::string format_fixed(double value, int decimals);

}  // namespace cocoon
