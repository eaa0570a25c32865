#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace pmpthermo::io {

/// Fixed formatting for every emitted number: 15 significant digits.
std::string format_number(double value);

/// Value rounded to 15 significant digits, so JSON serialization of the
/// result prints at most 15 digits.
double round15(double value);

/// Writes to `<path>.tmp` and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace pmpthermo::io
