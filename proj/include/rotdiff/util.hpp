#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rotdiff {

/// Formats a double with 17 significant digits. Guarantees exact binary
/// round trip through strtod, and a fixed byte representation for a given
/// bit pattern (needed for reproducible dataset/report files).
std::string fmt17(double x);

/// FNV-1a 64-bit hash over raw bytes. Content hash for file headers.
uint64_t fnv1a64(const std::string& bytes);

std::string to_hex(uint64_t v);

/// Reads a whole file into a string. Throws std::runtime_error on failure.
std::string read_file(const std::string& path);

/// Writes a string to a file atomically enough for our purposes
/// (truncate + write). Throws std::runtime_error on failure.
void write_file(const std::string& path, const std::string& contents);

}  // namespace rotdiff
