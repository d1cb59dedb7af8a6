#pragma once

#include <filesystem>
#include <string>

#include "swed/matrix.hpp"

namespace swed {

enum class MatrixFormat { binary, text };

/// Write `m` to `path` in the SWED1 binary layout or as whitespace-separated
/// text (one row per line, shortest round-trip decimal literals).
void write_matrix(const std::filesystem::path& path, const Matrix& m,
                  MatrixFormat format = MatrixFormat::binary);

/// Read a matrix from `path`. Files opening with the SWED1 magic are decoded
/// as binary; anything else is parsed as text. Non-finite entries are
/// rejected.
Matrix read_matrix(const std::filesystem::path& path);

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

} // namespace swed
