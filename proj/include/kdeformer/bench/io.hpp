#pragma once

#include <filesystem>
#include <iosfwd>

#include "kdeformer/core/dense_matrix.hpp"

namespace kdeformer::bench {

enum class MatrixFormat { kAuto, kCsv, kRawF32 };

/// kAuto: ".csv" is CSV, anything else is sniffed for the "KDF1" magic.
MatrixFormat detect_format(const std::filesystem::path& path);

/// CSV: one row per line, comma-separated decimals, blank lines ignored.
/// Errors (kParse) carry the 1-based line number.
DenseMatrix read_csv(std::istream& in);
void write_csv(std::ostream& out, const DenseMatrix& m);

/// RAWF32: "KDF1", u32 rows, u32 cols, rows*cols little-endian f32.
DenseMatrix read_rawf32(std::istream& in);
void write_rawf32(std::ostream& out, const DenseMatrix& m);

DenseMatrix load_matrix(const std::filesystem::path& path, MatrixFormat format = MatrixFormat::kAuto);
void save_matrix(const std::filesystem::path& path, const DenseMatrix& m,
                 MatrixFormat format = MatrixFormat::kAuto);

}  // namespace kdeformer::bench
