#include "kdeformer/bench/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "kdeformer/core/error.hpp"

namespace kdeformer::bench {

static_assert(std::endian::native == std::endian::little,
              "RAWF32 I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 4> kMagic{'K', 'D', 'F', '1'};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_cell(std::string_view cell, std::size_t line) {
  cell = trim(cell);
  double value = 0.0;
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (ec != std::errc{} || ptr != end || cell.empty()) {
    fail(ErrorCode::kParse, "line " + std::to_string(line) + ": cannot parse '" +
                                std::string(cell) + "' as a number");
  }
  if (!std::isfinite(value)) {
    fail(ErrorCode::kParse, "line " + std::to_string(line) + ": non-finite entry '" +
                                std::string(cell) + "'");
  }
  return value;
}

std::uint32_t read_u32(std::istream& in, const char* what) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
    fail(ErrorCode::kParse, std::string("RAWF32 header truncated while reading ") + what);
  }
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
         (std::uint32_t{b[3]} << 24);
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff),
                              static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

}  // namespace

DenseMatrix read_csv(std::istream& in) {
  std::vector<double> data;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    std::string_view view = trim(line);
    if (view.empty()) continue;
    std::size_t count = 0;
    while (true) {
      const auto comma = view.find(',');
      data.push_back(parse_cell(view.substr(0, comma), lineno));
      ++count;
      if (comma == std::string_view::npos) break;
      view.remove_prefix(comma + 1);
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      fail(ErrorCode::kParse, "line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(cols) + " columns, found " +
                                  std::to_string(count));
    }
    ++rows;
  }
  require(rows > 0, ErrorCode::kParse, "CSV input holds no rows");
  return DenseMatrix(rows, cols, std::move(data));
}

void write_csv(std::ostream& out, const DenseMatrix& m) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j > 0) out << ',';
      out << row[j];
    }
    out << '\n';
  }
}

DenseMatrix read_rawf32(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kMagic) {
    fail(ErrorCode::kParse, "missing RAWF32 magic \"KDF1\"");
  }
  const std::uint32_t rows = read_u32(in, "row count");
  const std::uint32_t cols = read_u32(in, "column count");
  require(rows > 0 && cols > 0, ErrorCode::kParse, "RAWF32 header declares an empty matrix");
  const std::size_t count = std::size_t{rows} * cols;
  const std::size_t expected = count * sizeof(float);
  std::vector<float> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(expected));
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got != expected) {
    fail(ErrorCode::kParse, "RAWF32 payload truncated: expected " + std::to_string(expected) +
                                " bytes, got " + std::to_string(got));
  }
  std::vector<double> data(count);
  for (std::size_t t = 0; t < count; ++t) {
    if (!std::isfinite(raw[t])) {
      fail(ErrorCode::kParse, "RAWF32 entry (" + std::to_string(t / cols) + ", " +
                                  std::to_string(t % cols) + ") is not finite");
    }
    data[t] = raw[t];
  }
  return DenseMatrix(rows, cols, std::move(data));
}

void write_rawf32(std::ostream& out, const DenseMatrix& m) {
  require(m.rows() <= std::numeric_limits<std::uint32_t>::max() &&
              m.cols() <= std::numeric_limits<std::uint32_t>::max(),
          ErrorCode::kInvalidArgument, "matrix too large for RAWF32");
  out.write(kMagic.data(), 4);
  write_u32(out, static_cast<std::uint32_t>(m.rows()));
  write_u32(out, static_cast<std::uint32_t>(m.cols()));
  std::vector<float> raw(m.data().begin(), m.data().end());
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(float)));
}

MatrixFormat detect_format(const std::filesystem::path& path) {
  if (path.extension() == ".csv") return MatrixFormat::kCsv;
  std::ifstream in(path, std::ios::binary);
  std::array<char, 4> magic{};
  if (in.read(magic.data(), 4) && magic == kMagic) return MatrixFormat::kRawF32;
  const auto ext = path.extension();
  if (ext == ".kdf" || ext == ".rawf32" || ext == ".bin") return MatrixFormat::kRawF32;
  return MatrixFormat::kCsv;
}

DenseMatrix load_matrix(const std::filesystem::path& path, MatrixFormat format) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open '" + path.string() + "'");
  if (format == MatrixFormat::kAuto) format = detect_format(path);
  try {
    return format == MatrixFormat::kCsv ? read_csv(in) : read_rawf32(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void save_matrix(const std::filesystem::path& path, const DenseMatrix& m, MatrixFormat format) {
  if (format == MatrixFormat::kAuto) {
    format = path.extension() == ".csv" ? MatrixFormat::kCsv : MatrixFormat::kRawF32;
  }
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write '" + path.string() + "'");
  if (format == MatrixFormat::kCsv) {
    write_csv(out, m);
  } else {
    write_rawf32(out, m);
  }
  require(static_cast<bool>(out), ErrorCode::kIo, "write to '" + path.string() + "' failed");
}

}  // namespace kdeformer::bench
