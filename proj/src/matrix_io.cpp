#include "xcond/matrix_io.hpp"

#include "xcond/error.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace xcond {

static_assert(std::endian::native == std::endian::little, ".f64 I/O assumes a little-endian host");

namespace {

enum class Format { Csv, F64 };

Format format_of(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return Format::Csv;
  if (ext == ".f64") return Format::F64;
  throw DataError(path.string() + ": unsupported matrix extension '" + ext + "' (expected .csv or .f64)");
}

long long parse_int(std::string_view s, const std::string& context) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 0) {
    throw DataError(context + ": bad integer '" + std::string(s) + "'");
  }
  return v;
}

double parse_double(std::string_view s, const std::string& context) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError(context + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

Eigen::MatrixXd read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");
  const std::string name = path.string();
  std::string line;
  if (!std::getline(in, line)) throw DataError(name + ": empty file");
  const auto comma = line.find(',');
  if (comma == std::string::npos) throw DataError(name + ": header must be 'rows,cols'");
  const auto rows = parse_int(std::string_view(line).substr(0, comma), name + " header");
  const auto cols = parse_int(std::string_view(line).substr(comma + 1), name + " header");
  Eigen::MatrixXd m(rows, cols);
  for (long long i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) {
      throw DataError(name + ": expected " + std::to_string(rows) + " data rows, found " + std::to_string(i));
    }
    std::string_view rest(line);
    for (long long j = 0; j < cols; ++j) {
      const auto pos = rest.find(',');
      if ((pos == std::string_view::npos) != (j == cols - 1)) {
        throw DataError(name + ": row " + std::to_string(i) + " does not have " + std::to_string(cols) + " values");
      }
      m(i, j) = parse_double(rest.substr(0, pos), name + " row " + std::to_string(i));
      if (pos != std::string_view::npos) rest.remove_prefix(pos + 1);
    }
  }
  return m;
}

void write_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << m.rows() << ',' << m.cols() << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError(path.string() + ": write failed");
}

}  // namespace

void write_f64_block(std::ostream& os, const Eigen::MatrixXd& m) {
  const std::uint64_t header[2] = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  os.write(reinterpret_cast<const char*>(header), sizeof header);
  // Row-major on disk; Eigen stores column-major.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  os.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
}

Eigen::MatrixXd read_f64_block(std::istream& is, const std::string& context) {
  std::uint64_t header[2] = {0, 0};
  if (!is.read(reinterpret_cast<char*>(header), sizeof header)) {
    throw DataError(context + ": truncated .f64 header");
  }
  constexpr std::uint64_t kMaxElems = std::uint64_t{1} << 34;
  if (header[0] != 0 && header[1] > kMaxElems / header[0]) {
    throw DataError(context + ": implausible .f64 shape");
  }
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(
      static_cast<Eigen::Index>(header[0]), static_cast<Eigen::Index>(header[1]));
  if (!is.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)))) {
    throw DataError(context + ": truncated .f64 payload");
  }
  return rm;
}

Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
  if (format_of(path) == Format::Csv) return read_csv(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open");
  Eigen::MatrixXd m = read_f64_block(in, path.string());
  if (in.peek() != std::char_traits<char>::eof()) throw DataError(path.string() + ": trailing bytes after matrix");
  return m;
}

void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  if (format_of(path) == Format::Csv) {
    write_csv(path, m);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  write_f64_block(out, m);
  if (!out) throw DataError(path.string() + ": write failed");
}

}  // namespace xcond
