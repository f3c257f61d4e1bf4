#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <string>

namespace xcond {

// Matrix files come in two flavours, chosen by extension:
//   .csv  first line "rows,cols", then one row of comma-separated values per line
//   .f64  16-byte header (rows:u64, cols:u64, little endian) then row-major doubles
// CSV values are written with 17 significant digits so both formats round-trip exactly.
Eigen::MatrixXd read_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);

// Stream-level .f64 block helpers, used for multi-block files (decoders, checkpoints).
void write_f64_block(std::ostream& os, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_f64_block(std::istream& is, const std::string& context);

}  // namespace xcond
