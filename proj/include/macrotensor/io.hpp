#pragma once

#include <stdexcept>
#include <string>

#include "macrotensor/linalg.hpp"
#include "macrotensor/tensor.hpp"

namespace macrotensor {

/// Parse failure with the offending 1-based line number (0 when not line specific).
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Reads a long-format tensor file: header `i,j,k,value`, 1-based indices,
/// `NA` for missing. Dims come from the sidecar `<path>.json`
/// ({"I":..,"J":..,"K":..}) when present, otherwise from the maximal indices.
/// Cells absent from the file are missing. gzip input is detected
/// transparently. Throws ParseError on malformed lines, duplicates or
/// out-of-range indices.
Tensor3 read_t3(const std::string& path);

/// Writes every cell (NA for missing) plus the JSON sidecar. Values use
/// %.17g so reading back is exact. When gzip is set the table is compressed.
void write_t3(const std::string& path, const Tensor3& t, bool gzip = false);

/// Comma-separated numeric matrix without header; `NA` (or an empty field)
/// marks a missing cell.
Unfolded read_matrix_csv(const std::string& path);
void write_matrix_csv(const std::string& path, const Matrix& m);
void write_matrix_csv(const std::string& path, const Matrix& m, const Mask& mask);

/// Whole file as text (gzip-aware). Throws std::runtime_error when unreadable.
std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text, bool gzip = false);

}  // namespace macrotensor
