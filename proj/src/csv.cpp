#include "optomech/csv.hpp"

#include <charconv>
#include <cmath>

#include "optomech/error.hpp"

namespace optomech {

std::string format_double(double v) {
  if (!std::isfinite(v)) throw NumericalError("refusing to write a non-finite value to CSV");
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()) {
  if (!out_) throw Error("cannot open " + path.string() + " for writing");
  row_cells(header);
}

void CsvWriter::row(std::span<const double> values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_double(v));
  row_cells(cells);
}

void CsvWriter::row_cells(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw ShapeError("CSV row width does not match header in " + path_.string());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
}

void CsvWriter::close() {
  out_.flush();
  if (!out_) throw Error("failed writing " + path_.string());
  out_.close();
}

}  // namespace optomech
