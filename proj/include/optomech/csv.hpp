#pragma once

// Minimal CSV emission: header row, comma separator, shortest round-trip floats.

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace optomech {

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  void row(std::span<const double> values);
  void row(std::initializer_list<double> values) { row(std::span<const double>(values.begin(), values.size())); }
  /// Mixed row of pre-formatted cells.
  void row_cells(const std::vector<std::string>& cells);
  void close();

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_ = 0;
};

}  // namespace optomech
