#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace postbc {

/// Formats a double with 12 significant digits, locale-independent.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return std::string(buf);
}

/// In-memory CSV table with a fixed header. Cells are preformatted strings;
/// use push (double) helpers on CsvRow for numeric columns.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  class Row {
   public:
    explicit Row(std::size_t width) { cells_.reserve(width); }
    Row& add(const std::string& s) {
      cells_.push_back(s);
      return *this;
    }
    Row& add(double v) { return add(format_double(v)); }
    Row& add(int v) { return add(std::to_string(v)); }
    Row& add(long long v) { return add(std::to_string(v)); }
    Row& add(std::uint64_t v) { return add(std::to_string(v)); }
    const std::vector<std::string>& cells() const { return cells_; }

   private:
    std::vector<std::string> cells_;
  };

  Row make_row() const { return Row(header_.size()); }

  void append(const Row& row) {
    if (row.cells().size() != header_.size())
      throw std::invalid_argument("CsvTable: row width does not match header");
    rows_.push_back(row.cells());
  }

  std::string to_string() const {
    std::string out;
    for (std::size_t i = 0; i < header_.size(); ++i) {
      if (i) out += ',';
      out += header_[i];
    }
    out += '\n';
    for (const auto& row : rows_) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        out += row[i];
      }
      out += '\n';
    }
    return out;
  }

  void write_file(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f << to_string();
  }

  std::size_t num_rows() const { return rows_.size(); }
  const std::vector<std::string>& header() const { return header_; }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace postbc
