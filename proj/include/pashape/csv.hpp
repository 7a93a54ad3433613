// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pashape {

// Shortest round-trip decimal form, locale independent. Using to_chars keeps
// CSV output byte-stable across runs and platforms.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, end);
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns) : columns_(std::move(columns)) {
    std::string h;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (i) h += ',';
      h += columns_[i];
    }
    lines_.push_back(std::move(h));
  }

  class Row {
   public:
    explicit Row(std::size_t width) { cells_.reserve(width); }
    Row& add(double v) {
      cells_.push_back(format_double(v));
      return *this;
    }
    Row& add(std::int64_t v) {
      cells_.push_back(std::to_string(v));
      return *this;
    }
    Row& add(int v) { return add(static_cast<std::int64_t>(v)); }
    Row& add(std::uint64_t v) {
      cells_.push_back(std::to_string(v));
      return *this;
    }
    Row& add(const std::string& v) {
      cells_.push_back(v);
      return *this;
    }
    std::vector<std::string> cells_;
  };

  void append(const Row& row) {
    if (row.cells_.size() != columns_.size())
      throw std::runtime_error("csv row width mismatch");
    std::string line;
    for (std::size_t i = 0; i < row.cells_.size(); ++i) {
      if (i) line += ',';
      line += row.cells_[i];
    }
    lines_.push_back(std::move(line));
  }

  std::string str() const {
    std::string out;
    for (const auto& l : lines_) {
      out += l;
      out += '\n';
    }
    return out;
  }

  void write_file(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f << str();
  }

  std::size_t width() const { return columns_.size(); }

 private:
  std::vector<std::string> columns_;
  std::vector<std::string> lines_;
};

}  // namespace pashape
