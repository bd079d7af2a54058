#pragma once

#include <cstdio>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace copwav::csv {

//! Shortest round-trip-exact decimal form used for every numeric cell.
inline std::string format(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

//! Headerless numeric matrix.
struct Table {
  std::size_t cols = 0;
  std::vector<double> data;

  std::size_t rows() const { return cols > 0 ? data.size() / cols : 0; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

//! Strict headerless CSV load: every row must hold the same number of
//! fully numeric fields. Errors carry 1-based line numbers.
inline Table load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument(path + ": cannot open");
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (in.peek() == std::char_traits<char>::eof()) break;  // trailing newline
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": empty line");
    }
    std::size_t fields = 0;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) comma = line.size();
      const std::string cell = line.substr(pos, comma - pos);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": bad number '" + cell +
                                 "'");
      }
      while (used < cell.size() && (cell[used] == ' ' || cell[used] == '\t')) ++used;
      if (used != cell.size())
        throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": bad number '" + cell +
                                 "'");
      t.data.push_back(v);
      ++fields;
      pos = comma + 1;
      if (comma == line.size()) break;
    }
    if (t.cols == 0)
      t.cols = fields;
    else if (fields != t.cols)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(t.cols) + " fields, got " + std::to_string(fields));
  }
  if (t.data.empty()) throw std::invalid_argument(path + ": no data rows");
  return t;
}

//! Headerless write, one row per record, %.17g cells.
inline void write(const std::string& path, const Table& t) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  const std::size_t n = t.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = t.row(i);
    for (std::size_t c = 0; c < t.cols; ++c) {
      if (c) out << ',';
      out << format(r[c]);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace copwav::csv
