#pragma once

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

namespace aime {

/// Formats a double with round-trip precision (shortest form via %.17g is
/// overkill but deterministic; values re-read bit-exactly).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Minimal CSV writer for training curves. Columns are fixed at construction.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, std::vector<std::string> columns)
      : out_(path), columns_(std::move(columns)) {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (i) out_ << ',';
      out_ << columns_[i];
    }
    out_ << '\n';
  }

  void row(std::initializer_list<double> values) {
    std::size_t i = 0;
    for (double v : values) {
      if (i++) out_ << ',';
      out_ << format_double(v);
    }
    out_ << '\n';
  }

  bool good() const { return out_.good(); }

 private:
  std::ofstream out_;
  std::vector<std::string> columns_;
};

}  // namespace aime
