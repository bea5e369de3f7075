// Copyright 2026 The seanet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SEANET_CSV_HPP_
#define SEANET_CSV_HPP_

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "seanet/common.hpp"

namespace seanet {

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// Accumulates rows in memory and writes UTF-8 CSV with a header row.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  class Row {
   public:
    template <typename T>
    Row& operator<<(const T& v) {
      if constexpr (std::is_floating_point_v<T>) {
        cells_.push_back(format_double(static_cast<double>(v)));
      } else if constexpr (std::is_arithmetic_v<T>) {
        cells_.push_back(std::to_string(v));
      } else {
        cells_.push_back(std::string(v));
      }
      return *this;
    }

   private:
    friend class CsvTable;
    std::vector<std::string> cells_;
  };

  void add(const Row& row) {
    if (row.cells_.size() != header_.size()) {
      throw ValidationError("CSV row has " + std::to_string(row.cells_.size()) +
                            " cells, header has " + std::to_string(header_.size()));
    }
    rows_.push_back(row.cells_);
  }

  std::size_t rows() const { return rows_.size(); }

  std::string str() const {
    std::ostringstream out;
    auto put = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out << ',';
        out << cells[i];
      }
      out << '\n';
    };
    put(header_);
    for (const auto& r : rows_) put(r);
    return out.str();
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << str();
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace seanet

#endif  // SEANET_CSV_HPP_
