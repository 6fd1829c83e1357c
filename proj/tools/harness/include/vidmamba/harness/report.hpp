// Copyright 2026 The vidmamba Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace vidmamba::harness {

// Shortest round-trip decimal form; identical inputs give identical bytes.
std::string fmt(double v);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  void add_row(std::vector<std::string> row);
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct Series {
  std::string label;
  std::vector<double> x, y;
};

struct PlotSpec {
  std::string title, x_label, y_label;
  bool log_x = false, log_y = false;
  std::vector<Series> series;
  // Draws categorical tick labels instead of numeric ones when non-empty.
  std::vector<std::string> x_categories;
};

// Static SVG line/marker chart.
std::string svg_plot(const PlotSpec& spec);

// Least-squares slope of log(y) against log(x); NaN with fewer than two
// distinct x values.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace vidmamba::harness
