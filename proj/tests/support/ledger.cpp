/*
 * Copyright 2026 The p3d Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "ledger.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace p3d::testing {

std::filesystem::path ledger_path() {
  return std::filesystem::path(P3D_SOURCE_DIR) / "docs" / "param_ledger.md";
}

namespace {

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, '|')) {
    auto b = cell.find_first_not_of(" \t");
    auto e = cell.find_last_not_of(" \t");
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  // A row "| a | b |" splits into "", a, b.
  if (!cells.empty() && cells.front().empty()) cells.erase(cells.begin());
  return cells;
}

std::size_t parse_count(std::string s) {
  s.erase(std::remove(s.begin(), s.end(), ','), s.end());
  std::size_t pos = 0;
  unsigned long long v = std::stoull(s, &pos);
  if (pos != s.size()) throw std::runtime_error("ledger: bad number '" + s + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace

std::vector<LedgerRow> read_ledger(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ledger: cannot open " + path.string());
  std::vector<LedgerRow> rows;
  std::string line;
  bool inside = false;
  while (std::getline(in, line)) {
    if (line.find("<!-- ledger:begin -->") != std::string::npos) {
      inside = true;
      continue;
    }
    if (line.find("<!-- ledger:end -->") != std::string::npos) break;
    if (!inside || line.empty() || line[0] != '|') continue;
    auto cells = split_cells(line);
    if (cells.size() < 7 || cells[0] == "depth" || cells[0].find('-') == 0) continue;
    LedgerRow row;
    row.depth = static_cast<int>(parse_count(cells[0]));
    row.policy = cells[1];
    row.classes = static_cast<int>(parse_count(cells[2]));
    row.weights = parse_count(cells[3]);
    row.bn = parse_count(cells[4]);
    row.total = parse_count(cells[5]);
    row.bytes = parse_count(cells[6]);
    rows.push_back(row);
  }
  if (rows.empty()) throw std::runtime_error("ledger: no rows in " + path.string());
  return rows;
}

const LedgerRow* find_row(const std::vector<LedgerRow>& rows, int depth, const std::string& policy,
                          int classes) {
  for (const auto& r : rows)
    if (r.depth == depth && r.policy == policy && r.classes == classes) return &r;
  return nullptr;
}

HandCount hand_count(int depth, bool temporal, int classes) {
  std::array<std::size_t, 4> blocks{};
  if (depth == 50)
    blocks = {3, 4, 6, 3};
  else if (depth == 152)
    blocks = {3, 8, 36, 3};
  else
    throw std::runtime_error("hand_count: unsupported depth");
  const std::array<std::size_t, 4> mids{64, 128, 256, 512};

  HandCount hc;
  hc.weights = 3 * 64 * 7 * 7;
  hc.bn = 2 * 64;
  std::size_t in = 64;
  for (std::size_t s = 0; s < 4; ++s) {
    const std::size_t mid = mids[s], out = 4 * mid;
    for (std::size_t j = 0; j < blocks[s]; ++j) {
      const std::size_t cin = j == 0 ? in : out;
      hc.weights += cin * mid + 9 * mid * mid + mid * out;
      hc.bn += 2 * (mid + mid + out);
      if (j == 0) {
        hc.weights += cin * out;
        hc.bn += 2 * out;
      }
      if (temporal) {
        hc.weights += 3 * mid * mid;
        hc.temporal_weights += 3 * mid * mid;
        hc.bn += 2 * mid;
      }
    }
    in = out;
  }
  hc.weights += 2048 * static_cast<std::size_t>(classes) + static_cast<std::size_t>(classes);
  return hc;
}

}  // namespace p3d::testing
