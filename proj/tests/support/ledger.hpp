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
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace p3d::testing {

/// One row of the parameter ledger kept in docs/param_ledger.md.
struct LedgerRow {
  int depth = 0;
  std::string policy;
  int classes = 0;
  std::size_t weights = 0;
  std::size_t bn = 0;
  std::size_t total = 0;
  std::size_t bytes = 0;
};

std::filesystem::path ledger_path();

/// Parses the rows between the ledger markers. Numbers may carry thousands
/// separators. Throws std::runtime_error if the table is missing or malformed.
std::vector<LedgerRow> read_ledger(const std::filesystem::path& path = ledger_path());

const LedgerRow* find_row(const std::vector<LedgerRow>& rows, int depth, const std::string& policy,
                          int classes);

/// Closed-form count for a bottleneck ResNet with a 1x7x7 stem, per-stage
/// widths 64/128/256/512 and expansion 4, plus a 3-tap temporal conv and its
/// BN in every block when `temporal` is set.
struct HandCount {
  std::size_t weights = 0;
  std::size_t bn = 0;
  std::size_t temporal_weights = 0;
  std::size_t total() const { return weights + bn; }
};

HandCount hand_count(int depth, bool temporal, int classes);

}  // namespace p3d::testing
