/*
 * Copyright 2026 The UniDEC Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef UNIDEC_SEARCH_HPP_
#define UNIDEC_SEARCH_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "unidec/common.hpp"

namespace unidec {

struct ScoredId {
  std::uint32_t id;
  double score;
  bool operator==(const ScoredId&) const = default;
};

// Descending score, lower id first on ties.
inline bool RanksBefore(const ScoredId& a, const ScoredId& b) {
  return a.score > b.score || (a.score == b.score && a.id < b.id);
}

// A ranked result list, best first.
using Ranking = std::vector<ScoredId>;

enum class SearchExactness { kExact, kApproximate };

SearchExactness ParseSearchExactness(std::string_view name);

// Top-k rows of `rows` by inner product with `query`, skipping ids listed in
// the sorted span `exclude`. Returns min(k, available) entries.
std::vector<ScoredId> ExactTopK(const Matrix& rows, std::span<const double> query, std::size_t k,
                                std::span<const std::uint32_t> exclude = {});

// Inverted-file index: rows are bucketed by spherical k-means and a query
// scans only the `probes` closest buckets. Results use the same ordering and
// exclusion rules as ExactTopK over the scanned rows.
class IvfIndex {
 public:
  IvfIndex(const Matrix& rows, std::size_t num_cells, std::uint64_t seed);

  std::vector<ScoredId> Search(std::span<const double> query, std::size_t k, std::size_t probes,
                               std::span<const std::uint32_t> exclude = {}) const;

  std::size_t num_cells() const noexcept { return cells_.size(); }

 private:
  Matrix rows_;
  Matrix centroids_;
  std::vector<std::vector<std::uint32_t>> cells_;
};

}  // namespace unidec

#endif  // UNIDEC_SEARCH_HPP_
