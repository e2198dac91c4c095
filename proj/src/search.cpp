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

#include "unidec/search.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace unidec {

namespace {

bool Excluded(std::span<const std::uint32_t> exclude, std::uint32_t id) {
  return std::binary_search(exclude.begin(), exclude.end(), id);
}

std::vector<ScoredId> SelectTop(std::vector<ScoredId> candidates, std::size_t k) {
  const std::size_t take = std::min(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                    candidates.end(), RanksBefore);
  candidates.resize(take);
  return candidates;
}

void NormalizeRow(std::span<double> v) {
  const double n = Norm(v);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
}

}  // namespace

SearchExactness ParseSearchExactness(std::string_view name) {
  if (name == "exact") return SearchExactness::kExact;
  if (name == "approximate") return SearchExactness::kApproximate;
  Fail(ErrorCode::kConfig, "unknown search mode '" + std::string(name) + "' (exact|approximate)");
}

std::vector<ScoredId> ExactTopK(const Matrix& rows, std::span<const double> query, std::size_t k,
                                std::span<const std::uint32_t> exclude) {
  if (query.size() != rows.cols()) Fail(ErrorCode::kInvalidArgument, "query width mismatch");
  std::vector<ScoredId> candidates;
  candidates.reserve(rows.rows());
  for (std::uint32_t r = 0; r < rows.rows(); ++r) {
    if (Excluded(exclude, r)) continue;
    candidates.push_back({r, Dot(rows.row(r), query)});
  }
  return SelectTop(std::move(candidates), k);
}

IvfIndex::IvfIndex(const Matrix& rows, std::size_t num_cells, std::uint64_t seed) : rows_(rows) {
  const std::size_t n = rows.rows();
  num_cells = std::clamp<std::size_t>(num_cells, 1, std::max<std::size_t>(n, 1));
  centroids_ = Matrix(num_cells, rows.cols());
  cells_.assign(num_cells, {});
  if (n == 0) return;

  // Seed centroids with distinct random rows, then spherical Lloyd iterations.
  Rng rng = Rng::Stream(seed, {0x1f});
  std::vector<std::uint32_t> ids(n);
  for (std::uint32_t i = 0; i < n; ++i) ids[i] = i;
  std::vector<std::uint32_t> init = SampleWithoutReplacement(ids, num_cells, rng);
  for (std::size_t c = 0; c < num_cells; ++c) {
    std::copy(rows.row(init[c]).begin(), rows.row(init[c]).end(), centroids_.row(c).begin());
    NormalizeRow(centroids_.row(c));
  }
  std::vector<std::uint32_t> assign(n, 0);
  constexpr int kIterations = 10;
  for (int it = 0; it < kIterations; ++it) {
    for (std::uint32_t i = 0; i < n; ++i) {
      assign[i] = ExactTopK(centroids_, rows.row(i), 1).front().id;
    }
    Matrix sums(num_cells, rows.cols());
    for (std::uint32_t i = 0; i < n; ++i) {
      auto dst = sums.row(assign[i]);
      const auto src = rows.row(i);
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
    for (std::size_t c = 0; c < num_cells; ++c) {
      if (Norm(sums.row(c)) == 0.0) continue;  // empty cell keeps its centroid
      std::copy(sums.row(c).begin(), sums.row(c).end(), centroids_.row(c).begin());
      NormalizeRow(centroids_.row(c));
    }
  }
  for (std::uint32_t i = 0; i < n; ++i) cells_[assign[i]].push_back(i);
}

std::vector<ScoredId> IvfIndex::Search(std::span<const double> query, std::size_t k,
                                       std::size_t probes,
                                       std::span<const std::uint32_t> exclude) const {
  const auto nearest = ExactTopK(centroids_, query, std::max<std::size_t>(probes, 1));
  std::vector<ScoredId> candidates;
  for (const auto& cell : nearest) {
    for (std::uint32_t r : cells_[cell.id]) {
      if (Excluded(exclude, r)) continue;
      candidates.push_back({r, Dot(rows_.row(r), query)});
    }
  }
  return SelectTop(std::move(candidates), k);
}

}  // namespace unidec
