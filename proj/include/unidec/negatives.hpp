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

// Per-query hard-negative lists mined from label DE embeddings.

#ifndef UNIDEC_NEGATIVES_HPP_
#define UNIDEC_NEGATIVES_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "unidec/common.hpp"
#include "unidec/dataset.hpp"
#include "unidec/encoder.hpp"
#include "unidec/search.hpp"

namespace unidec {

struct HardNegativeCache {
  // lists[i] holds query i's negatives in descending score order.
  std::vector<std::vector<LabelId>> lists;
  std::int64_t epoch = -1;

  bool empty() const noexcept { return lists.empty(); }
};

struct RefreshOptions {
  std::size_t cache_size = 30;
  SearchExactness exactness = SearchExactness::kExact;
  std::size_t ivf_cells = 0;   // 0 picks ~sqrt(L)
  std::size_t ivf_probes = 0;  // 0 picks ~cells/4
  std::uint64_t seed = 0;
  std::int64_t epoch = 0;
};

// Top-`cache_size` labels per query by inner product, ground-truth positives
// removed, ties to the lower label id. Lists are truncated when fewer
// negatives exist.
HardNegativeCache RefreshCache(const Matrix& query_embeddings, const Matrix& label_embeddings,
                               const Dataset& dataset, const RefreshOptions& options);

// Convenience overload: embeds every query and label text with the DE head
// in eval mode first.
HardNegativeCache RefreshCache(const ModelParams& params, const Dataset& dataset,
                               const RefreshOptions& options);

// Uniform sample of min(eta, |H_i|) ids without replacement, sorted.
std::vector<LabelId> SampleHardNegatives(const HardNegativeCache& cache, QueryId query,
                                         std::size_t eta, Rng& rng);

// Debug dump: "UDHN" magic, u8 version, then varints: query count, epoch + 1,
// and per query the list length followed by its ids.
void WriteCacheDump(const HardNegativeCache& cache, std::ostream& out);
HardNegativeCache ReadCacheDump(std::istream& in);

}  // namespace unidec

#endif  // UNIDEC_NEGATIVES_HPP_
