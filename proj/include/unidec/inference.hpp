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

#ifndef UNIDEC_INFERENCE_HPP_
#define UNIDEC_INFERENCE_HPP_

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unidec/common.hpp"
#include "unidec/dataset.hpp"
#include "unidec/encoder.hpp"
#include "unidec/search.hpp"

namespace unidec {

// de:     labels Φ_D(z_l),            queries Φ_D(x)
// clf:    labels N(Ψ_l),              queries N(Φ_C(x))
// concat: labels Φ_D(z_l) ⊕ N(Ψ_l),   queries Φ_D(x) ⊕ N(Φ_C(x))
enum class IndexMode { kDe, kClf, kConcat };

IndexMode ParseIndexMode(std::string_view name);
const char* IndexModeName(IndexMode mode);

struct LabelIndex {
  IndexMode mode = IndexMode::kConcat;
  Matrix rows;  // one row per label
  SearchExactness exactness = SearchExactness::kExact;
  std::optional<IvfIndex> ivf;
  std::size_t probes = 0;
};

// Throws Error(kDegenerate) naming the labels whose classifier row is zero.
LabelIndex BuildIndex(const ModelParams& params, const Dataset& dataset, IndexMode mode,
                      SearchExactness exactness = SearchExactness::kExact, std::uint64_t seed = 0);

// Eval-mode query representations for `mode`.
Matrix EmbedQueries(const ModelParams& params, const std::vector<std::string>& texts, IndexMode mode);

// Top-min(k, L) labels per query by raw inner product, lower id first on ties.
std::vector<Ranking> Predict(const LabelIndex& index, const ModelParams& params,
                             const std::vector<std::string>& texts, std::size_t k);

// TSV rows: query_id, rank (1-based), label_id, score.
void WritePredictionsTsv(const std::vector<Ranking>& predictions, std::ostream& out);
// `num_queries` = 0 sizes the result by the largest query id seen.
std::vector<Ranking> ReadPredictionsTsv(std::istream& in, std::size_t num_queries = 0);

}  // namespace unidec

#endif  // UNIDEC_INFERENCE_HPP_
