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

// Precision@k and propensity-scored precision@k.

#ifndef UNIDEC_METRICS_HPP_
#define UNIDEC_METRICS_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "unidec/common.hpp"
#include "unidec/search.hpp"

namespace unidec {

// Empirical propensity model:
//   p_l = 1 / (1 + C exp(-A ln(N_l + B))),  C = (ln N - 1)(B + 1)^A.
// Throws Error(kConfig) when ln N <= 1.
double Propensity(double label_frequency, double num_instances, double a = 0.55, double b = 1.5);

std::vector<double> Propensities(const std::vector<std::uint32_t>& label_frequencies,
                                 std::size_t num_instances, double a = 0.55, double b = 1.5);

// Mean over queries of |top-k ∩ P_i| / k. Rankings shorter than k count the
// missing slots as misses; queries with empty truth contribute 0.
double PrecisionAtK(const std::vector<Ranking>& predictions, const std::vector<LabelSet>& truth,
                    std::size_t k);

// Per query, sum_{l in top-k} y_l / p_l divided by the best achievable value
// (the min(k, |P_i|) truth labels with the largest 1/p_l); averaged over
// queries with nonempty truth.
double PspAtK(const std::vector<Ranking>& predictions, const std::vector<LabelSet>& truth,
              const std::vector<double>& propensities, std::size_t k);

// {"P@1": .., "P@3": .., ..., "PSP@1": .., ...} in k order.
struct MetricsReport {
  std::vector<std::size_t> ks;
  std::vector<double> precision;
  std::vector<double> psp;

  std::map<std::string, double> AsMap() const;
  std::string ToJson() const;
};

MetricsReport Evaluate(const std::vector<Ranking>& predictions, const std::vector<LabelSet>& truth,
                       const std::vector<double>& propensities, const std::vector<std::size_t>& ks);

}  // namespace unidec

#endif  // UNIDEC_METRICS_HPP_
