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

#include "unidec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "json.hpp"

namespace unidec {

namespace {

void CheckShapes(const std::vector<Ranking>& predictions, const std::vector<LabelSet>& truth,
                 std::size_t k) {
  if (k == 0) Fail(ErrorCode::kConfig, "k must be >= 1");
  if (predictions.size() != truth.size()) {
    Fail(ErrorCode::kInvalidArgument, "prediction count " + std::to_string(predictions.size()) +
                                          " != truth count " + std::to_string(truth.size()));
  }
}

bool Contains(const LabelSet& set, LabelId l) { return std::binary_search(set.begin(), set.end(), l); }

}  // namespace

double Propensity(double label_frequency, double num_instances, double a, double b) {
  const double log_n = std::log(num_instances);
  if (!(log_n > 1.0)) Fail(ErrorCode::kConfig, "propensity model needs ln N > 1 (N >= 3)");
  const double c = (log_n - 1.0) * std::pow(b + 1.0, a);
  return 1.0 / (1.0 + c * std::exp(-a * std::log(label_frequency + b)));
}

std::vector<double> Propensities(const std::vector<std::uint32_t>& label_frequencies,
                                 std::size_t num_instances, double a, double b) {
  std::vector<double> p(label_frequencies.size());
  for (std::size_t l = 0; l < p.size(); ++l) {
    p[l] = Propensity(label_frequencies[l], static_cast<double>(num_instances), a, b);
  }
  return p;
}

double PrecisionAtK(const std::vector<Ranking>& predictions, const std::vector<LabelSet>& truth,
                    std::size_t k) {
  CheckShapes(predictions, truth, k);
  if (predictions.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const std::size_t depth = std::min(k, predictions[i].size());
    std::size_t hits = 0;
    for (std::size_t r = 0; r < depth; ++r) hits += Contains(truth[i], predictions[i][r].id);
    total += static_cast<double>(hits) / static_cast<double>(k);
  }
  return total / static_cast<double>(predictions.size());
}

double PspAtK(const std::vector<Ranking>& predictions, const std::vector<LabelSet>& truth,
              const std::vector<double>& propensities, std::size_t k) {
  CheckShapes(predictions, truth, k);
  double total = 0.0;
  std::size_t counted = 0;
  std::vector<double> gains;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (truth[i].empty()) continue;
    double num = 0.0;
    const std::size_t depth = std::min(k, predictions[i].size());
    for (std::size_t r = 0; r < depth; ++r) {
      const LabelId l = predictions[i][r].id;
      if (Contains(truth[i], l)) num += 1.0 / propensities.at(l);
    }
    gains.clear();
    for (LabelId l : truth[i]) gains.push_back(1.0 / propensities.at(l));
    const std::size_t best = std::min(k, gains.size());
    std::partial_sort(gains.begin(), gains.begin() + static_cast<std::ptrdiff_t>(best), gains.end(),
                      std::greater<>());
    double den = 0.0;
    for (std::size_t j = 0; j < best; ++j) den += gains[j];
    total += num / den;
    ++counted;
  }
  return counted ? total / static_cast<double>(counted) : 0.0;
}

std::map<std::string, double> MetricsReport::AsMap() const {
  std::map<std::string, double> m;
  for (std::size_t j = 0; j < ks.size(); ++j) {
    m["P@" + std::to_string(ks[j])] = precision[j];
    m["PSP@" + std::to_string(ks[j])] = psp[j];
  }
  return m;
}

std::string MetricsReport::ToJson() const {
  nlohmann::ordered_json j;
  for (std::size_t i = 0; i < ks.size(); ++i) j["P@" + std::to_string(ks[i])] = precision[i];
  for (std::size_t i = 0; i < ks.size(); ++i) j["PSP@" + std::to_string(ks[i])] = psp[i];
  return j.dump(2);
}

MetricsReport Evaluate(const std::vector<Ranking>& predictions, const std::vector<LabelSet>& truth,
                       const std::vector<double>& propensities, const std::vector<std::size_t>& ks) {
  MetricsReport r;
  r.ks = ks;
  for (std::size_t k : ks) {
    r.precision.push_back(PrecisionAtK(predictions, truth, k));
    r.psp.push_back(PspAtK(predictions, truth, propensities, k));
  }
  return r;
}

}  // namespace unidec
