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

#include "unidec/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace unidec {

IndexMode ParseIndexMode(std::string_view name) {
  if (name == "de") return IndexMode::kDe;
  if (name == "clf") return IndexMode::kClf;
  if (name == "concat") return IndexMode::kConcat;
  Fail(ErrorCode::kConfig, "unknown inference mode '" + std::string(name) + "' (de|clf|concat)");
}

const char* IndexModeName(IndexMode mode) {
  switch (mode) {
    case IndexMode::kDe: return "de";
    case IndexMode::kClf: return "clf";
    case IndexMode::kConcat: return "concat";
  }
  return "?";
}

namespace {

Matrix NormalizedClassifiers(const ModelParams& params) {
  Matrix out = params.classifiers;
  std::vector<LabelId> zero;
  for (std::size_t l = 0; l < out.rows(); ++l) {
    auto row = out.row(l);
    const double n = Norm(row);
    if (n == 0.0) {
      zero.push_back(static_cast<LabelId>(l));
      continue;
    }
    for (double& x : row) x /= n;
  }
  if (!zero.empty()) {
    std::string ids;
    for (std::size_t j = 0; j < zero.size() && j < 20; ++j) ids += (j ? "," : "") + std::to_string(zero[j]);
    if (zero.size() > 20) ids += ",...";
    Fail(ErrorCode::kDegenerate, "zero-norm classifier rows for labels " + ids);
  }
  return out;
}

Matrix Concat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto dst = out.row(r);
    std::copy(a.row(r).begin(), a.row(r).end(), dst.begin());
    std::copy(b.row(r).begin(), b.row(r).end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return out;
}

}  // namespace

LabelIndex BuildIndex(const ModelParams& params, const Dataset& dataset, IndexMode mode,
                      SearchExactness exactness, std::uint64_t seed) {
  if (dataset.num_labels() != params.dims.labels) {
    Fail(ErrorCode::kInvalidArgument, "dataset has " + std::to_string(dataset.num_labels()) +
                                          " labels but model has " + std::to_string(params.dims.labels));
  }
  LabelIndex index;
  index.mode = mode;
  index.exactness = exactness;
  switch (mode) {
    case IndexMode::kDe:
      index.rows = EmbedTexts(params, dataset.label_texts(), Head::kDe);
      break;
    case IndexMode::kClf:
      index.rows = NormalizedClassifiers(params);
      break;
    case IndexMode::kConcat:
      index.rows = Concat(EmbedTexts(params, dataset.label_texts(), Head::kDe), NormalizedClassifiers(params));
      break;
  }
  if (exactness == SearchExactness::kApproximate) {
    const auto cells = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(index.rows.rows()))));
    index.ivf.emplace(index.rows, cells, seed);
    index.probes = std::max<std::size_t>(1, index.ivf->num_cells() / 4);
  }
  return index;
}

Matrix EmbedQueries(const ModelParams& params, const std::vector<std::string>& texts, IndexMode mode) {
  switch (mode) {
    case IndexMode::kDe: return EmbedTexts(params, texts, Head::kDe);
    case IndexMode::kClf: return EmbedTexts(params, texts, Head::kClfNormalized);
    case IndexMode::kConcat:
      return Concat(EmbedTexts(params, texts, Head::kDe), EmbedTexts(params, texts, Head::kClfNormalized));
  }
  Fail(ErrorCode::kInternal, "bad index mode");
}

std::vector<Ranking> Predict(const LabelIndex& index, const ModelParams& params,
                             const std::vector<std::string>& texts, std::size_t k) {
  if (k == 0) Fail(ErrorCode::kConfig, "k must be >= 1");
  const Matrix queries = EmbedQueries(params, texts, index.mode);
  std::vector<Ranking> out(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out[i] = index.ivf ? index.ivf->Search(queries.row(i), k, index.probes)
                       : ExactTopK(index.rows, queries.row(i), k);
  }
  return out;
}

void WritePredictionsTsv(const std::vector<Ranking>& predictions, std::ostream& out) {
  char buf[96];
  for (std::size_t q = 0; q < predictions.size(); ++q) {
    for (std::size_t r = 0; r < predictions[q].size(); ++r) {
      std::snprintf(buf, sizeof(buf), "%zu\t%zu\t%u\t%.17g\n", q, r + 1, predictions[q][r].id,
                    predictions[q][r].score);
      out << buf;
    }
  }
}

std::vector<Ranking> ReadPredictionsTsv(std::istream& in, std::size_t num_queries) {
  struct Row {
    std::size_t query, rank;
    ScoredId entry;
  };
  std::vector<Row> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t max_query = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Row row{};
    std::uint64_t label = 0;
    if (!(ls >> row.query >> row.rank >> label >> row.entry.score) || row.rank == 0) {
      Fail(ErrorCode::kFormat, "malformed prediction row, line " + std::to_string(line_no));
    }
    row.entry.id = static_cast<std::uint32_t>(label);
    max_query = std::max(max_query, row.query + 1);
    rows.push_back(row);
  }
  if (num_queries == 0) num_queries = max_query;
  if (max_query > num_queries) Fail(ErrorCode::kFormat, "prediction query id exceeds query count");
  std::vector<std::vector<std::pair<std::size_t, ScoredId>>> ranked(num_queries);
  for (const auto& r : rows) ranked[r.query].push_back({r.rank, r.entry});
  std::vector<Ranking> out(num_queries);
  for (std::size_t q = 0; q < num_queries; ++q) {
    auto& v = ranked[q];
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [_, e] : v) out[q].push_back(e);
  }
  return out;
}

}  // namespace unidec
