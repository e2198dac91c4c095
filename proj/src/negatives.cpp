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

#include "unidec/negatives.hpp"

#include <cmath>
#include <istream>
#include <optional>
#include <ostream>

namespace unidec {

HardNegativeCache RefreshCache(const Matrix& query_embeddings, const Matrix& label_embeddings,
                               const Dataset& dataset, const RefreshOptions& options) {
  if (query_embeddings.rows() != dataset.num_instances() ||
      label_embeddings.rows() != dataset.num_labels()) {
    Fail(ErrorCode::kInvalidArgument, "embedding row counts do not match dataset");
  }
  HardNegativeCache cache;
  cache.epoch = options.epoch;
  cache.lists.resize(dataset.num_instances());
  if (options.cache_size == 0) return cache;

  std::optional<IvfIndex> ivf;
  std::size_t probes = 0;
  if (options.exactness == SearchExactness::kApproximate) {
    const auto l = static_cast<double>(dataset.num_labels());
    const std::size_t cells =
        options.ivf_cells ? options.ivf_cells : static_cast<std::size_t>(std::ceil(std::sqrt(l)));
    ivf.emplace(label_embeddings, cells, options.seed);
    probes = options.ivf_probes ? options.ivf_probes : std::max<std::size_t>(1, ivf->num_cells() / 4);
  }

  for (std::size_t i = 0; i < dataset.num_instances(); ++i) {
    const LabelSet& positives = dataset.positives(i);
    const auto query = query_embeddings.row(i);
    const auto top = ivf ? ivf->Search(query, options.cache_size, probes, positives)
                         : ExactTopK(label_embeddings, query, options.cache_size, positives);
    auto& list = cache.lists[i];
    list.reserve(top.size());
    for (const auto& s : top) list.push_back(s.id);
  }
  return cache;
}

HardNegativeCache RefreshCache(const ModelParams& params, const Dataset& dataset,
                               const RefreshOptions& options) {
  const Matrix queries = EmbedTexts(params, dataset.instance_texts(), Head::kDe);
  const Matrix labels = EmbedTexts(params, dataset.label_texts(), Head::kDe);
  return RefreshCache(queries, labels, dataset, options);
}

std::vector<LabelId> SampleHardNegatives(const HardNegativeCache& cache, QueryId query,
                                         std::size_t eta, Rng& rng) {
  if (eta == 0 || cache.empty()) return {};
  if (query >= cache.lists.size()) Fail(ErrorCode::kInvalidArgument, "query id outside cache");
  return SampleWithoutReplacement(cache.lists[query], eta, rng);
}

// ------------------------------------------------------------------ Dump I/O

namespace {

constexpr char kDumpMagic[4] = {'U', 'D', 'H', 'N'};
constexpr unsigned char kDumpVersion = 1;

void PutVarint(std::ostream& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.put(static_cast<char>((v & 0x7f) | 0x80));
    v >>= 7;
  }
  out.put(static_cast<char>(v));
}

std::uint64_t GetVarint(std::istream& in) {
  std::uint64_t v = 0;
  for (int shift = 0; shift < 64; shift += 7) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) Fail(ErrorCode::kFormat, "truncated cache dump");
    v |= static_cast<std::uint64_t>(c & 0x7f) << shift;
    if ((c & 0x80) == 0) return v;
  }
  Fail(ErrorCode::kFormat, "varint too long in cache dump");
}

}  // namespace

void WriteCacheDump(const HardNegativeCache& cache, std::ostream& out) {
  out.write(kDumpMagic, sizeof(kDumpMagic));
  out.put(static_cast<char>(kDumpVersion));
  PutVarint(out, cache.lists.size());
  PutVarint(out, static_cast<std::uint64_t>(cache.epoch + 1));
  for (const auto& list : cache.lists) {
    PutVarint(out, list.size());
    for (LabelId l : list) PutVarint(out, l);
  }
}

HardNegativeCache ReadCacheDump(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kDumpMagic)) {
    Fail(ErrorCode::kFormat, "bad cache dump magic");
  }
  if (in.get() != kDumpVersion) Fail(ErrorCode::kFormat, "unsupported cache dump version");
  HardNegativeCache cache;
  const std::uint64_t n = GetVarint(in);
  cache.epoch = static_cast<std::int64_t>(GetVarint(in)) - 1;
  cache.lists.resize(n);
  for (auto& list : cache.lists) {
    const std::uint64_t len = GetVarint(in);
    list.reserve(len);
    for (std::uint64_t j = 0; j < len; ++j) list.push_back(static_cast<LabelId>(GetVarint(in)));
  }
  return cache;
}

}  // namespace unidec
