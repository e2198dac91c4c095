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

// Shared text encoder, the two projection heads, the per-label classifier
// table, exact reverse-mode gradients and the Adam optimizer.
//
//   encode(x)   = sum_t c_t E[t] / sum_t c_t
//   de_head(h)  = normalize(dropout(tanh(W1 h + b1)))
//   clf_head(h) = dropout(W2 h + b2)

#ifndef UNIDEC_ENCODER_HPP_
#define UNIDEC_ENCODER_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unidec/common.hpp"
#include "unidec/dataset.hpp"

namespace unidec {

struct ModelDims {
  std::size_t vocab = Vocabulary::kDefaultDim;
  std::size_t encoder = 64;  // width of the shared encoding
  std::size_t head = 32;     // search dimensionality of each head
  std::size_t labels = 0;
  bool operator==(const ModelDims&) const = default;
};

struct ModelParams {
  ModelDims dims;
  double dropout_rate = 0.1;
  Matrix embeddings;            // vocab x encoder
  Matrix de_weight;             // head x encoder
  std::vector<double> de_bias;  // head
  Matrix clf_weight;            // head x encoder
  std::vector<double> clf_bias; // head
  Matrix classifiers;           // labels x head

  // Weights ~ U(-1/sqrt(encoder), 1/sqrt(encoder)), classifier rows
  // ~ U(-1/sqrt(head), 1/sqrt(head)), biases zero.
  static ModelParams Init(const ModelDims& dims, double dropout_rate, std::uint64_t seed);

  bool AllFinite() const;
  bool operator==(const ModelParams&) const = default;
};

enum class Mode { kTrain, kEval };

// Weighted mean of embedding rows. Empty input gives the zero vector.
std::vector<double> Encode(const ModelParams& params, const SparseVector& features);

struct DeHeadTrace {
  std::vector<double> activation;    // tanh output
  std::vector<double> mask;          // inverted-dropout multipliers (1 in eval)
  std::vector<double> unnormalized;  // activation * mask
  double norm = 0.0;
  std::vector<double> output;
};

struct ClfHeadTrace {
  std::vector<double> mask;
  std::vector<double> output;
};

// `rng` is required in train mode when dropout_rate > 0. Throws
// Error(kDegenerate) when the vector to normalize is exactly zero.
std::vector<double> DeHead(const ModelParams& params, std::span<const double> enc, Mode mode,
                           Rng* rng = nullptr, DeHeadTrace* trace = nullptr);
std::vector<double> ClfHead(const ModelParams& params, std::span<const double> enc, Mode mode,
                            Rng* rng = nullptr, ClfHeadTrace* trace = nullptr);

// Activations for one encoded text: the DE head always, the classifier head
// only when requested.
struct ItemTrace {
  SparseVector features;
  std::vector<double> encoding;
  DeHeadTrace de;
  std::optional<ClfHeadTrace> clf;
};

struct ForwardTrace {
  std::vector<ItemTrace> items;
};

// Draws DE dropout first, then classifier dropout, from `rng`.
ItemTrace ForwardItem(const ModelParams& params, const SparseVector& features, Mode mode,
                      bool with_clf, Rng* rng);

struct Gradients {
  std::map<std::uint32_t, std::vector<double>> embedding_rows;
  Matrix de_weight;
  std::vector<double> de_bias;
  Matrix clf_weight;
  std::vector<double> clf_bias;
  std::map<LabelId, std::vector<double>> classifier_rows;

  static Gradients Zeros(const ModelDims& dims);
  std::span<double> ClassifierRow(LabelId l, std::size_t head_dim);
  double SquaredNorm() const;
  void Scale(double factor);
};

// Upstream gradients: per traced item, w.r.t. the DE output and the
// classifier-head output (empty vector = no gradient), plus gradients w.r.t.
// classifier rows.
struct HeadGradients {
  std::vector<std::vector<double>> de;
  std::vector<std::vector<double>> clf;
  std::map<LabelId, std::vector<double>> classifier_rows;
};

// Accumulates into `out`. Throws Error(kInvalidArgument) on shape mismatch.
void Backward(const ModelParams& params, const ForwardTrace& trace,
              const HeadGradients& upstream, Gradients& out);

struct AdamConfig {
  double lr_encoder = 1e-4;
  double lr_heads = 2e-4;
  double lr_classifier = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 0.0;  // global-norm clip; 0 disables
};

struct OptimizerState {
  std::uint64_t step = 0;
  Matrix m_embeddings, v_embeddings;
  std::vector<char> touched_rows;  // embedding rows with nonzero moments
  Matrix m_de_weight, v_de_weight;
  std::vector<double> m_de_bias, v_de_bias;
  Matrix m_clf_weight, v_clf_weight;
  std::vector<double> m_clf_bias, v_clf_bias;
  Matrix m_classifiers, v_classifiers;
  std::vector<char> touched_classifiers;

  static OptimizerState ForParams(const ModelParams& params);
};

// In-place Adam on one flat parameter block, using bias correction for
// `step` (already incremented, >= 1).
void AdamUpdate(std::span<double> param, std::span<const double> grad, std::span<double> m,
                std::span<double> v, double lr, std::uint64_t step, const AdamConfig& cfg);

// Throws Error(kNumeric) if any gradient is NaN/Inf, before touching params.
void OptimizerStep(ModelParams& params, const Gradients& grads, OptimizerState& state,
                   const AdamConfig& cfg);

enum class Head { kDe, kClf, kClfNormalized };

// Eval-mode embeddings of `texts`, one row per text, hashed with a
// vocabulary of width params.dims.vocab.
Matrix EmbedTexts(const ModelParams& params, const std::vector<std::string>& texts, Head head);

// Binary checkpoint: "UNIDECMP" magic, u32 version, u32 reserved, u64 vocab,
// encoder, head, labels, f64 dropout, then embeddings, de_weight, de_bias,
// clf_weight, clf_bias, classifiers as little-endian f64, row-major.
void SaveCheckpoint(const ModelParams& params, const std::string& path);
ModelParams LoadCheckpoint(const std::string& path);

}  // namespace unidec

#endif  // UNIDEC_ENCODER_HPP_
