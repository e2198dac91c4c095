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

#include "unidec/encoder.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace unidec {

namespace {

void FillUniform(std::vector<double>& values, double bound, Rng& rng) {
  for (double& v : values) v = rng.Uniform(-bound, bound);
}

bool Finite(const std::vector<double>& values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::vector<double> DropoutMask(std::size_t n, double rate, Mode mode, Rng* rng) {
  std::vector<double> mask(n, 1.0);
  if (mode == Mode::kEval || rate <= 0.0) return mask;
  if (rate >= 1.0) {
    std::fill(mask.begin(), mask.end(), 0.0);
    return mask;
  }
  if (rng == nullptr) Fail(ErrorCode::kInvalidArgument, "train-mode dropout needs an rng");
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask) m = rng->Uniform01() < rate ? 0.0 : keep_scale;
  return mask;
}

// out = W x + b
std::vector<double> Affine(const Matrix& w, const std::vector<double>& b,
                           std::span<const double> x) {
  if (x.size() != w.cols()) Fail(ErrorCode::kInvalidArgument, "projection input width mismatch");
  std::vector<double> out(b);
  for (std::size_t r = 0; r < w.rows(); ++r) out[r] += Dot(w.row(r), x);
  return out;
}

}  // namespace

ModelParams ModelParams::Init(const ModelDims& dims, double dropout_rate, std::uint64_t seed) {
  if (dims.vocab == 0 || dims.encoder == 0 || dims.head == 0 || dims.labels == 0) {
    Fail(ErrorCode::kConfig, "model dimensions must be positive");
  }
  if (dropout_rate < 0.0 || dropout_rate > 1.0) {
    Fail(ErrorCode::kConfig, "dropout rate must lie in [0, 1]");
  }
  ModelParams p;
  p.dims = dims;
  p.dropout_rate = dropout_rate;
  p.embeddings = Matrix(dims.vocab, dims.encoder);
  p.de_weight = Matrix(dims.head, dims.encoder);
  p.de_bias.assign(dims.head, 0.0);
  p.clf_weight = Matrix(dims.head, dims.encoder);
  p.clf_bias.assign(dims.head, 0.0);
  p.classifiers = Matrix(dims.labels, dims.head);

  const double enc_bound = 1.0 / std::sqrt(static_cast<double>(dims.encoder));
  const double head_bound = 1.0 / std::sqrt(static_cast<double>(dims.head));
  Rng rng = Rng::Stream(seed, {0x1417});
  FillUniform(p.embeddings.data(), enc_bound, rng);
  FillUniform(p.de_weight.data(), enc_bound, rng);
  FillUniform(p.clf_weight.data(), enc_bound, rng);
  FillUniform(p.classifiers.data(), head_bound, rng);
  return p;
}

bool ModelParams::AllFinite() const {
  return Finite(embeddings.data()) && Finite(de_weight.data()) && Finite(de_bias) &&
         Finite(clf_weight.data()) && Finite(clf_bias) && Finite(classifiers.data());
}

std::vector<double> Encode(const ModelParams& params, const SparseVector& features) {
  std::vector<double> out(params.dims.encoder, 0.0);
  double total = 0.0;
  for (const auto& [idx, count] : features) {
    if (idx >= params.dims.vocab) Fail(ErrorCode::kInvalidArgument, "feature index exceeds vocab");
    const auto row = params.embeddings.row(idx);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += count * row[k];
    total += count;
  }
  if (total > 0.0) {
    for (double& v : out) v /= total;
  }
  return out;
}

std::vector<double> DeHead(const ModelParams& params, std::span<const double> enc, Mode mode,
                           Rng* rng, DeHeadTrace* trace) {
  DeHeadTrace local;
  DeHeadTrace& t = trace ? *trace : local;
  t.activation = Affine(params.de_weight, params.de_bias, enc);
  for (double& v : t.activation) v = std::tanh(v);
  t.mask = DropoutMask(t.activation.size(), params.dropout_rate, mode, rng);
  t.unnormalized.resize(t.activation.size());
  for (std::size_t k = 0; k < t.activation.size(); ++k) t.unnormalized[k] = t.activation[k] * t.mask[k];
  t.norm = Norm(t.unnormalized);
  if (t.norm == 0.0) Fail(ErrorCode::kDegenerate, "DE head produced a zero vector before normalization");
  t.output.resize(t.unnormalized.size());
  for (std::size_t k = 0; k < t.output.size(); ++k) t.output[k] = t.unnormalized[k] / t.norm;
  return t.output;
}

std::vector<double> ClfHead(const ModelParams& params, std::span<const double> enc, Mode mode,
                            Rng* rng, ClfHeadTrace* trace) {
  ClfHeadTrace local;
  ClfHeadTrace& t = trace ? *trace : local;
  t.output = Affine(params.clf_weight, params.clf_bias, enc);
  t.mask = DropoutMask(t.output.size(), params.dropout_rate, mode, rng);
  for (std::size_t k = 0; k < t.output.size(); ++k) t.output[k] *= t.mask[k];
  return t.output;
}

ItemTrace ForwardItem(const ModelParams& params, const SparseVector& features, Mode mode,
                      bool with_clf, Rng* rng) {
  ItemTrace item;
  item.features = features;
  item.encoding = Encode(params, features);
  DeHead(params, item.encoding, mode, rng, &item.de);
  if (with_clf) {
    item.clf.emplace();
    ClfHead(params, item.encoding, mode, rng, &*item.clf);
  }
  return item;
}

Matrix EmbedTexts(const ModelParams& params, const std::vector<std::string>& texts, Head head) {
  const Vocabulary vocab(params.dims.vocab);
  Matrix out(texts.size(), params.dims.head);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto enc = Encode(params, vocab.Featurize(texts[i]));
    std::vector<double> v = head == Head::kDe ? DeHead(params, enc, Mode::kEval)
                                              : ClfHead(params, enc, Mode::kEval);
    if (head == Head::kClfNormalized) {
      const double n = Norm(v);
      if (n == 0.0) {
        Fail(ErrorCode::kDegenerate, "zero classifier-head embedding for text " + std::to_string(i));
      }
      for (double& x : v) x /= n;
    }
    std::copy(v.begin(), v.end(), out.row(i).begin());
  }
  return out;
}

// ----------------------------------------------------------------- Gradients

Gradients Gradients::Zeros(const ModelDims& dims) {
  Gradients g;
  g.de_weight = Matrix(dims.head, dims.encoder);
  g.de_bias.assign(dims.head, 0.0);
  g.clf_weight = Matrix(dims.head, dims.encoder);
  g.clf_bias.assign(dims.head, 0.0);
  return g;
}

std::span<double> Gradients::ClassifierRow(LabelId l, std::size_t head_dim) {
  auto& row = classifier_rows[l];
  if (row.empty()) row.assign(head_dim, 0.0);
  return row;
}

double Gradients::SquaredNorm() const {
  auto sq = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
  };
  double total = sq(de_weight.data()) + sq(de_bias) + sq(clf_weight.data()) + sq(clf_bias);
  for (const auto& [_, row] : embedding_rows) total += sq(row);
  for (const auto& [_, row] : classifier_rows) total += sq(row);
  return total;
}

void Gradients::Scale(double factor) {
  auto scale = [factor](std::vector<double>& v) {
    for (double& x : v) x *= factor;
  };
  scale(de_weight.data());
  scale(de_bias);
  scale(clf_weight.data());
  scale(clf_bias);
  for (auto& [_, row] : embedding_rows) scale(row);
  for (auto& [_, row] : classifier_rows) scale(row);
}

void Backward(const ModelParams& params, const ForwardTrace& trace,
              const HeadGradients& upstream, Gradients& out) {
  const ModelDims& dims = params.dims;
  if (upstream.de.size() != trace.items.size() || upstream.clf.size() != trace.items.size()) {
    Fail(ErrorCode::kInvalidArgument, "upstream gradient count does not match trace");
  }
  if (out.de_weight.rows() != dims.head || out.de_weight.cols() != dims.encoder) {
    Fail(ErrorCode::kInvalidArgument, "gradient buffers do not match model dims");
  }

  std::vector<double> d_enc(dims.encoder);
  std::vector<double> d_pre(dims.head);
  for (std::size_t i = 0; i < trace.items.size(); ++i) {
    const ItemTrace& item = trace.items[i];
    const auto& g_de = upstream.de[i];
    const auto& g_clf = upstream.clf[i];
    if (g_de.empty() && g_clf.empty()) continue;
    std::fill(d_enc.begin(), d_enc.end(), 0.0);

    if (!g_de.empty()) {
      if (g_de.size() != dims.head) Fail(ErrorCode::kInvalidArgument, "DE gradient width mismatch");
      const DeHeadTrace& t = item.de;
      // y = u/|u|  =>  du = (g - y <y,g>) / |u|
      const double proj = Dot(t.output, g_de);
      for (std::size_t k = 0; k < dims.head; ++k) {
        const double du = (g_de[k] - t.output[k] * proj) / t.norm;
        const double dh = du * t.mask[k];
        d_pre[k] = dh * (1.0 - t.activation[k] * t.activation[k]);
      }
      for (std::size_t r = 0; r < dims.head; ++r) {
        out.de_bias[r] += d_pre[r];
        auto grow = out.de_weight.row(r);
        const auto wrow = params.de_weight.row(r);
        for (std::size_t c = 0; c < dims.encoder; ++c) {
          grow[c] += d_pre[r] * item.encoding[c];
          d_enc[c] += d_pre[r] * wrow[c];
        }
      }
    }

    if (!g_clf.empty()) {
      if (!item.clf) Fail(ErrorCode::kInvalidArgument, "classifier gradient for item without clf trace");
      if (g_clf.size() != dims.head) Fail(ErrorCode::kInvalidArgument, "clf gradient width mismatch");
      for (std::size_t r = 0; r < dims.head; ++r) {
        const double dz = g_clf[r] * item.clf->mask[r];
        out.clf_bias[r] += dz;
        auto grow = out.clf_weight.row(r);
        const auto wrow = params.clf_weight.row(r);
        for (std::size_t c = 0; c < dims.encoder; ++c) {
          grow[c] += dz * item.encoding[c];
          d_enc[c] += dz * wrow[c];
        }
      }
    }

    double total = 0.0;
    for (const auto& e : item.features) total += e.value;
    if (total == 0.0) continue;
    for (const auto& [idx, count] : item.features) {
      auto& row = out.embedding_rows[idx];
      if (row.empty()) row.assign(dims.encoder, 0.0);
      const double w = count / total;
      for (std::size_t c = 0; c < dims.encoder; ++c) row[c] += w * d_enc[c];
    }
  }

  for (const auto& [label, g] : upstream.classifier_rows) {
    if (label >= dims.labels) Fail(ErrorCode::kInvalidArgument, "classifier gradient label out of range");
    if (g.size() != dims.head) Fail(ErrorCode::kInvalidArgument, "classifier gradient width mismatch");
    auto row = out.ClassifierRow(label, dims.head);
    for (std::size_t k = 0; k < dims.head; ++k) row[k] += g[k];
  }
}

// ----------------------------------------------------------------- Optimizer

OptimizerState OptimizerState::ForParams(const ModelParams& p) {
  OptimizerState s;
  s.m_embeddings = Matrix(p.embeddings.rows(), p.embeddings.cols());
  s.v_embeddings = s.m_embeddings;
  s.touched_rows.assign(p.embeddings.rows(), 0);
  s.m_de_weight = Matrix(p.de_weight.rows(), p.de_weight.cols());
  s.v_de_weight = s.m_de_weight;
  s.m_de_bias.assign(p.de_bias.size(), 0.0);
  s.v_de_bias = s.m_de_bias;
  s.m_clf_weight = Matrix(p.clf_weight.rows(), p.clf_weight.cols());
  s.v_clf_weight = s.m_clf_weight;
  s.m_clf_bias.assign(p.clf_bias.size(), 0.0);
  s.v_clf_bias = s.m_clf_bias;
  s.m_classifiers = Matrix(p.classifiers.rows(), p.classifiers.cols());
  s.v_classifiers = s.m_classifiers;
  s.touched_classifiers.assign(p.classifiers.rows(), 0);
  return s;
}

void AdamUpdate(std::span<double> param, std::span<const double> grad, std::span<double> m,
                std::span<double> v, double lr, std::uint64_t step, const AdamConfig& cfg) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t k = 0; k < param.size(); ++k) {
    const double g = grad.empty() ? 0.0 : grad[k];
    m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
    v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = m[k] / bc1;
    const double v_hat = v[k] / bc2;
    param[k] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

namespace {

void CheckFinite(const std::vector<double>& v, const char* name) {
  for (double x : v) {
    if (!std::isfinite(x)) Fail(ErrorCode::kNumeric, std::string("non-finite gradient in ") + name);
  }
}

// Rows never touched have zero moments, so skipping them is exact.
void SparseRowsAdam(Matrix& param, Matrix& m, Matrix& v, std::vector<char>& touched,
                    const std::map<std::uint32_t, std::vector<double>>& rows, double lr,
                    std::uint64_t step, const AdamConfig& cfg) {
  for (const auto& [r, _] : rows) touched[r] = 1;
  auto it = rows.begin();
  for (std::size_t r = 0; r < param.rows(); ++r) {
    if (!touched[r]) continue;
    while (it != rows.end() && it->first < r) ++it;
    std::span<const double> grad;
    if (it != rows.end() && it->first == r) grad = it->second;
    AdamUpdate(param.row(r), grad, m.row(r), v.row(r), lr, step, cfg);
  }
}

}  // namespace

void OptimizerStep(ModelParams& params, const Gradients& grads_in, OptimizerState& state,
                   const AdamConfig& cfg) {
  CheckFinite(grads_in.de_weight.data(), "de_weight");
  CheckFinite(grads_in.de_bias, "de_bias");
  CheckFinite(grads_in.clf_weight.data(), "clf_weight");
  CheckFinite(grads_in.clf_bias, "clf_bias");
  for (const auto& [r, row] : grads_in.embedding_rows) {
    if (r >= params.dims.vocab) Fail(ErrorCode::kInvalidArgument, "embedding gradient row out of range");
    CheckFinite(row, "embeddings");
  }
  for (const auto& [r, row] : grads_in.classifier_rows) {
    if (r >= params.dims.labels) Fail(ErrorCode::kInvalidArgument, "classifier gradient row out of range");
    CheckFinite(row, "classifiers");
  }
  if (state.m_embeddings.rows() != params.embeddings.rows() ||
      state.m_classifiers.rows() != params.classifiers.rows()) {
    Fail(ErrorCode::kInvalidArgument, "optimizer state does not match parameters");
  }

  const Gradients* grads = &grads_in;
  Gradients clipped;
  if (cfg.clip_norm > 0.0) {
    const double norm = std::sqrt(grads_in.SquaredNorm());
    if (norm > cfg.clip_norm) {
      clipped = grads_in;
      clipped.Scale(cfg.clip_norm / norm);
      grads = &clipped;
    }
  }

  ++state.step;
  const std::uint64_t t = state.step;
  SparseRowsAdam(params.embeddings, state.m_embeddings, state.v_embeddings, state.touched_rows,
                 grads->embedding_rows, cfg.lr_encoder, t, cfg);
  AdamUpdate(params.de_weight.data(), grads->de_weight.data(), state.m_de_weight.data(),
             state.v_de_weight.data(), cfg.lr_heads, t, cfg);
  AdamUpdate(params.de_bias, grads->de_bias, state.m_de_bias, state.v_de_bias, cfg.lr_heads, t, cfg);
  AdamUpdate(params.clf_weight.data(), grads->clf_weight.data(), state.m_clf_weight.data(),
             state.v_clf_weight.data(), cfg.lr_heads, t, cfg);
  AdamUpdate(params.clf_bias, grads->clf_bias, state.m_clf_bias, state.v_clf_bias, cfg.lr_heads, t,
             cfg);
  SparseRowsAdam(params.classifiers, state.m_classifiers, state.v_classifiers,
                 state.touched_classifiers, grads->classifier_rows, cfg.lr_classifier, t, cfg);
  if (!params.AllFinite()) Fail(ErrorCode::kNumeric, "parameters became non-finite after optimizer step");
}

// ---------------------------------------------------------------- Checkpoint

namespace {

constexpr char kMagic[8] = {'U', 'N', 'I', 'D', 'E', 'C', 'M', 'P'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 8 + 4 + 4 + 4 * 8 + 8;

template <typename T>
void PutLE(std::ostream& out, T value) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits;
  std::memcpy(&bits, &value, sizeof(T));
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(buf, sizeof(T));
}

template <typename T>
T GetLE(std::istream& in, const std::string& path) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    Fail(ErrorCode::kFormat, "truncated checkpoint '" + path + "'");
  }
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(buf[i]) << (8 * i);
  T value;
  std::memcpy(&value, &bits, sizeof(T));
  return value;
}

void PutBlock(std::ostream& out, const std::vector<double>& values) {
  for (double v : values) PutLE(out, v);
}

void GetBlock(std::istream& in, std::vector<double>& values, const std::string& path) {
  for (double& v : values) v = GetLE<double>(in, path);
}

}  // namespace

void SaveCheckpoint(const ModelParams& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorCode::kIo, "cannot write checkpoint '" + path + "'");
  out.write(kMagic, sizeof(kMagic));
  PutLE(out, kVersion);
  PutLE(out, std::uint32_t{0});
  PutLE(out, static_cast<std::uint64_t>(p.dims.vocab));
  PutLE(out, static_cast<std::uint64_t>(p.dims.encoder));
  PutLE(out, static_cast<std::uint64_t>(p.dims.head));
  PutLE(out, static_cast<std::uint64_t>(p.dims.labels));
  PutLE(out, p.dropout_rate);
  PutBlock(out, p.embeddings.data());
  PutBlock(out, p.de_weight.data());
  PutBlock(out, p.de_bias);
  PutBlock(out, p.clf_weight.data());
  PutBlock(out, p.clf_bias);
  PutBlock(out, p.classifiers.data());
  if (!out) Fail(ErrorCode::kIo, "failed writing checkpoint '" + path + "'");
}

ModelParams LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open checkpoint '" + path + "'");
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0);

  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    Fail(ErrorCode::kFormat, "bad checkpoint magic in '" + path + "'");
  }
  if (GetLE<std::uint32_t>(in, path) != kVersion) {
    Fail(ErrorCode::kFormat, "unsupported checkpoint version in '" + path + "'");
  }
  GetLE<std::uint32_t>(in, path);
  ModelDims dims;
  dims.vocab = GetLE<std::uint64_t>(in, path);
  dims.encoder = GetLE<std::uint64_t>(in, path);
  dims.head = GetLE<std::uint64_t>(in, path);
  dims.labels = GetLE<std::uint64_t>(in, path);
  const double dropout = GetLE<double>(in, path);

  // Guard the size arithmetic before allocating anything.
  constexpr std::uint64_t kLimit = std::uint64_t{1} << 40;
  if (dims.vocab == 0 || dims.encoder == 0 || dims.head == 0 || dims.labels == 0 ||
      dims.vocab > kLimit || dims.encoder > (1u << 20) || dims.head > (1u << 20) ||
      dims.labels > kLimit) {
    Fail(ErrorCode::kFormat, "implausible checkpoint dimensions in '" + path + "'");
  }
  const std::uint64_t doubles = dims.vocab * dims.encoder + 2 * (dims.head * dims.encoder + dims.head) +
                                dims.labels * dims.head;
  if (file_size != kHeaderBytes + 8 * doubles) {
    Fail(ErrorCode::kFormat, "checkpoint size does not match declared dimensions in '" + path + "'");
  }

  ModelParams p;
  p.dims = dims;
  p.dropout_rate = dropout;
  p.embeddings = Matrix(dims.vocab, dims.encoder);
  p.de_weight = Matrix(dims.head, dims.encoder);
  p.de_bias.assign(dims.head, 0.0);
  p.clf_weight = Matrix(dims.head, dims.encoder);
  p.clf_bias.assign(dims.head, 0.0);
  p.classifiers = Matrix(dims.labels, dims.head);
  GetBlock(in, p.embeddings.data(), path);
  GetBlock(in, p.de_weight.data(), path);
  GetBlock(in, p.de_bias, path);
  GetBlock(in, p.clf_weight.data(), path);
  GetBlock(in, p.clf_bias, path);
  GetBlock(in, p.classifiers.data(), path);
  if (!p.AllFinite()) Fail(ErrorCode::kFormat, "checkpoint contains non-finite values");
  return p;
}

}  // namespace unidec
