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

#ifndef UNIDEC_COMMON_HPP_
#define UNIDEC_COMMON_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace unidec {

using LabelId = std::uint32_t;
using QueryId = std::uint32_t;
using LabelSet = std::vector<LabelId>;  // sorted, duplicate-free

// Error categories surfaced through the C API as status codes.
enum class ErrorCode {
  kInvalidArgument = 1,
  kConfig = 2,
  kIo = 3,
  kFormat = 4,
  kNumeric = 5,
  kDegenerate = 6,
  kInternal = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

// Row-major dense matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double Dot(std::span<const double> a, std::span<const double> b);
double Norm(std::span<const double> a);

// Splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t Mix64(std::uint64_t x);

// Deterministic random stream. The engine output is fixed by the standard;
// the bounded/uniform draws below are implemented here so sequences do not
// depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(Mix64(seed)) {}

  // Stream keyed by a seed and a tuple of counters, e.g. (epoch, batch, query).
  static Rng Stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

  std::uint64_t NextU64() { return engine_(); }
  // Uniform in [0, n). n must be > 0.
  std::uint64_t Below(std::uint64_t n);
  // Uniform in [0, 1).
  double Uniform01();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform01(); }

 private:
  std::mt19937_64 engine_;
};

// Uniform sample of min(count, items.size()) elements without replacement,
// returned sorted ascending.
std::vector<std::uint32_t> SampleWithoutReplacement(std::span<const std::uint32_t> items,
                                                    std::size_t count, Rng& rng);

}  // namespace unidec

#endif  // UNIDEC_COMMON_HPP_
