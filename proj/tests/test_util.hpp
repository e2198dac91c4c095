// Helpers shared by the test binaries: scratch directories and random fixtures.

#ifndef UNIDEC_TESTS_TEST_UTIL_HPP_
#define UNIDEC_TESTS_TEST_UTIL_HPP_

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "unidec/common.hpp"

namespace testutil {

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path ScratchDir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("unidec_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void WriteFile(const std::filesystem::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  out << body;
}

inline std::string ReadFile(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Independent of unidec::Rng on purpose.
inline unidec::Matrix RandomMatrix(std::size_t rows, std::size_t cols, std::mt19937_64& gen,
                                   double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  unidec::Matrix m(rows, cols);
  for (double& v : m.data()) v = u(gen);
  return m;
}

inline void NormalizeRows(unidec::Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    for (double v : m.row(r)) s += v * v;
    s = std::sqrt(s);
    for (double& v : m.row(r)) v /= s;
  }
}

}  // namespace testutil

#endif  // UNIDEC_TESTS_TEST_UTIL_HPP_
