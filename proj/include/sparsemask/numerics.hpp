// Copyright 2026 The sparsemask Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense row-major matrices and the handful of kernels the rest of the
// library is built on: products, row softmax/hardmax, the Gumbel sampler and
// a central-difference gradient checker.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparsemask {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void fill(double v);
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;

  Matrix transposed() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);
  // this += s * other
  void axpy(double s, const Matrix& other);

  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);

// a·b
Matrix matmul(const Matrix& a, const Matrix& b);
// a·bᵀ
Matrix matmul_bt(const Matrix& a, const Matrix& b);
// aᵀ·b
Matrix matmul_at(const Matrix& a, const Matrix& b);
// acc += aᵀ·b, the common weight-gradient shape.
void add_matmul_at(Matrix& acc, const Matrix& a, const Matrix& b);

double max_abs_diff(const Matrix& a, const Matrix& b);

/// Row-wise softmax with per-row max subtraction. Throws on an empty matrix.
Matrix softmax_rows(const Matrix& m);

/// Row-wise hardmax: each row becomes the uniform distribution over its
/// argmax set, so ties split equally.
Matrix hardmax_rows(const Matrix& m);

inline double sigmoid(double x) {
  // Branches keep exp() from overflowing for large |x|.
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// xoshiro256** seeded through SplitMix64. Streams are identical on every
/// platform for a given seed; only integer arithmetic is involved up to the
/// final 53-bit conversion in uniform().
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Independent generator for (seed, stream, counter); lets training derive
  /// per-step randomness without carrying generator state in checkpoints.
  static Rng derive(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Unbiased integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

constexpr double kGumbelClamp = 1e-12;

/// −log(−log u) with u clamped to [1e-12, 1 − 1e-12].
double gumbel_from_uniform(double u);
double sample_gumbel(Rng& rng);

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;

  /// Throws std::runtime_error naming the failing coordinate when
  /// max_rel_error exceeds tol.
  void require(double tol, const std::string& what = "gradient") const;
};

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Compares an analytic gradient with central differences of `f` at `point`.
/// Error per coordinate is |a − c| / max(1, |a|, |c|).
GradcheckResult gradcheck(const ScalarFunction& f, std::span<const double> point,
                          std::span<const double> analytic, double step);

/// Same, restricted to a subset of coordinates (large models).
GradcheckResult gradcheck(const ScalarFunction& f, std::span<const double> point,
                          std::span<const double> analytic, double step,
                          std::span<const std::size_t> coordinates);

}  // namespace sparsemask
