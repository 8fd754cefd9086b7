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

// Exact-arithmetic check that attention layers whose heads never look at
// their own token can still build a contextual mapping on the δ-grid, and
// the piecewise-constant function approximation assembled from it.
//
// Units: every quantity is stored multiplied by K = 1/δ, so grid points are
// the integers 0..K−1 and all intermediate values stay integral. Thresholds
// sit halfway between integers and are stored doubled.

#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsemask/numerics.hpp"

namespace sparsemask {

__extension__ typedef __int128 int128_t;

class ExactOverflow : public std::overflow_error {
 public:
  using std::overflow_error::overflow_error;
};

/// 128-bit signed integer whose arithmetic throws ExactOverflow instead of
/// wrapping.
class WideInt {
 public:
  constexpr WideInt() = default;
  constexpr WideInt(std::int64_t v) : v_(v) {}  // NOLINT(google-explicit-constructor)
  static constexpr WideInt from_raw(int128_t v) {
    WideInt w;
    w.v_ = v;
    return w;
  }

  constexpr int128_t raw() const { return v_; }
  /// Throws ExactOverflow when the value does not fit in 64 bits.
  std::int64_t to_int64() const;
  double to_double() const { return static_cast<double>(v_); }
  std::string to_string() const;

  friend WideInt operator+(WideInt a, WideInt b);
  friend WideInt operator-(WideInt a, WideInt b);
  friend WideInt operator*(WideInt a, WideInt b);
  WideInt operator-() const { return WideInt(0) - *this; }
  WideInt& operator+=(WideInt b) { return *this = *this + b; }
  WideInt& operator-=(WideInt b) { return *this = *this - b; }
  WideInt& operator*=(WideInt b) { return *this = *this * b; }
  /// Floor division and the matching non-negative remainder; divisor > 0.
  WideInt floor_div(WideInt divisor) const;
  WideInt mod(WideInt divisor) const;

  friend constexpr auto operator<=>(WideInt a, WideInt b) = default;

 private:
  int128_t v_ = 0;
};

WideInt ipow(WideInt base, unsigned exponent);

/// num / den with den > 0.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  friend bool operator==(const Rational& a, const Rational& b) {
    return static_cast<int128_t>(a.num) * b.den == static_cast<int128_t>(b.num) * a.den;
  }
};

struct ApproxConfig {
  std::size_t n = 3;
  std::size_t d = 1;
  std::int64_t inv_delta = 4;  // K

  /// n ≥ 2, d ≥ 1, K ≥ 2.
  void validate() const;
};

/// u = (1, K, …, K^{d−1}), K^d, Δ_h and the sentinel, all in scaled units.
/// Construction enumerates {0..K−1}^d and verifies that row ↦ row·u is a
/// bijection onto 0..K^d−1.
class ShiftConfig {
 public:
  explicit ShiftConfig(const ApproxConfig& config);

  const ApproxConfig& config() const { return config_; }
  std::size_t n() const { return config_.n; }
  std::size_t d() const { return config_.d; }
  WideInt k() const { return config_.inv_delta; }
  const std::vector<WideInt>& u() const { return u_; }
  /// δ^{−d} = K^d, the shift-layer multiplier and the number of shift layers.
  WideInt k_pow_d() const { return k_pow_d_; }
  /// Δ_h/δ = (K^d − 1)(K^{nd} + K^d + 1). Equal to Δ_h in scaled units.
  WideInt delta_h_over_delta() const { return big_d_; }
  /// −δ^{−nd} scaled: −K^{nd+1}.
  WideInt sentinel() const { return sentinel_; }

 private:
  ApproxConfig config_;
  std::vector<WideInt> u_;
  WideInt k_pow_d_;
  WideInt big_d_;
  WideInt sentinel_;
};

/// Grid index k with kδ ≤ t < (k+1)δ for k in 0..K−1, else the sentinel.
/// Returned in scaled units (k, or −K^{nd+1}).
WideInt quantize(const Rational& t, const ShiftConfig& cfg);

/// n × d scaled integers; row-major.
struct GridSequence {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<WideInt> values;

  WideInt at(std::size_t i, std::size_t j) const { return values[i * d + j]; }
  WideInt& at(std::size_t i, std::size_t j) { return values[i * d + j]; }
  /// Z_i·u for every token.
  std::vector<WideInt> row_ids(const ShiftConfig& cfg) const;
  bool rows_distinct() const;
  bool on_grid(const ShiftConfig& cfg) const;

  friend bool operator==(const GridSequence&, const GridSequence&) = default;
  friend auto operator<=>(const GridSequence&, const GridSequence&) = default;
};

/// A threshold b stored as 2b, so half-integer thresholds stay integral.
struct Threshold {
  WideInt twice;
  static Threshold half_below(WideInt v) { return {v * 2 - 1}; }
  static Threshold half_above(WideInt v) { return {v * 2 + 1}; }
  static Threshold at(WideInt v) { return {v * 2}; }
};

class ThresholdHit : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct PsiResult {
  /// First-coordinate value per token; other coordinates are exactly 0.
  std::vector<WideInt> value;
  /// Token indices each token's reduction read.
  std::vector<std::vector<std::size_t>> reads;
};

/// ψ(Z; b)_i = max_{j≠i} Z_j·u if Z_i·u > b, min_{j≠i} Z_j·u if Z_i·u < b.
/// Rejects n < 2 and any Z_i·u == b.
PsiResult psi_head(const GridSequence& z, Threshold b, const ShiftConfig& cfg);

/// Same head through a literal attention matrix: logits (Z_i·u − b)(Z_j·u),
/// diagonal excluded, hardmax rows, in doubles. Used as a cross-check.
std::vector<double> psi_head_hardmax(const GridSequence& z, Threshold b, const ShiftConfig& cfg);

/// Z + K^d Ψ(Z; b1, b2) e⁽¹⁾ with Ψ = ψ(·; b1) − ψ(·; b2). Requires b1 < b2.
GridSequence selective_shift(const GridSequence& z, Threshold b1, Threshold b2,
                             const ShiftConfig& cfg);

struct ShiftPhase {
  WideInt layer;       // the l whose window (l − ½, l + ½) fired
  std::size_t token;   // the token that moved
  std::vector<WideInt> ids;  // Z·u of every token after the move
};

struct ContextualTrace {
  std::vector<WideInt> l;        // Z·u of the input
  std::vector<WideInt> l_tilde;  // after all K^d shift layers
  std::vector<WideInt> l_plus;   // after the first global shift
  std::vector<WideInt> q;        // after the second global shift
  std::vector<ShiftPhase> phases;
  std::size_t layers_run = 0;
  std::size_t reads_checked = 0;
  std::size_t hardmax_checks = 0;
};

/// The K^d selective-shift layers in increasing l, then two layers
/// Z + (Δ_h/δ) ψ(Z; 0). Rejects n ≤ 2, off-grid entries and duplicate rows.
ContextualTrace contextual_id(const GridSequence& g, const ShiftConfig& cfg,
                              bool hardmax_cross_check = false);

struct VerifyReport {
  std::size_t inputs = 0;
  std::size_t values = 0;
  std::size_t distinct_values = 0;
  /// Pairs of entries from different inputs with equal values.
  std::size_t collisions = 0;
  /// The subset of `collisions` whose two inputs are not row permutations of
  /// each other.
  std::size_t collisions_non_permutation = 0;
  std::size_t within_input_violations = 0;
  std::size_t residue_violations = 0;
  std::size_t interval_violations = 0;
  std::size_t bound_violations = 0;
  std::size_t ordering_violations = 0;
  std::size_t margin_violations = 0;
  std::size_t injectivity_violations = 0;
  std::size_t equivariance_violations = 0;
  std::size_t single_window_violations = 0;
  std::size_t phases_checked = 0;
  std::size_t reads_checked = 0;
  std::size_t hardmax_checks = 0;
  /// Smallest separation over every checked gap, scaled (1 == δ).
  WideInt min_margin;

  /// Every structural property holds except, possibly, cross-input
  /// distinctness between permutations of one input.
  bool structural_ok() const;
  /// Both clauses of the contextual-mapping definition, literally.
  bool definition_ok() const { return structural_ok() && collisions == 0; }

  std::string to_json() const;
};

/// Enumerates every distinct-row grid input; requires K^{nd} ≤ 10^6.
VerifyReport verify_contextual_mapping(const ApproxConfig& config, bool hardmax_cross_check = false);

/// Every distinct-row grid input, in lexicographic order of row ids.
std::vector<GridSequence> enumerate_grid_inputs(const ShiftConfig& cfg);

/// Maps each distinct-row grid input to an n × d output.
using FunctionTable = std::map<GridSequence, Matrix>;

FunctionTable identity_table(const ShiftConfig& cfg);
FunctionTable constant_table(const ShiftConfig& cfg, double value);
/// Independent uniform outputs per input.
FunctionTable random_table(const ShiftConfig& cfg, std::uint64_t seed);
/// Uniform outputs drawn for sorted inputs and carried to every row
/// permutation, so f(πG) = π f(G).
FunctionTable equivariant_random_table(const ShiftConfig& cfg, std::uint64_t seed);

class ContextualMappingViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Contextual values that two table entries would send to different outputs.
std::size_t table_conflicts(const FunctionTable& table, const ShiftConfig& cfg);

/// g = value lookup ∘ contextual_id ∘ quantize.
class ApproximatedFunction {
 public:
  /// Throws ContextualMappingViolation when two table entries need one
  /// contextual value to produce different outputs, and std::invalid_argument
  /// when the table misses a grid input.
  ApproximatedFunction(const FunctionTable& table, const ShiftConfig& cfg);

  /// Rows of `x` are quantized entrywise. Throws std::domain_error for inputs
  /// off the grid or with duplicate rows, ContextualMappingViolation when a
  /// contextual value is missing from the lookup.
  Matrix operator()(const std::vector<Rational>& x) const;
  Matrix on_grid(const GridSequence& g) const;

 private:
  ShiftConfig cfg_;
  std::map<WideInt, std::vector<double>> lookup_;
};

}  // namespace sparsemask
