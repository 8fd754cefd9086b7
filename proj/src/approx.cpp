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

#include "sparsemask/approx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "json.hpp"

namespace sparsemask {

std::int64_t WideInt::to_int64() const {
  if (v_ > std::numeric_limits<std::int64_t>::max() || v_ < std::numeric_limits<std::int64_t>::min())
    throw ExactOverflow("value " + to_string() + " does not fit in 64 bits");
  return static_cast<std::int64_t>(v_);
}

std::string WideInt::to_string() const {
  if (v_ == 0) return "0";
  std::string s;
  const bool neg = v_ < 0;
  // Digits are taken from the negative side so the minimum value is safe.
  int128_t x = neg ? v_ : -v_;
  while (x != 0) {
    s.push_back(static_cast<char>('0' - static_cast<int>(x % 10)));
    x /= 10;
  }
  if (neg) s.push_back('-');
  return {s.rbegin(), s.rend()};
}

WideInt operator+(WideInt a, WideInt b) {
  int128_t r;
  if (__builtin_add_overflow(a.v_, b.v_, &r))
    throw ExactOverflow("128-bit overflow in " + a.to_string() + " + " + b.to_string());
  return WideInt::from_raw(r);
}

WideInt operator-(WideInt a, WideInt b) {
  int128_t r;
  if (__builtin_sub_overflow(a.v_, b.v_, &r))
    throw ExactOverflow("128-bit overflow in " + a.to_string() + " - " + b.to_string());
  return WideInt::from_raw(r);
}

WideInt operator*(WideInt a, WideInt b) {
  int128_t r;
  if (__builtin_mul_overflow(a.v_, b.v_, &r))
    throw ExactOverflow("128-bit overflow in " + a.to_string() + " * " + b.to_string());
  return WideInt::from_raw(r);
}

WideInt WideInt::floor_div(WideInt divisor) const {
  if (divisor.v_ <= 0) throw std::invalid_argument("floor_div needs a positive divisor");
  int128_t q = v_ / divisor.v_;
  if ((v_ % divisor.v_) < 0) --q;
  return from_raw(q);
}

WideInt WideInt::mod(WideInt divisor) const {
  if (divisor.v_ <= 0) throw std::invalid_argument("mod needs a positive divisor");
  int128_t r = v_ % divisor.v_;
  if (r < 0) r += divisor.v_;
  return from_raw(r);
}

WideInt ipow(WideInt base, unsigned exponent) {
  WideInt r = 1;
  for (unsigned i = 0; i < exponent; ++i) r *= base;
  return r;
}

void ApproxConfig::validate() const {
  if (n < 2) throw std::invalid_argument("approximation construction needs n >= 2 tokens");
  if (d < 1) throw std::invalid_argument("token dimension d must be >= 1");
  if (inv_delta < 2) throw std::invalid_argument("1/delta must be an integer >= 2");
}

ShiftConfig::ShiftConfig(const ApproxConfig& config) : config_(config) {
  config_.validate();
  const WideInt k = config_.inv_delta;
  const auto d = static_cast<unsigned>(config_.d);
  const auto nd = static_cast<unsigned>(config_.n * config_.d);
  for (unsigned t = 0; t < d; ++t) u_.push_back(ipow(k, t));
  k_pow_d_ = ipow(k, d);
  big_d_ = (k_pow_d_ - 1) * (ipow(k, nd) + k_pow_d_ + 1);
  sentinel_ = -ipow(k, nd + 1);

  // row ↦ row·u over {0..K−1}^d must hit every id in 0..K^d−1 exactly once.
  const std::int64_t rows = k_pow_d_.to_int64();
  std::vector<bool> hit(static_cast<std::size_t>(rows), false);
  std::vector<std::int64_t> digits(config_.d, 0);
  for (std::int64_t r = 0; r < rows; ++r) {
    WideInt id = 0;
    for (std::size_t t = 0; t < config_.d; ++t) id += WideInt(digits[t]) * u_[t];
    const std::int64_t v = id.to_int64();
    if (v < 0 || v >= rows || hit[static_cast<std::size_t>(v)])
      throw std::logic_error("row-to-id map is not a bijection for this configuration");
    hit[static_cast<std::size_t>(v)] = true;
    for (std::size_t t = 0; t < config_.d; ++t) {
      if (++digits[t] < config_.inv_delta) break;
      digits[t] = 0;
    }
  }
}

WideInt quantize(const Rational& t, const ShiftConfig& cfg) {
  if (t.den <= 0) throw std::invalid_argument("rational denominator must be > 0");
  // k = ⌊t·K⌋ = ⌊num·K / den⌋.
  const WideInt k = (WideInt(t.num) * cfg.k()).floor_div(WideInt(t.den));
  if (k < 0 || k >= cfg.k()) return cfg.sentinel();
  return k;
}

std::vector<WideInt> GridSequence::row_ids(const ShiftConfig& cfg) const {
  if (d != cfg.d()) throw std::invalid_argument("sequence dimension does not match config d");
  std::vector<WideInt> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    WideInt s = 0;
    for (std::size_t j = 0; j < d; ++j) s += at(i, j) * cfg.u()[j];
    ids[i] = s;
  }
  return ids;
}

bool GridSequence::rows_distinct() const {
  std::set<std::vector<WideInt>> rows;
  for (std::size_t i = 0; i < n; ++i)
    rows.insert(std::vector<WideInt>(values.begin() + static_cast<std::ptrdiff_t>(i * d),
                                     values.begin() + static_cast<std::ptrdiff_t>((i + 1) * d)));
  return rows.size() == n;
}

bool GridSequence::on_grid(const ShiftConfig& cfg) const {
  return std::all_of(values.begin(), values.end(),
                     [&](WideInt v) { return v >= 0 && v < cfg.k(); });
}

namespace {

void check_shape(const GridSequence& z, const ShiftConfig& cfg) {
  if (z.n != cfg.n() || z.d != cfg.d() || z.values.size() != z.n * z.d)
    throw std::invalid_argument("sequence shape does not match the configuration");
}

}  // namespace

PsiResult psi_head(const GridSequence& z, Threshold b, const ShiftConfig& cfg) {
  check_shape(z, cfg);
  if (z.n < 2) throw std::invalid_argument("psi needs n >= 2 so that j != i is nonempty");
  const std::vector<WideInt> ids = z.row_ids(cfg);
  PsiResult r;
  r.value.resize(z.n);
  r.reads.resize(z.n);
  for (std::size_t i = 0; i < z.n; ++i) {
    const WideInt twice = ids[i] * 2;
    if (twice == b.twice)
      throw ThresholdHit("token " + std::to_string(i) + " sits exactly on threshold " +
                         b.twice.to_string() + "/2");
    const bool above = twice > b.twice;
    bool first = true;
    WideInt best = 0;
    for (std::size_t j = 0; j < z.n; ++j) {
      if (j == i) continue;
      r.reads[i].push_back(j);
      if (first || (above ? ids[j] > best : ids[j] < best)) best = ids[j];
      first = false;
    }
    r.value[i] = best;
  }
  return r;
}

std::vector<double> psi_head_hardmax(const GridSequence& z, Threshold b, const ShiftConfig& cfg) {
  check_shape(z, cfg);
  const std::vector<WideInt> ids = z.row_ids(cfg);
  const std::size_t n = z.n;
  Matrix logits(n, n);
  const double lowest = std::numeric_limits<double>::lowest();
  for (std::size_t i = 0; i < n; ++i) {
    const double centred = ids[i].to_double() - b.twice.to_double() / 2.0;
    for (std::size_t j = 0; j < n; ++j)
      logits(i, j) = i == j ? lowest : centred * ids[j].to_double();
  }
  const Matrix a = hardmax_rows(logits);
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += a(i, j) * ids[j].to_double();
  return out;
}

GridSequence selective_shift(const GridSequence& z, Threshold b1, Threshold b2,
                             const ShiftConfig& cfg) {
  if (!(b1.twice < b2.twice)) throw std::invalid_argument("selective shift needs b1 < b2");
  const PsiResult lo = psi_head(z, b1, cfg);
  const PsiResult hi = psi_head(z, b2, cfg);
  GridSequence out = z;
  for (std::size_t i = 0; i < z.n; ++i) out.at(i, 0) += cfg.k_pow_d() * (lo.value[i] - hi.value[i]);
  return out;
}

namespace {

constexpr double kExactDoubleLimit = 9007199254740992.0;  // 2^53

// Runs ψ, asserting the j ≠ i structure and optionally the hardmax path.
PsiResult checked_psi(const GridSequence& z, Threshold b, const ShiftConfig& cfg, bool hardmax,
                      ContextualTrace& trace) {
  PsiResult r = psi_head(z, b, cfg);
  for (std::size_t i = 0; i < r.reads.size(); ++i) {
    if (std::find(r.reads[i].begin(), r.reads[i].end(), i) != r.reads[i].end())
      throw std::logic_error("psi read token " + std::to_string(i) + "'s own value");
    ++trace.reads_checked;
  }
  if (hardmax) {
    const auto ids = z.row_ids(cfg);
    const bool exact = std::all_of(ids.begin(), ids.end(), [](WideInt v) {
      return std::abs(v.to_double()) < kExactDoubleLimit;
    });
    if (exact) {
      const std::vector<double> h = psi_head_hardmax(z, b, cfg);
      for (std::size_t i = 0; i < h.size(); ++i)
        if (h[i] != r.value[i].to_double())
          throw std::logic_error("hardmax attention disagrees with the closed-form psi");
      ++trace.hardmax_checks;
    }
  }
  return r;
}

}  // namespace

ContextualTrace contextual_id(const GridSequence& g, const ShiftConfig& cfg,
                              bool hardmax_cross_check) {
  check_shape(g, cfg);
  if (cfg.n() <= 2) throw std::invalid_argument("contextual mapping needs n > 2 tokens");
  if (!g.on_grid(cfg)) throw std::domain_error("input has entries off the grid 0..K-1");
  if (!g.rows_distinct()) throw std::domain_error("input has duplicate token rows");

  ContextualTrace trace;
  trace.l = g.row_ids(cfg);
  GridSequence z = g;
  std::vector<WideInt> before = trace.l;
  const std::int64_t layers = cfg.k_pow_d().to_int64();
  for (std::int64_t layer = 0; layer < layers; ++layer) {
    const Threshold b1 = Threshold::half_below(layer);
    const Threshold b2 = Threshold::half_above(layer);
    const PsiResult lo = checked_psi(z, b1, cfg, hardmax_cross_check, trace);
    const PsiResult hi = checked_psi(z, b2, cfg, hardmax_cross_check, trace);
    for (std::size_t i = 0; i < z.n; ++i) z.at(i, 0) += cfg.k_pow_d() * (lo.value[i] - hi.value[i]);
    ++trace.layers_run;
    std::vector<WideInt> after = z.row_ids(cfg);
    for (std::size_t i = 0; i < z.n; ++i)
      if (after[i] != before[i]) trace.phases.push_back({layer, i, after});
    before = std::move(after);
  }
  trace.l_tilde = before;

  const WideInt big_d = cfg.delta_h_over_delta();
  for (int pass = 0; pass < 2; ++pass) {
    const PsiResult r = checked_psi(z, Threshold::at(0), cfg, hardmax_cross_check, trace);
    for (std::size_t i = 0; i < z.n; ++i) z.at(i, 0) += big_d * r.value[i];
    ++trace.layers_run;
    (pass == 0 ? trace.l_plus : trace.q) = z.row_ids(cfg);
  }
  return trace;
}

bool VerifyReport::structural_ok() const {
  return within_input_violations == 0 && residue_violations == 0 && interval_violations == 0 &&
         bound_violations == 0 && ordering_violations == 0 && margin_violations == 0 &&
         injectivity_violations == 0 && equivariance_violations == 0 &&
         single_window_violations == 0 && collisions_non_permutation == 0 && min_margin >= 1;
}

std::string VerifyReport::to_json() const {
  nlohmann::ordered_json j;
  j["inputs"] = inputs;
  j["values"] = values;
  j["collisions"] = collisions;
  j["min_margin"] = min_margin.to_string();
  j["phases_checked"] = phases_checked;
  j["distinct_values"] = distinct_values;
  j["collisions_non_permutation"] = collisions_non_permutation;
  j["within_input_violations"] = within_input_violations;
  j["residue_violations"] = residue_violations;
  j["interval_violations"] = interval_violations;
  j["bound_violations"] = bound_violations;
  j["ordering_violations"] = ordering_violations;
  j["margin_violations"] = margin_violations;
  j["injectivity_violations"] = injectivity_violations;
  j["equivariance_violations"] = equivariance_violations;
  j["single_window_violations"] = single_window_violations;
  j["reads_checked"] = reads_checked;
  j["hardmax_checks"] = hardmax_checks;
  j["structural_ok"] = structural_ok();
  j["definition_ok"] = definition_ok();
  return j.dump(2);
}

std::vector<GridSequence> enumerate_grid_inputs(const ShiftConfig& cfg) {
  const std::size_t n = cfg.n();
  const std::size_t d = cfg.d();
  const WideInt total = ipow(cfg.k(), static_cast<unsigned>(n * d));
  if (total > WideInt(1000000))
    throw std::invalid_argument("enumeration budget exceeded: (1/delta)^(nd) = " +
                                total.to_string() + " > 1e6");
  const std::int64_t rows = cfg.k_pow_d().to_int64();
  std::vector<GridSequence> out;
  std::vector<std::int64_t> pick(n, 0);
  while (true) {
    std::vector<std::int64_t> sorted = pick;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end()) {
      GridSequence g{n, d, std::vector<WideInt>(n * d)};
      for (std::size_t i = 0; i < n; ++i) {
        std::int64_t id = pick[i];
        for (std::size_t j = 0; j < d; ++j) {
          g.at(i, j) = id % cfg.config().inv_delta;
          id /= cfg.config().inv_delta;
        }
      }
      out.push_back(std::move(g));
    }
    std::size_t pos = n;
    while (pos > 0) {
      --pos;
      if (++pick[pos] < rows) break;
      pick[pos] = 0;
      if (pos == 0) return out;
    }
  }
}

namespace {

std::vector<WideInt> sorted_copy(std::vector<WideInt> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// Token order by original id, smallest first.
std::vector<std::size_t> order_by(const std::vector<WideInt>& ids) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  return order;
}

void check_margin(WideInt gap, VerifyReport& r, bool& first) {
  if (first || gap < r.min_margin) r.min_margin = gap;
  first = false;
  if (gap < 1) ++r.margin_violations;
}

}  // namespace

VerifyReport verify_contextual_mapping(const ApproxConfig& config, bool hardmax_cross_check) {
  const ShiftConfig cfg(config);
  if (cfg.n() <= 2) throw std::invalid_argument("contextual mapping needs n > 2 tokens");
  const std::vector<GridSequence> inputs = enumerate_grid_inputs(cfg);
  const std::size_t n = cfg.n();
  const WideInt big_d = cfg.delta_h_over_delta();

  VerifyReport r;
  r.inputs = inputs.size();
  bool first_margin = true;
  struct Entry {
    WideInt value;
    std::size_t input;
  };
  std::vector<Entry> entries;
  std::vector<std::vector<WideInt>> canonical(inputs.size());  // sorted row ids
  std::map<std::vector<WideInt>, std::pair<WideInt, std::vector<WideInt>>> by_set;

  for (std::size_t gi = 0; gi < inputs.size(); ++gi) {
    const ContextualTrace t = contextual_id(inputs[gi], cfg, hardmax_cross_check);
    r.reads_checked += t.reads_checked;
    r.hardmax_checks += t.hardmax_checks;
    const auto order = order_by(t.l);

    // One token per shift layer, n phases, visited in increasing l.
    if (t.phases.size() != n) ++r.single_window_violations;
    for (std::size_t p = 0; p < t.phases.size() && p < n; ++p) {
      const ShiftPhase& ph = t.phases[p];
      if (ph.token != order[p]) ++r.single_window_violations;
      // l_{p+2} < … < l_n < l̃_1 < … < l̃_{p+1} (1-based, by original order).
      bool ok = true;
      for (std::size_t a = p + 1; a + 1 < n; ++a)
        ok = ok && ph.ids[order[a]] < ph.ids[order[a + 1]];
      if (p + 1 < n) ok = ok && ph.ids[order[n - 1]] < ph.ids[order[0]];
      for (std::size_t a = 0; a < p; ++a) ok = ok && ph.ids[order[a]] < ph.ids[order[a + 1]];
      if (!ok) ++r.ordering_violations;
      ++r.phases_checked;
    }

    // Margins: l̃_1 − l_n, l̃_i − l̃_{i−1}, l̃⁺_1 − l̃⁺_n.
    check_margin(t.l_tilde[order[0]] - t.l[order[n - 1]], r, first_margin);
    for (std::size_t a = 1; a < n; ++a)
      check_margin(t.l_tilde[order[a]] - t.l_tilde[order[a - 1]], r, first_margin);
    check_margin(t.l_plus[order[0]] - t.l_plus[order[n - 1]], r, first_margin);

    const WideInt top = t.l_tilde[order[n - 1]];
    if (!(t.l_tilde[order[0]] > 0) || !(top < big_d)) ++r.bound_violations;
    for (std::size_t i = 0; i < n; ++i) {
      if (t.q[i].mod(big_d) != t.l_tilde[i]) ++r.residue_violations;
      if (t.q[i] < big_d * big_d * top || !(t.q[i] < big_d * big_d * (top + 1)))
        ++r.interval_violations;
    }
    const auto qs = sorted_copy(t.q);
    if (std::adjacent_find(qs.begin(), qs.end()) != qs.end()) ++r.within_input_violations;

    // Row permutations of one input must share l̃_n and permute q alike;
    // distinct row sets must get distinct l̃_n.
    canonical[gi] = sorted_copy(t.l);
    std::vector<WideInt> q_by_id(n);
    for (std::size_t a = 0; a < n; ++a) q_by_id[a] = t.q[order[a]];
    const auto [it, inserted] = by_set.try_emplace(canonical[gi], top, q_by_id);
    if (!inserted && (it->second.first != top || it->second.second != q_by_id))
      ++r.equivariance_violations;

    for (const WideInt& q : t.q) entries.push_back({q, gi});
  }
  std::set<WideInt> tops;
  for (const auto& [set, val] : by_set)
    if (!tops.insert(val.first).second) ++r.injectivity_violations;

  r.values = entries.size();
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.value < b.value; });
  for (std::size_t a = 0; a < entries.size();) {
    std::size_t b = a;
    while (b < entries.size() && entries[b].value == entries[a].value) ++b;
    ++r.distinct_values;
    for (std::size_t x = a; x < b; ++x)
      for (std::size_t y = x + 1; y < b; ++y) {
        if (entries[x].input == entries[y].input) continue;
        ++r.collisions;
        if (canonical[entries[x].input] != canonical[entries[y].input])
          ++r.collisions_non_permutation;
      }
    a = b;
  }
  return r;
}

FunctionTable identity_table(const ShiftConfig& cfg) {
  FunctionTable t;
  const double delta = 1.0 / static_cast<double>(cfg.config().inv_delta);
  for (const auto& g : enumerate_grid_inputs(cfg)) {
    Matrix m(g.n, g.d);
    for (std::size_t i = 0; i < g.n; ++i)
      for (std::size_t j = 0; j < g.d; ++j) m(i, j) = g.at(i, j).to_double() * delta;
    t.emplace(g, std::move(m));
  }
  return t;
}

FunctionTable constant_table(const ShiftConfig& cfg, double value) {
  FunctionTable t;
  for (const auto& g : enumerate_grid_inputs(cfg)) t.emplace(g, Matrix(g.n, g.d, value));
  return t;
}

FunctionTable random_table(const ShiftConfig& cfg, std::uint64_t seed) {
  FunctionTable t;
  Rng rng(seed);
  for (const auto& g : enumerate_grid_inputs(cfg)) {
    Matrix m(g.n, g.d);
    for (double& v : m.values()) v = rng.uniform();
    t.emplace(g, std::move(m));
  }
  return t;
}

FunctionTable equivariant_random_table(const ShiftConfig& cfg, std::uint64_t seed) {
  FunctionTable t;
  Rng rng(seed);
  // Outputs are drawn per row set, keyed by row id, then placed per token.
  std::map<std::vector<WideInt>, std::map<WideInt, std::vector<double>>> drawn;
  for (const auto& g : enumerate_grid_inputs(cfg)) {
    const auto ids = g.row_ids(cfg);
    auto& per_id = drawn[sorted_copy(ids)];
    if (per_id.empty())
      for (const WideInt& id : sorted_copy(ids)) {
        std::vector<double> row(g.d);
        for (double& v : row) v = rng.uniform();
        per_id.emplace(id, std::move(row));
      }
    Matrix m(g.n, g.d);
    for (std::size_t i = 0; i < g.n; ++i)
      for (std::size_t j = 0; j < g.d; ++j) m(i, j) = per_id.at(ids[i])[j];
    t.emplace(g, std::move(m));
  }
  return t;
}

namespace {

// Builds q ↦ output row, counting contextual values claimed by two outputs.
std::size_t build_lookup(const FunctionTable& table, const ShiftConfig& cfg,
                         std::map<WideInt, std::vector<double>>& lookup) {
  std::set<WideInt> conflicted;
  for (const auto& g : enumerate_grid_inputs(cfg)) {
    const auto it = table.find(g);
    if (it == table.end()) throw std::invalid_argument("function table misses a grid input");
    const Matrix& out = it->second;
    if (out.rows() != g.n || out.cols() != g.d)
      throw std::invalid_argument("function table output has the wrong shape");
    const ContextualTrace t = contextual_id(g, cfg);
    for (std::size_t i = 0; i < g.n; ++i) {
      std::vector<double> row(out.row(i).begin(), out.row(i).end());
      const auto [pos, inserted] = lookup.try_emplace(t.q[i], row);
      if (!inserted && pos->second != row) conflicted.insert(t.q[i]);
    }
  }
  return conflicted.size();
}

}  // namespace

std::size_t table_conflicts(const FunctionTable& table, const ShiftConfig& cfg) {
  std::map<WideInt, std::vector<double>> lookup;
  return build_lookup(table, cfg, lookup);
}

ApproximatedFunction::ApproximatedFunction(const FunctionTable& table, const ShiftConfig& cfg)
    : cfg_(cfg) {
  if (cfg.n() <= 2) throw std::invalid_argument("contextual mapping needs n > 2 tokens");
  const std::size_t conflicts = build_lookup(table, cfg_, lookup_);
  if (conflicts > 0)
    throw ContextualMappingViolation(
        std::to_string(conflicts) +
        " contextual values would need two different outputs; the table is not "
        "expressible by a token-wise value map on these contextual ids");
}

Matrix ApproximatedFunction::on_grid(const GridSequence& g) const {
  const ContextualTrace t = contextual_id(g, cfg_);
  Matrix out(g.n, g.d);
  for (std::size_t i = 0; i < g.n; ++i) {
    const auto it = lookup_.find(t.q[i]);
    if (it == lookup_.end())
      throw ContextualMappingViolation("contextual id " + t.q[i].to_string() +
                                       " is missing from the value map");
    std::copy(it->second.begin(), it->second.end(), out.row(i).begin());
  }
  return out;
}

Matrix ApproximatedFunction::operator()(const std::vector<Rational>& x) const {
  if (x.size() != cfg_.n() * cfg_.d())
    throw std::invalid_argument("input must hold n*d rationals");
  GridSequence g{cfg_.n(), cfg_.d(), std::vector<WideInt>(x.size())};
  for (std::size_t k = 0; k < x.size(); ++k) {
    g.values[k] = quantize(x[k], cfg_);
    if (g.values[k] == cfg_.sentinel())
      throw std::domain_error("input entry " + std::to_string(k) + " lies outside [0, 1)");
  }
  return on_grid(g);
}

}  // namespace sparsemask
