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

#include <limits>
#include <set>

#include "doctest.h"
#include "sparsemask/approx.hpp"

using namespace sparsemask;

namespace {

ShiftConfig shift(std::size_t n, std::size_t d, std::int64_t k) { return ShiftConfig({n, d, k}); }

GridSequence column(std::initializer_list<std::int64_t> ids) {
  GridSequence g;
  g.n = ids.size();
  g.d = 1;
  for (std::int64_t v : ids) g.values.emplace_back(v);
  return g;
}

std::vector<std::int64_t> as_int(const std::vector<WideInt>& v) {
  std::vector<std::int64_t> out;
  for (const WideInt& w : v) out.push_back(w.to_int64());
  return out;
}

}  // namespace

TEST_SUITE("approx") {

TEST_CASE("wide integers throw instead of wrapping") {
  const WideInt top = WideInt::from_raw(std::numeric_limits<int128_t>::max());
  CHECK_THROWS_AS(top + 1, ExactOverflow);
  CHECK_THROWS_AS(top * 2, ExactOverflow);
  CHECK_THROWS_AS(-top - 2, ExactOverflow);
  CHECK_THROWS_AS(ipow(2, 127), ExactOverflow);
  CHECK(ipow(2, 126).raw() == static_cast<int128_t>(1) << 126);
  CHECK_THROWS_AS(ipow(2, 63).to_int64(), ExactOverflow);
  CHECK(WideInt(-7).floor_div(2) == WideInt(-4));
  CHECK(WideInt(-7).mod(2) == WideInt(1));
  CHECK(ipow(10, 30).to_string() == "1000000000000000000000000000000");
  CHECK(WideInt(-42).to_string() == "-42");
}

TEST_CASE("shift configuration constants") {
  const ShiftConfig c = shift(3, 2, 4);
  CHECK(as_int(c.u()) == std::vector<std::int64_t>{1, 4});
  CHECK(c.k_pow_d() == WideInt(16));
  CHECK(c.delta_h_over_delta() == WideInt(15 * (4096 + 16 + 1)));
  CHECK(c.sentinel() == WideInt(-16384));
  CHECK_THROWS_AS(shift(1, 1, 4), std::invalid_argument);
  CHECK_THROWS_AS(shift(3, 0, 4), std::invalid_argument);
  CHECK_THROWS_AS(shift(3, 1, 1), std::invalid_argument);
}

TEST_CASE("quantize at a quarter step") {
  const ShiftConfig c = shift(3, 1, 4);
  CHECK(quantize({3, 10}, c) == WideInt(1));
  CHECK(quantize({1, 2}, c) == WideInt(2));
  CHECK(quantize({0, 1}, c) == WideInt(0));
  CHECK(quantize({99, 100}, c) == WideInt(3));
  // −δ^{−nd} = −64 in unscaled units.
  CHECK(quantize({-1, 10}, c) == WideInt(-64 * 4));
  CHECK(quantize({1, 1}, c) == c.sentinel());
  CHECK_THROWS_AS(quantize({1, 0}, c), std::invalid_argument);
}

TEST_CASE("psi reads only the other tokens") {
  const ShiftConfig c = shift(3, 1, 10);
  const GridSequence z = column({1, 3, 6});
  const PsiResult r = psi_head(z, Threshold::at(2), c);
  CHECK(as_int(r.value) == std::vector<std::int64_t>{3, 6, 3});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r.reads[i].size() == 2);
    CHECK(std::find(r.reads[i].begin(), r.reads[i].end(), i) == r.reads[i].end());
  }
  const PsiResult low = psi_head(z, Threshold::half_below(0), c);
  CHECK(as_int(low.value) == std::vector<std::int64_t>{6, 6, 3});
  CHECK_THROWS_AS(psi_head(z, Threshold::at(3), c), ThresholdHit);
  const GridSequence one = column({5});
  CHECK_THROWS_AS(psi_head(one, Threshold::at(2), shift(2, 1, 10)), std::invalid_argument);
}

TEST_CASE("psi through a hardmax attention matrix agrees") {
  const ShiftConfig c = shift(3, 1, 10);
  const GridSequence z = column({1, 3, 6});
  for (const Threshold b : {Threshold::at(2), Threshold::half_above(3), Threshold::at(9)}) {
    const PsiResult exact = psi_head(z, b, c);
    const std::vector<double> soft = psi_head_hardmax(z, b, c);
    for (std::size_t i = 0; i < 3; ++i) CHECK(soft[i] == exact.value[i].to_double());
  }
}

TEST_CASE("multi-dimensional rows shift only the first coordinate") {
  const ShiftConfig c = shift(3, 2, 4);
  GridSequence z{3, 2, {1, 0, 2, 1, 3, 3}};
  const GridSequence out = selective_shift(z, Threshold::half_below(1), Threshold::half_above(1), c);
  for (std::size_t i = 0; i < 3; ++i) CHECK(out.at(i, 1) == z.at(i, 1));
  // Token 0 has id 1; the others have ids 6 and 15.
  CHECK(out.at(0, 0) == WideInt(1 + 16 * (15 - 6)));
  CHECK(out.at(1, 0) == z.at(1, 0));
}

TEST_CASE("selective shift phases at a tenth step") {
  const ShiftConfig c = shift(3, 1, 10);
  GridSequence z = column({1, 3, 6});
  CHECK(selective_shift(z, Threshold::half_below(4), Threshold::half_above(4), c) == z);
  z = selective_shift(z, Threshold::half_below(1), Threshold::half_above(1), c);
  CHECK(as_int(z.values) == std::vector<std::int64_t>{31, 3, 6});
  z = selective_shift(z, Threshold::half_below(3), Threshold::half_above(3), c);
  CHECK(as_int(z.values) == std::vector<std::int64_t>{31, 253, 6});
  z = selective_shift(z, Threshold::half_below(6), Threshold::half_above(6), c);
  CHECK(as_int(z.values) == std::vector<std::int64_t>{31, 253, 2226});
  const ContextualTrace t = contextual_id(column({1, 3, 6}), c);
  CHECK(as_int(t.l_tilde) == std::vector<std::int64_t>{31, 253, 2226});
  CHECK(t.phases.size() == 3);
  CHECK(t.layers_run == 12);
}

TEST_CASE("contextual ids for a small input") {
  const ShiftConfig c = shift(3, 1, 4);
  const ContextualTrace t = contextual_id(column({0, 1, 2}), c, true);
  const std::set<WideInt> distinct(t.q.begin(), t.q.end());
  CHECK(distinct.size() == 3);
  CHECK(t.l_tilde.back() < c.delta_h_over_delta());
  CHECK(t.hardmax_checks > 0);
  // Ordering after phase p: untouched ids below every shifted one.
  for (std::size_t p = 0; p < t.phases.size(); ++p) {
    const auto& ids = t.phases[p].ids;
    for (std::size_t a = p + 1; a < 3; ++a)
      for (std::size_t b = 0; b <= p; ++b) CHECK(ids[a] < ids[b]);
  }
}

TEST_CASE("contextual ids reject degenerate inputs") {
  CHECK_THROWS_AS(contextual_id(column({0, 1}), shift(2, 1, 4)), std::invalid_argument);
  CHECK_THROWS_AS(verify_contextual_mapping({2, 1, 4}), std::invalid_argument);
  CHECK_THROWS_AS(contextual_id(column({0, 1, 1}), shift(3, 1, 4)), std::domain_error);
  CHECK_THROWS_AS(contextual_id(column({0, 1, 4}), shift(3, 1, 4)), std::domain_error);
}

TEST_CASE("exhaustive verification at a quarter step") {
  const VerifyReport r = verify_contextual_mapping({3, 1, 4}, true);
  CHECK(r.inputs == 24);
  CHECK(r.values == 72);
  CHECK(r.distinct_values == 12);
  // Every collision pairs two row permutations of one input.
  CHECK(r.collisions == 180);
  CHECK(r.collisions_non_permutation == 0);
  CHECK(r.within_input_violations == 0);
  CHECK(r.residue_violations == 0);
  CHECK(r.interval_violations == 0);
  CHECK(r.bound_violations == 0);
  CHECK(r.ordering_violations == 0);
  CHECK(r.margin_violations == 0);
  CHECK(r.injectivity_violations == 0);
  CHECK(r.equivariance_violations == 0);
  CHECK(r.single_window_violations == 0);
  CHECK(r.min_margin == WideInt(1));
  CHECK(r.structural_ok());
  CHECK_FALSE(r.definition_ok());
}

TEST_CASE("exhaustive verification at a fifth step and in two dimensions") {
  const VerifyReport five = verify_contextual_mapping({3, 1, 5});
  CHECK(five.inputs == 60);
  CHECK(five.values == 180);
  CHECK(five.distinct_values == 30);
  CHECK(five.collisions == 450);
  CHECK(five.structural_ok());
  const VerifyReport two = verify_contextual_mapping({3, 2, 2});
  CHECK(two.inputs == 24);
  CHECK(two.distinct_values == 12);
  CHECK(two.structural_ok());
  CHECK_THROWS_AS(verify_contextual_mapping({4, 2, 10}), std::invalid_argument);
}

TEST_CASE("grid enumeration") {
  const auto inputs = enumerate_grid_inputs(shift(3, 1, 4));
  CHECK(inputs.size() == 24);
  CHECK(std::set<GridSequence>(inputs.begin(), inputs.end()).size() == 24);
  for (const auto& g : inputs) CHECK(g.rows_distinct());
}

TEST_CASE("symmetric tables are reproduced exactly") {
  const ShiftConfig c = shift(3, 1, 4);
  for (const FunctionTable& table : {identity_table(c), constant_table(c, 0.75),
                                     equivariant_random_table(c, 3)}) {
    CHECK(table.size() == 24);
    CHECK(table_conflicts(table, c) == 0);
    const ApproximatedFunction g(table, c);
    for (const auto& [grid, out] : table) CHECK(g.on_grid(grid) == out);
  }
}

TEST_CASE("the identity table through rational inputs") {
  const ShiftConfig c = shift(3, 1, 4);
  const ApproximatedFunction g(identity_table(c), c);
  const Matrix out = g({{1, 10}, {3, 10}, {7, 10}});
  CHECK(out == Matrix{{0.0}, {0.25}, {0.5}});
  CHECK_THROWS_AS(g({{1, 10}, {3, 10}, {11, 10}}), std::domain_error);
  CHECK_THROWS_AS(g({{1, 10}, {3, 10}}), std::invalid_argument);
}

TEST_CASE("random tables need one id per ordered input") {
  // Permutations of one input share their contextual ids, so an arbitrary
  // table asks a single id for several outputs.
  const ShiftConfig c = shift(3, 1, 4);
  const FunctionTable t = random_table(c, 1);
  CHECK(table_conflicts(t, c) == 12);
  CHECK_THROWS_AS(ApproximatedFunction(t, c), ContextualMappingViolation);
  FunctionTable partial = identity_table(c);
  partial.erase(partial.begin());
  CHECK_THROWS_AS(ApproximatedFunction(partial, c), std::invalid_argument);
}

}  // TEST_SUITE
