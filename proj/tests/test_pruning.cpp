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

#include <cmath>

#include "doctest.h"
#include "sparsemask/pruning.hpp"

using namespace sparsemask;

namespace {

std::size_t active(const AttentionMask& m) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < m.n(); ++i)
    for (std::size_t j = 0; j < m.n(); ++j) count += m.get(i, j) ? 1 : 0;
  return count;
}

Matrix random_scores(std::size_t n, Rng& rng) {
  Matrix p(n, n);
  for (double& v : p.values()) v = rng.uniform();
  return p;
}

}  // namespace

TEST_SUITE("pruning") {

TEST_CASE("pruned count") {
  CHECK(pruned_count(16, 0.0) == 0);
  CHECK(pruned_count(16, 0.5) == 128);
  CHECK(pruned_count(10, 0.7) == 70);
  CHECK(pruned_count(3, 0.5) == 4);
  CHECK_THROWS_AS(pruned_count(4, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(pruned_count(4, -0.1), std::invalid_argument);
}

TEST_CASE("score pruning examples") {
  CHECK(prune_by_scores(Matrix{{0.9, 0.1}, {0.1, 0.9}}, 0.5) == AttentionMask::identity(2));
  Rng rng(1);
  CHECK(prune_by_scores(random_scores(8, rng), 0.0) == AttentionMask::full(8));
  // Ties drop the earlier cell first.
  const AttentionMask tied = prune_by_scores(Matrix{{0.5, 0.5}, {0.5, 0.5}}, 0.25);
  CHECK_FALSE(tied.get(0, 0));
  CHECK(tied.get(0, 1));
}

TEST_CASE("exact counts for both pruning modes") {
  Rng rng(2);
  for (std::size_t n : {2u, 5u, 16u, 33u})
    for (double f : {0.0, 0.1, 0.33, 0.5, 0.8, 0.9, 0.99}) {
      CAPTURE(n);
      CAPTURE(f);
      const std::size_t expect = n * n - static_cast<std::size_t>(std::floor(f * n * n + 1e-9));
      CHECK(active(prune_by_scores(random_scores(n, rng), f)) == expect);
      CHECK(active(prune_random(n, f, rng)) == expect);
    }
}

TEST_CASE("score pruning depends only on the order of the scores") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix p = random_scores(12, rng);
    Matrix q = p;
    for (double& v : q.values()) v = std::exp(3.0 * v) - 7.0;
    for (double f : {0.2, 0.5, 0.9}) CHECK(prune_by_scores(p, f) == prune_by_scores(q, f));
  }
}

TEST_CASE("random pruning is seeded") {
  Rng a(4);
  Rng b(4);
  CHECK(prune_random(20, 0.6, a) == prune_random(20, 0.6, b));
  Rng c(5);
  CHECK(prune_random(20, 0.0, c) == AttentionMask::full(20));
  CHECK_THROWS_AS(prune_random(20, 1.0, c), std::invalid_argument);
}

TEST_CASE("sweep at fraction zero gives identical arms") {
  TrainConfig tc;
  tc.model.n = 8;
  tc.model.d = 16;
  tc.model.vocab = 32;
  tc.corpus.n = 8;
  tc.corpus.vocab = 32;
  tc.corpus.train_size = 128;
  tc.corpus.heldout_size = 16;
  tc.batch_size = 4;
  const Corpus corpus = make_corpus(tc.corpus);
  Rng rng(6);
  const ModelParams start = ModelParams::init(tc.model, rng, 0.2);
  const HeadMasks p{random_scores(8, rng), random_scores(8, rng)};
  SweepConfig sc{tc, 20, {0.0}};
  const auto rows = sparsity_sweep(p, start, sc, corpus);
  REQUIRE(rows.size() == 1);
  CHECK(std::abs(rows[0].loss_scored - rows[0].loss_random) <= 1e-12);
  CHECK(rows[0].sparsity == 0.0);

  sc.fractions = {0.2, 0.5, 0.7};
  sc.finetune_steps = 0;
  const auto three = sparsity_sweep(p, start, sc, corpus);
  CHECK(three.size() == 3);
  const std::string csv = sweep_csv(three, "sparsemask prune");
  CHECK(csv.rfind("# sparsemask prune\nfraction,sparsity,loss_scored,loss_random,seed\n", 0) == 0);
  sc.fractions = {0.5, 0.2};
  CHECK_THROWS_AS(sparsity_sweep(p, start, sc, corpus), std::invalid_argument);
}

}  // TEST_SUITE
