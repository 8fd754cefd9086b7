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
#include "sparsemask/dam.hpp"

using namespace sparsemask;

namespace {

TrainConfig tiny_train(std::uint64_t seed) {
  TrainConfig tc;
  tc.model.n = 8;
  tc.model.d = 16;
  tc.model.d_ff = 24;
  tc.model.vocab = 32;
  tc.corpus.n = 8;
  tc.corpus.vocab = 32;
  tc.corpus.train_size = 256;
  tc.corpus.heldout_size = 32;
  tc.corpus.seed = seed;
  tc.batch_size = 4;
  tc.seed = seed;
  return tc;
}

bool toeplitz_with_border(const AttentionMask& m) {
  const std::size_t n = m.n();
  for (std::size_t k = 0; k < n; ++k)
    if (!m.get(0, k) || !m.get(k, 0) || !m.get(n - 1, k) || !m.get(k, n - 1)) return false;
  for (std::size_t i = 1; i + 2 < n; ++i)
    for (std::size_t j = 1; j + 2 < n; ++j)
      if (m.get(i, j) != m.get(i + 1, j + 1)) return false;
  return true;
}

bool toeplitz_with_border(const Matrix& m) {
  const std::size_t n = m.rows();
  for (std::size_t k = 0; k < n; ++k)
    if (m(0, k) != 1.0 || m(k, 0) != 1.0 || m(n - 1, k) != 1.0 || m(k, n - 1) != 1.0) return false;
  for (std::size_t i = 1; i + 2 < n; ++i)
    for (std::size_t j = 1; j + 2 < n; ++j)
      if (m(i, j) != m(i + 1, j + 1)) return false;
  return true;
}

bool symmetric(const Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (m(i, j) != m(j, i)) return false;
  return true;
}

}  // namespace

TEST_SUITE("dam") {

TEST_CASE("layout parameter counts") {
  CHECK(MaskLayout(DamVariant::structured, 16, false).parameter_count() == 14);
  CHECK(MaskLayout(DamVariant::structured, 16, true).parameter_count() == 15);
  CHECK(MaskLayout(DamVariant::unstructured, 16, false).parameter_count() == 16 * 17 / 2);
  const MaskLayout s(DamVariant::structured, 16, false);
  CHECK(s.index(0, 7) == MaskLayout::kForcedOn);
  CHECK(s.index(15, 3) == MaskLayout::kForcedOn);
  CHECK(s.index(5, 5) == MaskLayout::kForcedOff);
  CHECK(s.index(3, 7) == s.index(8, 4));
  const MaskLayout u(DamVariant::unstructured, 5, false);
  CHECK(u.index(1, 3) == u.index(3, 1));
  CHECK(u.index(1, 3) != u.index(1, 2));
  CHECK_THROWS_AS(parse_dam_variant("dense"), std::invalid_argument);
}

TEST_CASE("gumbel-sigmoid fixed points") {
  DamConfig dc;
  dc.alpha_init = 0.0;
  DamState s = DamState::create(dc, 4, 1);
  // Equal uniforms give G1 == G2, so the noise cancels.
  const double g = gumbel_from_uniform(0.5);
  DamNoise equal = zero_noise(s);
  for (double& v : equal[0]) v = g - g;
  const HeadMasks half = soft_mask(s, equal);
  for (double v : half[0].values()) CHECK(v == 0.5);
  for (double& a : s.alpha[0]) a = 1.0;
  const HeadMasks one = soft_mask(s, equal);
  for (double v : one[0].values()) CHECK(std::abs(v - 0.7310585786300049) < 1e-15);
}

TEST_CASE("low temperature pushes samples to the corners") {
  DamConfig dc;
  dc.tau = 0.01;
  DamState s = DamState::create(dc, 6, 2);
  Rng rng(3);
  for (auto& a : s.alpha)
    for (double& v : a) v = rng.uniform(-2, 2);
  for (int t = 0; t < 50; ++t) {
    const DamNoise noise = sample_noise(s, rng);
    const HeadMasks m = soft_mask(s, noise);
    for (std::size_t h = 0; h < 2; ++h)
      for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) {
          const auto k = static_cast<std::size_t>(s.layout.index(i, j));
          if (std::abs(s.alpha[h][k] + noise[h][k]) > 0.1)
            CHECK(std::min(m[h](i, j), 1.0 - m[h](i, j)) < 1e-4);
        }
  }
}

TEST_CASE("sampled masks keep the layout symmetry at every draw") {
  Rng rng(4);
  for (DamVariant v : {DamVariant::unstructured, DamVariant::structured}) {
    DamConfig dc;
    dc.variant = v;
    DamState s = DamState::create(dc, 10, 2);
    for (auto& a : s.alpha)
      for (double& x : a) x = rng.uniform(-3, 3);
    for (int t = 0; t < 30; ++t)
      for (const Matrix& m : sample_soft_mask(s, rng).masks) {
        CHECK(symmetric(m));
        if (v == DamVariant::structured) CHECK(toeplitz_with_border(m));
      }
  }
}

TEST_CASE("L1 term and lambda zero") {
  const TrainConfig tc = tiny_train(1);
  Rng rng(5);
  const ModelParams p = ModelParams::init(tc.model, rng, 0.2);
  const Corpus corpus = make_corpus(tc.corpus);
  const MlmBatch batch = training_batch(tc, corpus, 0);
  DamConfig dc;
  dc.lambda = 0.0;
  DamState s = DamState::create(dc, tc.model.n, tc.model.heads);
  const DamNoise noise = sample_noise(s, rng);
  const DamLossResult r = dam_loss(batch, p, s, noise);
  CHECK(r.loss == r.mlm);
  CHECK(std::abs(r.mlm - mlm_loss(batch, p, soft_mask(s, noise))) < 1e-12);

  DamConfig ones;
  ones.alpha_init = 50.0;
  ones.lambda = 0.1;
  ones.learn_diagonal = true;
  ones.variant = DamVariant::unstructured;
  TransformerConfig one_head;
  one_head.heads = 1;
  one_head.d = 16;
  one_head.vocab = 32;
  Rng r2(6);
  const ModelParams p1 = ModelParams::init(one_head, r2, 0.2);
  MlmBatch b1(1);
  for (std::size_t i = 0; i < 16; ++i) b1[0].inputs.push_back(4 + static_cast<int>(i));
  b1[0].positions = {3};
  b1[0].targets = {9};
  const DamState full = DamState::create(ones, 16, 1);
  const DamLossResult rf = dam_loss(b1, p1, full, zero_noise(full));
  CHECK(rf.l1 == 256.0);
  CHECK(std::abs((rf.loss - rf.mlm) - 25.6) < 1e-12);
}

TEST_CASE("L1 gradient in isolation") {
  DamConfig dc;
  dc.lambda = 0.3;
  dc.tau = 0.7;
  for (DamVariant v : {DamVariant::unstructured, DamVariant::structured}) {
    dc.variant = v;
    DamState s = DamState::create(dc, 7, 2);
    Rng rng(7);
    for (auto& a : s.alpha)
      for (double& x : a) x = rng.uniform(-2, 2);
    const DamNoise noise = sample_noise(s, rng);
    const auto g = l1_gradient(s, noise);
    std::vector<double> cells(s.layout.parameter_count(), 0.0);
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t j = 0; j < 7; ++j)
        if (s.layout.index(i, j) >= 0) cells[static_cast<std::size_t>(s.layout.index(i, j))] += 1.0;
    for (std::size_t h = 0; h < 2; ++h)
      for (std::size_t k = 0; k < cells.size(); ++k) {
        const double m = sigmoid((s.alpha[h][k] + noise[h][k]) / dc.tau);
        const double expected = dc.lambda * m * (1.0 - m) / dc.tau * cells[k];
        CHECK(std::abs(g[h][k] - expected) < 1e-15);
      }
  }
}

TEST_CASE("logit gradients match central differences with frozen noise") {
  const TrainConfig tc = tiny_train(2);
  Rng rng(8);
  const ModelParams p = ModelParams::init(tc.model, rng, 0.3);
  const Corpus corpus = make_corpus(tc.corpus);
  const MlmBatch batch = training_batch(tc, corpus, 0);
  for (DamVariant v : {DamVariant::unstructured, DamVariant::structured}) {
    DamConfig dc;
    dc.variant = v;
    dc.lambda = 1e-2;
    DamState s = DamState::create(dc, tc.model.n, tc.model.heads);
    for (auto& a : s.alpha)
      for (double& x : a) x = rng.uniform(7, 11);
    const DamNoise noise = sample_noise(s, rng);
    const DamLossResult r = dam_loss(batch, p, s, noise);
    const std::size_t per = s.layout.parameter_count();
    std::vector<double> point, grad;
    for (std::size_t h = 0; h < s.heads(); ++h) {
      point.insert(point.end(), s.alpha[h].begin(), s.alpha[h].end());
      grad.insert(grad.end(), r.grad_alpha[h].begin(), r.grad_alpha[h].end());
    }
    const auto f = [&](std::span<const double> x) {
      DamState q = s;
      for (std::size_t h = 0; h < q.heads(); ++h)
        std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(h * per), per, q.alpha[h].begin());
      return dam_loss(batch, p, q, noise).loss;
    };
    CHECK(gradcheck(f, point, grad, 1e-5).max_rel_error < 1e-4);
  }
}

TEST_CASE("binarization is deterministic and idempotent") {
  DamConfig dc;
  DamState s = DamState::create(dc, 9, 2);
  Rng rng(9);
  for (auto& a : s.alpha)
    for (double& x : a) x = rng.uniform(-1, 1);
  const auto m = binarize(s);
  CHECK(m == binarize(s));
  DamState again = s;
  for (std::size_t h = 0; h < 2; ++h)
    for (std::size_t k = 0; k < s.alpha[h].size(); ++k)
      again.alpha[h][k] = s.alpha[h][k] >= 0.0 ? 30.0 : -30.0;
  CHECK(binarize(again) == m);
}

TEST_CASE("larger lambda does not give a denser mask") {
  TrainConfig tc;
  tc.steps = 200;
  tc.seed = 3;
  tc.corpus.seed = 3;
  tc.corpus.train_size = 1024;
  const Corpus corpus = make_corpus(tc.corpus);
  DamConfig lo;
  lo.lambda = 0.0;
  DamConfig hi;
  hi.lambda = 0.1;
  const DamResult a = run_dam(tc, lo, corpus);
  const DamResult b = run_dam(tc, hi, corpus);
  CHECK(mean_sparsity(a.masks) <= mean_sparsity(b.masks));
  CHECK(a.log.size() == 200);
}

TEST_CASE("DAM runs are reproducible and resume exactly") {
  TrainConfig tc = tiny_train(4);
  tc.steps = 12;
  DamConfig dc;
  dc.lambda = 0.05;
  const Corpus corpus = make_corpus(tc.corpus);
  DamTrainer a(tc, dc, corpus);
  DamTrainer b(tc, dc, corpus);
  for (int i = 0; i < 6; ++i) {
    a.step();
    b.step();
  }
  DamTrainer c(tc, dc, corpus);
  c.restore(checkpoint_from_json(checkpoint_to_json(a.checkpoint())));
  for (int i = 0; i < 6; ++i) {
    a.step();
    b.step();
    c.step();
  }
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(a.log()[i].total_loss == b.log()[i].total_loss);
    CHECK(a.log()[i].binarized_sparsity == b.log()[i].binarized_sparsity);
  }
  for (std::size_t i = 0; i < 6; ++i) CHECK(c.log()[i].total_loss == a.log()[6 + i].total_loss);
  CHECK(c.state().alpha == a.state().alpha);
  CHECK(c.params() == a.params());
}

TEST_CASE("structured output keeps the Toeplitz pattern and border") {
  TrainConfig tc;
  tc.steps = 150;
  tc.seed = 5;
  tc.corpus.seed = 5;
  tc.corpus.train_size = 1024;
  DamConfig dc;
  dc.variant = DamVariant::structured;
  dc.lambda = 0.05;
  const DamResult r = run_dam(tc, dc, make_corpus(tc.corpus));
  for (const auto& m : r.masks) {
    CHECK(toeplitz_with_border(m));
    CHECK(m.active_diagonal_count() == 2);  // the two border corners
  }
}

TEST_CASE("DAM config validation") {
  DamConfig dc;
  dc.tau = 0.0;
  CHECK_THROWS_AS(dc.validate(), std::invalid_argument);
  dc = DamConfig{};
  dc.lambda = -1.0;
  CHECK_THROWS_AS(dc.validate(), std::invalid_argument);
  CHECK_THROWS_AS(MaskLayout(DamVariant::structured, 2, false), std::invalid_argument);
}

}  // TEST_SUITE
