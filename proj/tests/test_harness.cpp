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
#include <set>

#include "doctest.h"
#include "sparsemask/experiment.hpp"

using namespace sparsemask;

namespace {

RunConfig small_run(MaskSource source, std::uint64_t seed) {
  RunConfig rc;
  rc.train.model.n = 8;
  rc.train.model.d = 16;
  rc.train.model.d_ff = 24;
  rc.train.model.vocab = 32;
  rc.train.corpus.n = 8;
  rc.train.corpus.vocab = 32;
  rc.train.corpus.train_size = 256;
  rc.train.corpus.heldout_size = 32;
  rc.train.corpus.seed = seed;
  rc.train.batch_size = 4;
  rc.train.steps = 10;
  rc.train.seed = seed;
  rc.source = source;
  return rc;
}

// Held-out cross-entropy per word of add-one smoothed n-gram models, n = 1
// or 2, predicting each word from the one before it.
double ngram_loss(const Corpus& c, std::size_t vocab, int order) {
  std::vector<double> uni(vocab, 1.0);
  std::vector<std::vector<double>> bi(vocab, std::vector<double>(vocab, 1.0));
  for (const Sequence& s : c.train)
    for (std::size_t i = 1; i < s.size(); ++i) {
      uni[static_cast<std::size_t>(s[i])] += 1.0;
      bi[static_cast<std::size_t>(s[i - 1])][static_cast<std::size_t>(s[i])] += 1.0;
    }
  double uni_total = 0.0;
  for (double v : uni) uni_total += v;
  double loss = 0.0;
  std::size_t count = 0;
  for (const Sequence& s : c.heldout)
    for (std::size_t i = 1; i < s.size(); ++i) {
      const auto prev = static_cast<std::size_t>(s[i - 1]);
      const auto cur = static_cast<std::size_t>(s[i]);
      if (order == 1) {
        loss -= std::log(uni[cur] / uni_total);
      } else {
        double row = 0.0;
        for (double v : bi[prev]) row += v;
        loss -= std::log(bi[prev][cur] / row);
      }
      ++count;
    }
  return loss / static_cast<double>(count);
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("corpus shape, determinism and disjoint held-out set") {
  for (Generator g : {Generator::markov2, Generator::copy_noise}) {
    CorpusConfig cc;
    cc.generator = g;
    cc.train_size = 512;
    cc.heldout_size = 64;
    cc.seed = 9;
    const Corpus a = make_corpus(cc);
    const Corpus b = make_corpus(cc);
    CHECK(a.train == b.train);
    CHECK(a.heldout == b.heldout);
    CHECK(a.train.size() == 512);
    CHECK(a.heldout.size() == 64);
    const std::set<Sequence> train(a.train.begin(), a.train.end());
    for (const Sequence& s : a.heldout) CHECK(train.count(s) == 0);
    for (const auto* pool : {&a.train, &a.heldout})
      for (const Sequence& s : *pool) {
        REQUIRE(s.size() == cc.n);
        CHECK(s.front() == kClsId);
        CHECK(s.back() == kSepId);
        for (std::size_t i = 1; i + 1 < s.size(); ++i) {
          CHECK(s[i] >= kFirstWordId);
          CHECK(s[i] < static_cast<int>(cc.vocab));
        }
      }
  }
  CorpusConfig bad;
  bad.vocab = 4;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = CorpusConfig{};
  bad.n = 3;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("the markov corpus has structure a bigram model can use") {
  CorpusConfig cc;
  cc.seed = 2;
  const Corpus c = make_corpus(cc);
  const double unigram = ngram_loss(c, cc.vocab, 1);
  const double bigram = ngram_loss(c, cc.vocab, 2);
  CHECK(bigram < unigram - 0.5);
}

TEST_CASE("masking never selects special tokens") {
  CorpusConfig cc;
  cc.seed = 4;
  const Corpus c = make_corpus(cc);
  Rng rng(5);
  std::size_t predictions = 0;
  for (int b = 0; b < 10000; ++b) {
    const MlmBatch batch = sample_mlm_batch(c.train, 2, 0.15, rng);
    for (const MlmExample& ex : batch) {
      CHECK(ex.positions.size() == 2);  // ⌊0.15 · 14⌋
      for (std::size_t k = 0; k < ex.positions.size(); ++k) {
        const std::size_t p = ex.positions[k];
        if (p == 0 || p + 1 == cc.n || ex.targets[k] < kFirstWordId) FAIL("special token masked");
        CHECK(ex.inputs[p] == kMaskId);
        ++predictions;
      }
    }
  }
  CHECK(predictions == 40000);
}

TEST_CASE("a tiny mask fraction still predicts one token per sequence") {
  CorpusConfig cc;
  const Corpus c = make_corpus(cc);
  Rng a(6);
  Rng b(6);
  const MlmBatch x = sample_mlm_batch(c.train, 8, 1e-6, a);
  for (const MlmExample& ex : x) CHECK(ex.positions.size() == 1);
  const MlmBatch y = sample_mlm_batch(c.train, 8, 1e-6, b);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(x[i].inputs == y[i].inputs);
    CHECK(x[i].positions == y[i].positions);
  }
  std::vector<const Sequence*> one{&c.train[0]};
  CHECK_THROWS_AS(mlm_batch(one, 0.0, a), std::invalid_argument);
  CHECK_THROWS_AS(mlm_batch(one, 1.0, a), std::invalid_argument);
}

TEST_CASE("full-mask training learns beyond the uniform guess") {
  RunConfig rc;
  rc.train.steps = 500;
  rc.train.seed = 1;
  rc.train.corpus.seed = 1;
  const TrainRun r = train(rc, 50);
  CHECK(r.heldout_loss < std::log(64.0));
  CHECK(r.metrics().back().step == 500);
  CHECK(r.metrics().size() == 10);
}

TEST_CASE("runs are deterministic per config and seed") {
  for (MaskSource s : {MaskSource::full, MaskSource::no_diag, MaskSource::random_drop,
                       MaskSource::dam, MaskSource::two_stage}) {
    CAPTURE(to_string(s));
    RunConfig rc = small_run(s, 3);
    rc.finetune_steps = 5;
    const TrainRun a = train(rc);
    const TrainRun b = train(rc);
    REQUIRE(a.metrics().size() == b.metrics().size());
    for (std::size_t i = 0; i < a.metrics().size(); ++i) {
      CHECK(a.metrics()[i].total_loss == b.metrics()[i].total_loss);
      CHECK(a.metrics()[i].sparsity == b.metrics()[i].sparsity);
    }
    CHECK(a.heldout_loss == b.heldout_loss);
    CHECK(a.masks == b.masks);
  }
}

TEST_CASE("mask sources") {
  const auto no_diag = source_masks(small_run(MaskSource::no_diag, 1));
  REQUIRE(no_diag.size() == 2);
  for (const auto& m : no_diag) CHECK(m == drop_diagonal(AttentionMask::full(8)));
  const auto drop = source_masks(small_run(MaskSource::random_drop, 1));
  for (const auto& m : drop) CHECK(sparsity(m) == 8.0 / 64.0);
  CHECK(drop[0] != drop[1]);

  RunConfig fixed = small_run(MaskSource::fixed, 1);
  fixed.fixed_masks = {AttentionMask::identity(8)};
  CHECK(source_masks(fixed) == std::vector<AttentionMask>(2, AttentionMask::identity(8)));
  fixed.fixed_masks = {AttentionMask::identity(9)};
  CHECK_THROWS_AS(train(fixed), std::invalid_argument);
  fixed.fixed_masks.clear();
  CHECK_THROWS_AS(train(fixed), std::invalid_argument);
  CHECK_THROWS_AS(parse_mask_source("nodiag"), std::invalid_argument);
  CHECK(parse_mask_source("no-diag") == MaskSource::no_diag);
}

TEST_CASE("no-diag attention keeps an exactly zero diagonal while training") {
  RunConfig rc = small_run(MaskSource::no_diag, 2);
  const Corpus corpus = make_corpus(rc.train.corpus);
  HeadMasks masks;
  for (const auto& m : source_masks(rc)) masks.push_back(m.to_matrix());
  WeightTrainer t(rc.train, corpus, masks);
  for (int step = 0; step < 15; ++step) {
    for (const auto& block : attention_maps(corpus.train[0], t.params(), t.masks()))
      for (const Matrix& a : block)
        for (std::size_t i = 0; i < a.rows(); ++i) CHECK(a(i, i) == 0.0);
    t.step();
  }
}

TEST_CASE("weight training resumes exactly from a checkpoint") {
  RunConfig rc = small_run(MaskSource::full, 4);
  const Corpus corpus = make_corpus(rc.train.corpus);
  const HeadMasks masks = full_masks(rc.train.model);
  WeightTrainer a(rc.train, corpus, masks);
  for (int i = 0; i < 5; ++i) a.step();
  WeightTrainer b(rc.train, corpus, masks);
  b.restore(checkpoint_from_json(checkpoint_to_json(a.checkpoint())));
  CHECK(b.steps_done() == 5);
  for (int i = 0; i < 5; ++i) CHECK(a.step() == b.step());
  CHECK(a.params() == b.params());
  CHECK(a.evaluate() == b.evaluate());
}

TEST_CASE("run records") {
  RunConfig rc = small_run(MaskSource::two_stage, 5);
  rc.finetune_steps = 4;
  const TrainRun r = train(rc);
  CHECK(r.metrics().size() == 14);
  CHECK(r.metrics().front().phase == "dam");
  CHECK(r.metrics().back().phase == "finetune");
  CHECK(r.metrics().back().step == 14);
  CHECK(std::abs(mean_sparsity(r.masks) - 51.0 / 64.0) < 1e-12);
  CHECK(r.probabilities.size() == 2);
  const std::string csv = r.metrics_csv("a\nb");
  CHECK(csv.rfind("# a\n# b\nstep,phase,mlm_loss,l1_term,total_loss,sparsity\n", 0) == 0);
  const std::string json = r.to_json();
  for (const char* key : {"\"config\"", "\"seed\"", "\"heldout_loss\"", "\"wall_clock_seconds\"",
                          "\"mask_sparsity\"", "\"metrics\""})
    CHECK(json.find(key) != std::string::npos);
  TrainRun manual("{}", 1);
  manual.append({1, "train", 1.0, 0.0, 1.0, 0.0});
  CHECK(manual.metrics().size() == 1);
}

}  // TEST_SUITE
