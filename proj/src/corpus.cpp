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

#include "sparsemask/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace sparsemask {

namespace {

enum Stream : std::uint64_t { kGrammarStream = 1, kTrainStream = 2, kHeldoutStream = 3 };

// Fixed successor structure of the order-2 chain: the previous word picks a
// candidate list, and the word before it picks the weights over that list.
struct Grammar {
  std::size_t words = 0;
  std::size_t branching = 0;
  std::vector<std::vector<int>> candidates;  // [prev] -> branching word ids
  std::vector<std::vector<double>> cdf;      // [prev2 * words + prev] -> cumulative weights

  int next(int prev2, int prev, Rng& rng) const {
    const auto a = static_cast<std::size_t>(prev2 - kFirstWordId);
    const auto b = static_cast<std::size_t>(prev - kFirstWordId);
    const auto& c = cdf[a * words + b];
    const double u = rng.uniform();
    const auto k = static_cast<std::size_t>(std::upper_bound(c.begin(), c.end(), u) - c.begin());
    return candidates[b][std::min(k, branching - 1)];
  }
};

Grammar make_grammar(const CorpusConfig& cfg) {
  Rng rng = Rng::derive(cfg.seed, kGrammarStream, 0);
  Grammar g;
  g.words = cfg.vocab - kFirstWordId;
  g.branching = std::min(cfg.branching, g.words);
  g.candidates.resize(g.words);
  std::vector<int> ids(g.words);
  for (std::size_t i = 0; i < g.words; ++i) ids[i] = kFirstWordId + static_cast<int>(i);
  for (auto& cand : g.candidates) {
    for (std::size_t i = 0; i < g.branching; ++i)
      std::swap(ids[i], ids[i + rng.below(g.words - i)]);
    cand.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(g.branching));
  }
  g.cdf.resize(g.words * g.words);
  for (auto& c : g.cdf) {
    // Weights exp(3u): successor probabilities depend on both previous words.
    c.resize(g.branching);
    double total = 0.0;
    for (double& w : c) {
      w = std::exp(3.0 * rng.uniform());
      total += w;
    }
    double acc = 0.0;
    for (double& w : c) {
      acc += w / total;
      w = acc;
    }
    c.back() = 1.0;
  }
  return g;
}

int random_word(const CorpusConfig& cfg, Rng& rng) {
  return kFirstWordId + static_cast<int>(rng.below(cfg.vocab - kFirstWordId));
}

Sequence generate(const CorpusConfig& cfg, const Grammar& grammar, Rng& rng) {
  Sequence s(cfg.n, kPadId);
  s.front() = kClsId;
  s.back() = kSepId;
  const std::size_t m = cfg.n - 2;
  if (cfg.generator == Generator::markov2) {
    for (std::size_t i = 0; i < m; ++i) {
      int w;
      if (i < 2) {
        w = random_word(cfg, rng);
      } else {
        w = grammar.next(s[i - 1], s[i], rng);
      }
      s[i + 1] = w;
    }
  } else {
    const std::size_t half = (m + 1) / 2;
    for (std::size_t i = 0; i < half; ++i) s[i + 1] = random_word(cfg, rng);
    for (std::size_t i = half; i < m; ++i) {
      const int copied = s[i - half + 1];
      s[i + 1] = rng.uniform() < cfg.noise ? random_word(cfg, rng) : copied;
    }
  }
  return s;
}

}  // namespace

std::string_view to_string(Generator g) {
  return g == Generator::markov2 ? "markov2" : "copy-noise";
}

Generator parse_generator(std::string_view name) {
  if (name == "markov2") return Generator::markov2;
  if (name == "copy-noise") return Generator::copy_noise;
  throw std::invalid_argument("unknown generator '" + std::string(name) +
                              "' (expected markov2 or copy-noise)");
}

void CorpusConfig::validate() const {
  if (vocab <= static_cast<std::size_t>(kFirstWordId))
    throw std::invalid_argument("vocab must exceed the 4 reserved special ids");
  if (n < 4) throw std::invalid_argument("sequence length n must be >= 4");
  if (train_size == 0) throw std::invalid_argument("train_size must be >= 1");
  if (generator == Generator::markov2 && branching == 0)
    throw std::invalid_argument("branching must be >= 1");
  if (!(noise >= 0.0 && noise <= 1.0)) throw std::invalid_argument("noise must lie in [0, 1]");
}

Corpus make_corpus(const CorpusConfig& config) {
  config.validate();
  const Grammar grammar = make_grammar(config);
  Corpus c;
  Rng train_rng = Rng::derive(config.seed, kTrainStream, 0);
  c.train.reserve(config.train_size);
  std::set<Sequence> seen;
  for (std::size_t i = 0; i < config.train_size; ++i) {
    c.train.push_back(generate(config, grammar, train_rng));
    seen.insert(c.train.back());
  }
  Rng held_rng = Rng::derive(config.seed, kHeldoutStream, 0);
  const std::size_t max_attempts = 100 * (config.heldout_size + 1);
  for (std::size_t attempt = 0; c.heldout.size() < config.heldout_size; ++attempt) {
    if (attempt == max_attempts)
      throw std::runtime_error("could not draw enough held-out sequences disjoint from train");
    Sequence s = generate(config, grammar, held_rng);
    if (!seen.contains(s)) c.heldout.push_back(std::move(s));
  }
  return c;
}

MlmBatch mlm_batch(const std::vector<const Sequence*>& sequences, double mask_fraction, Rng& rng) {
  if (!(mask_fraction > 0.0 && mask_fraction < 1.0))
    throw std::invalid_argument("mask_fraction must lie in (0, 1)");
  MlmBatch batch;
  batch.reserve(sequences.size());
  std::vector<std::size_t> candidates;
  for (const Sequence* seq : sequences) {
    candidates.clear();
    for (std::size_t i = 0; i < seq->size(); ++i) {
      const int t = (*seq)[i];
      if (t != kClsId && t != kSepId && t != kPadId) candidates.push_back(i);
    }
    if (candidates.empty()) throw std::invalid_argument("sequence has no maskable positions");
    const auto k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(mask_fraction * static_cast<double>(candidates.size()))));
    for (std::size_t i = 0; i < k; ++i)
      std::swap(candidates[i], candidates[i + rng.below(candidates.size() - i)]);
    MlmExample ex;
    ex.inputs = *seq;
    ex.positions.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(ex.positions.begin(), ex.positions.end());
    for (std::size_t p : ex.positions) {
      ex.targets.push_back(ex.inputs[p]);
      ex.inputs[p] = kMaskId;
    }
    batch.push_back(std::move(ex));
  }
  return batch;
}

MlmBatch sample_mlm_batch(const std::vector<Sequence>& pool, std::size_t batch_size,
                          double mask_fraction, Rng& rng) {
  if (pool.empty()) throw std::invalid_argument("cannot sample a batch from an empty pool");
  std::vector<const Sequence*> picked(batch_size);
  for (auto& p : picked) p = &pool[rng.below(pool.size())];
  return mlm_batch(picked, mask_fraction, rng);
}

MlmBatch evaluation_batch(const std::vector<Sequence>& pool, double mask_fraction,
                          std::uint64_t seed) {
  std::vector<const Sequence*> all;
  all.reserve(pool.size());
  for (const auto& s : pool) all.push_back(&s);
  Rng rng(seed);
  return mlm_batch(all, mask_fraction, rng);
}

}  // namespace sparsemask
