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

// Synthetic token corpora for masked-language-model training, and the
// batching rule that hides a fraction of each sequence behind [MASK].

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "sparsemask/model.hpp"
#include "sparsemask/numerics.hpp"

namespace sparsemask {

inline constexpr int kPadId = 0;
inline constexpr int kClsId = 1;
inline constexpr int kSepId = 2;
inline constexpr int kMaskId = 3;
inline constexpr int kFirstWordId = 4;

enum class Generator {
  markov2,     // order-2 Markov chain over word ids
  copy_noise,  // second half repeats the first half with substitutions
};

std::string_view to_string(Generator g);
Generator parse_generator(std::string_view name);

struct CorpusConfig {
  std::size_t vocab = 64;
  std::size_t n = 16;
  Generator generator = Generator::markov2;
  std::size_t train_size = 4096;
  std::size_t heldout_size = 256;
  /// Candidate successors per previous word (markov2).
  std::size_t branching = 4;
  /// Substitution probability per copied token (copy_noise).
  double noise = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

using Sequence = std::vector<int>;

struct Corpus {
  std::vector<Sequence> train;
  std::vector<Sequence> heldout;  // no sequence also occurs in train
};

/// Deterministic per config; every sequence is [CLS] w ... w [SEP].
Corpus make_corpus(const CorpusConfig& config);

/// Hides k = max(1, floor(mask_fraction · m)) of the m word positions of each
/// sequence behind [MASK]; special tokens are never chosen.
MlmBatch mlm_batch(const std::vector<const Sequence*>& sequences, double mask_fraction, Rng& rng);

/// batch_size sequences drawn with replacement from `pool`, then masked.
MlmBatch sample_mlm_batch(const std::vector<Sequence>& pool, std::size_t batch_size,
                          double mask_fraction, Rng& rng);

/// Every sequence of `pool` once, masked with a fixed seed so that repeated
/// evaluations score the same positions.
MlmBatch evaluation_batch(const std::vector<Sequence>& pool, double mask_fraction,
                          std::uint64_t seed);

}  // namespace sparsemask
