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

// Two-stage masks: threshold a learned soft distribution P per head, or drop
// the same number of entries at random, and compare the two at a range of
// sparsities.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sparsemask/corpus.hpp"
#include "sparsemask/masks.hpp"
#include "sparsemask/model.hpp"
#include "sparsemask/trainer.hpp"

namespace sparsemask {

/// ⌊f · n²⌋, with f validated to lie in [0, 1).
std::size_t pruned_count(std::size_t n, double drop_fraction);

/// Zeroes the ⌊f·n²⌋ smallest entries of p; equal values fall in (row, col)
/// order, so the earlier cell is dropped first.
AttentionMask prune_by_scores(const Matrix& p, double drop_fraction);
std::vector<AttentionMask> prune_by_scores(const HeadMasks& p, double drop_fraction);

/// Zeroes ⌊f·n²⌋ cells chosen uniformly without replacement.
AttentionMask prune_random(std::size_t n, double drop_fraction, Rng& rng);

struct SweepConfig {
  TrainConfig train;
  /// Continued training under each pruned mask before evaluation; 0 only
  /// evaluates the starting weights.
  std::size_t finetune_steps = 400;
  std::vector<double> fractions;

  void validate() const;
};

struct SweepRow {
  double fraction = 0.0;
  double sparsity = 0.0;
  double loss_scored = 0.0;
  double loss_random = 0.0;
  std::uint64_t seed = 0;
};

/// For each fraction, fine-tunes `start` under the score-pruned and the
/// randomly pruned masks with identical batches and reports held-out loss.
std::vector<SweepRow> sparsity_sweep(const HeadMasks& p, const ModelParams& start,
                                     const SweepConfig& config, const Corpus& corpus);

/// "fraction,sparsity,loss_scored,loss_random,seed" rows after `# ` header
/// lines.
std::string sweep_csv(const std::vector<SweepRow>& rows, std::string_view header = {});

}  // namespace sparsemask
