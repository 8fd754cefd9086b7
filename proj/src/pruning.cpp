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

#include "sparsemask/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sparsemask {

namespace {

void check_fraction(double f) {
  if (!(f >= 0.0 && f < 1.0))
    throw std::invalid_argument("drop fraction must lie in [0, 1), got " + std::to_string(f));
}

HeadMasks to_matrices(const std::vector<AttentionMask>& masks) {
  HeadMasks out;
  for (const auto& m : masks) out.push_back(m.to_matrix());
  return out;
}

}  // namespace

std::size_t pruned_count(std::size_t n, double drop_fraction) {
  check_fraction(drop_fraction);
  const double cells = static_cast<double>(n * n);
  // f·n² within 1e-9 below an integer counts as that integer (0.29 · 100 = 29).
  const auto k = static_cast<std::size_t>(std::floor(drop_fraction * cells + 1e-9));
  return std::min(k, n * n);
}

AttentionMask prune_by_scores(const Matrix& p, double drop_fraction) {
  if (p.rows() != p.cols() || p.empty()) throw std::invalid_argument("score matrix must be n x n");
  if (!p.all_finite()) throw std::invalid_argument("score matrix has non-finite entries");
  const std::size_t n = p.rows();
  const std::size_t k = pruned_count(n, drop_fraction);
  std::vector<std::size_t> order(n * n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto v = p.values();
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  AttentionMask m = AttentionMask::full(n);
  for (std::size_t i = 0; i < k; ++i) m.set(order[i] / n, order[i] % n, false);
  return m;
}

std::vector<AttentionMask> prune_by_scores(const HeadMasks& p, double drop_fraction) {
  std::vector<AttentionMask> out;
  for (const auto& h : p) out.push_back(prune_by_scores(h, drop_fraction));
  return out;
}

AttentionMask prune_random(std::size_t n, double drop_fraction, Rng& rng) {
  if (n == 0) throw std::invalid_argument("mask size n must be >= 1");
  return random_drop(AttentionMask::full(n), pruned_count(n, drop_fraction), rng);
}

void SweepConfig::validate() const {
  train.validate();
  if (fractions.empty()) throw std::invalid_argument("sweep needs at least one fraction");
  for (double f : fractions) check_fraction(f);
  if (!std::is_sorted(fractions.begin(), fractions.end()))
    throw std::invalid_argument("sweep fractions must be sorted ascending");
}

std::vector<SweepRow> sparsity_sweep(const HeadMasks& p, const ModelParams& start,
                                     const SweepConfig& config, const Corpus& corpus) {
  config.validate();
  const TrainConfig& tc = config.train;
  if (p.size() != tc.model.heads)
    throw std::invalid_argument("sweep needs one score matrix per head");
  const auto run = [&](const HeadMasks& masks) {
    WeightTrainer t(tc, corpus, masks, start);
    while (t.steps_done() < config.finetune_steps) t.step();
    return t.evaluate();
  };
  std::vector<SweepRow> rows;
  for (std::size_t fi = 0; fi < config.fractions.size(); ++fi) {
    const double f = config.fractions[fi];
    std::vector<AttentionMask> random;
    for (std::size_t h = 0; h < p.size(); ++h) {
      Rng rng = Rng::derive(tc.seed, kMaskStream, fi * 1024 + h);
      random.push_back(prune_random(tc.model.n, f, rng));
    }
    SweepRow row;
    row.fraction = f;
    row.sparsity = static_cast<double>(pruned_count(tc.model.n, f)) /
                   static_cast<double>(tc.model.n * tc.model.n);
    row.loss_scored = run(to_matrices(prune_by_scores(p, f)));
    row.loss_random = run(to_matrices(random));
    row.seed = tc.seed;
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, std::string_view header) {
  std::ostringstream os;
  if (!header.empty()) {
    std::istringstream lines{std::string(header)};
    for (std::string line; std::getline(lines, line);) os << "# " << line << '\n';
  }
  os << "fraction,sparsity,loss_scored,loss_random,seed\n";
  os.precision(10);
  for (const auto& r : rows)
    os << r.fraction << ',' << r.sparsity << ',' << r.loss_scored << ',' << r.loss_random << ','
       << r.seed << '\n';
  return os.str();
}

}  // namespace sparsemask
