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

#include "sparsemask/dam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sparsemask {

std::string_view to_string(DamVariant v) {
  return v == DamVariant::unstructured ? "unstructured" : "structured";
}

DamVariant parse_dam_variant(std::string_view name) {
  if (name == "unstructured" || name == "u") return DamVariant::unstructured;
  if (name == "structured" || name == "s") return DamVariant::structured;
  throw std::invalid_argument("unknown DAM variant '" + std::string(name) +
                              "' (expected unstructured or structured)");
}

MaskLayout::MaskLayout(DamVariant variant, std::size_t n, bool learn_diagonal)
    : variant_(variant), n_(n), learn_diagonal_(learn_diagonal), cells_(n * n, kForcedOff) {
  if (variant == DamVariant::unstructured) {
    if (n < 1) throw std::invalid_argument("mask layout needs n >= 1");
    std::int32_t k = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        cells_[i * n + j] = k;
        cells_[j * n + i] = k;
        ++k;
      }
    count_ = static_cast<std::size_t>(k);
    return;
  }
  if (n < 3) throw std::invalid_argument("structured mask layout needs n >= 3");
  // Offsets 1..n−2 own logits 0..n−3; the diagonal optionally owns logit n−2.
  count_ = n - 2 + (learn_diagonal ? 1 : 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      std::int32_t& c = cells_[i * n + j];
      if (i == 0 || j == 0 || i == n - 1 || j == n - 1) {
        c = kForcedOn;
      } else if (i == j) {
        c = learn_diagonal ? static_cast<std::int32_t>(n - 2) : kForcedOff;
      } else {
        c = static_cast<std::int32_t>((i > j ? i - j : j - i) - 1);
      }
    }
}

Matrix MaskLayout::expand(std::span<const double> per_param_values) const {
  if (per_param_values.size() != count_)
    throw std::invalid_argument("mask layout expects " + std::to_string(count_) + " values");
  Matrix m(n_, n_);
  auto out = m.values();
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const std::int32_t k = cells_[c];
    out[c] = k >= 0 ? per_param_values[static_cast<std::size_t>(k)] : (k == kForcedOn ? 1.0 : 0.0);
  }
  return m;
}

std::vector<double> MaskLayout::reduce(const Matrix& per_cell) const {
  if (per_cell.rows() != n_ || per_cell.cols() != n_)
    throw std::invalid_argument("mask layout reduce: shape mismatch");
  std::vector<double> out(count_, 0.0);
  const auto v = per_cell.values();
  for (std::size_t c = 0; c < cells_.size(); ++c)
    if (cells_[c] >= 0) out[static_cast<std::size_t>(cells_[c])] += v[c];
  return out;
}

void DamConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be >= 0");
  if (!(tau > 0.0) || !(tau_final > 0.0)) throw std::invalid_argument("temperature tau must be > 0");
  if (!std::isfinite(alpha_init)) throw std::invalid_argument("alpha_init must be finite");
  alpha_optimizer.validate();
}

DamState DamState::create(const DamConfig& config, std::size_t n, std::size_t heads) {
  config.validate();
  if (heads == 0) throw std::invalid_argument("DAM needs at least one head");
  DamState s;
  s.layout = MaskLayout(config.variant, n, config.learn_diagonal);
  s.alpha.assign(heads, std::vector<double>(s.layout.parameter_count(), config.alpha_init));
  s.tau = config.tau;
  s.lambda = config.lambda;
  return s;
}

HeadMasks DamState::probabilities() const {
  HeadMasks out;
  std::vector<double> p;
  for (const auto& a : alpha) {
    p.resize(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) p[k] = sigmoid(a[k]);
    out.push_back(layout.expand(p));
  }
  return out;
}

std::pair<double, double> DamState::diagonal_means() const {
  double diag = 0.0;
  double off = 0.0;
  std::size_t nd = 0;
  std::size_t no = 0;
  for (const auto& p : probabilities())
    for (std::size_t i = 0; i < p.rows(); ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) {
        if (i == j) {
          diag += p(i, j);
          ++nd;
        } else {
          off += p(i, j);
          ++no;
        }
      }
  return {nd ? diag / static_cast<double>(nd) : 0.0, no ? off / static_cast<double>(no) : 0.0};
}

DamNoise sample_noise(const DamState& state, Rng& rng) {
  DamNoise noise(state.heads());
  for (auto& g : noise) {
    g.resize(state.layout.parameter_count());
    for (double& v : g) {
      const double g1 = sample_gumbel(rng);
      const double g2 = sample_gumbel(rng);
      v = g1 - g2;
    }
  }
  return noise;
}

DamNoise zero_noise(const DamState& state) {
  return DamNoise(state.heads(), std::vector<double>(state.layout.parameter_count(), 0.0));
}

namespace {

void check_noise(const DamState& state, const DamNoise& noise) {
  if (noise.size() != state.heads())
    throw std::invalid_argument("noise record has the wrong head count");
  for (const auto& g : noise)
    if (g.size() != state.layout.parameter_count())
      throw std::invalid_argument("noise record has the wrong logit count");
}

std::vector<double> sampled_values(const std::vector<double>& alpha, const std::vector<double>& g,
                                   double tau) {
  std::vector<double> m(alpha.size());
  for (std::size_t k = 0; k < alpha.size(); ++k) m[k] = sigmoid((alpha[k] + g[k]) / tau);
  return m;
}

}  // namespace

HeadMasks soft_mask(const DamState& state, const DamNoise& noise) {
  check_noise(state, noise);
  if (!(state.tau > 0.0)) throw std::invalid_argument("temperature tau must be > 0");
  HeadMasks out;
  for (std::size_t h = 0; h < state.heads(); ++h)
    out.push_back(state.layout.expand(sampled_values(state.alpha[h], noise[h], state.tau)));
  return out;
}

SoftMaskSample sample_soft_mask(const DamState& state, Rng& rng) {
  SoftMaskSample s;
  s.noise = sample_noise(state, rng);
  s.masks = soft_mask(state, s.noise);
  return s;
}

std::vector<std::vector<double>> l1_gradient(const DamState& state, const DamNoise& noise) {
  check_noise(state, noise);
  const Matrix ones(state.layout.n(), state.layout.n(), 1.0);
  const std::vector<double> multiplicity = state.layout.reduce(ones);
  std::vector<std::vector<double>> grad(state.heads());
  for (std::size_t h = 0; h < state.heads(); ++h) {
    const auto m = sampled_values(state.alpha[h], noise[h], state.tau);
    grad[h].resize(m.size());
    for (std::size_t k = 0; k < m.size(); ++k)
      grad[h][k] = state.lambda * multiplicity[k] * m[k] * (1.0 - m[k]) / state.tau;
  }
  return grad;
}

DamLossResult dam_loss(const MlmBatch& batch, const ModelParams& params, const DamState& state,
                       const DamNoise& noise) {
  check_noise(state, noise);
  if (state.heads() != params.config.heads || state.layout.n() != params.config.n)
    throw std::invalid_argument("DAM state shape does not match the model config");
  const HeadMasks masks = soft_mask(state, noise);
  LossAndGrad lg = mlm_forward_loss(batch, params, masks);
  DamLossResult r;
  r.mlm = lg.loss;
  for (const auto& m : masks)
    for (double v : m.values()) r.l1 += v;
  r.loss = r.mlm + state.lambda * r.l1;
  r.grad_w = std::move(lg.grad);
  r.grad_alpha.resize(state.heads());
  for (std::size_t h = 0; h < state.heads(); ++h) {
    const auto m = sampled_values(state.alpha[h], noise[h], state.tau);
    // Each forced-free cell contributes ∂MLM/∂M + λ.
    Matrix dm = lg.mask_grad[h];
    for (double& v : dm.values()) v += state.lambda;
    auto g = state.layout.reduce(dm);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] *= m[k] * (1.0 - m[k]) / state.tau;
    r.grad_alpha[h] = std::move(g);
  }
  return r;
}

std::vector<AttentionMask> binarize(const DamState& state) {
  std::vector<AttentionMask> out;
  const std::size_t n = state.layout.n();
  for (const auto& a : state.alpha) {
    AttentionMask m(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const std::int32_t k = state.layout.index(i, j);
        const bool on = k >= 0 ? sigmoid(a[static_cast<std::size_t>(k)]) >= 0.5
                               : k == MaskLayout::kForcedOn;
        m.set(i, j, on);
      }
    out.push_back(std::move(m));
  }
  return out;
}

DamTrainer::DamTrainer(const TrainConfig& train, const DamConfig& dam, const Corpus& corpus)
    : train_(train), dam_(dam), corpus_(&corpus) {
  train_.validate();
  dam_.validate();
  Rng init = Rng::derive(train_.seed, kInitStream, 0);
  params_ = ModelParams::init(train_.model, init, train_.init_scale);
  state_ = DamState::create(dam_, train_.model.n, train_.model.heads);
  w_opt_ = Optimizer(train_.optimizer, params_.parameter_count());
  alpha_opt_ = Optimizer(dam_.alpha_optimizer, state_.heads() * state_.layout.parameter_count());
}

double DamTrainer::tau_at(std::uint64_t step) const {
  if (train_.steps <= 1) return dam_.tau;
  const double frac = static_cast<double>(step) / static_cast<double>(train_.steps - 1);
  return dam_.tau + (dam_.tau_final - dam_.tau) * std::min(frac, 1.0);
}

const DamLogRow& DamTrainer::step() {
  const MlmBatch batch = training_batch(train_, *corpus_, step_);
  state_.tau = tau_at(step_);
  DamNoise noise;
  if (dam_.gumbel_noise) {
    Rng rng = Rng::derive(train_.seed, kNoiseStream, step_);
    noise = sample_noise(state_, rng);
  } else {
    noise = zero_noise(state_);
  }
  const DamLossResult r = dam_loss(batch, params_, state_, noise);
  if (!std::isfinite(r.loss))
    throw std::runtime_error("DAM diverged: non-finite loss at step " + std::to_string(step_));

  std::vector<double> w = params_.flatten();
  w_opt_.step(w, r.grad_w.flatten());
  params_.unflatten(w);

  std::vector<double> a;
  std::vector<double> ga;
  for (std::size_t h = 0; h < state_.heads(); ++h) {
    a.insert(a.end(), state_.alpha[h].begin(), state_.alpha[h].end());
    ga.insert(ga.end(), r.grad_alpha[h].begin(), r.grad_alpha[h].end());
  }
  alpha_opt_.step(a, ga);
  const std::size_t per = state_.layout.parameter_count();
  for (std::size_t h = 0; h < state_.heads(); ++h)
    std::copy_n(a.begin() + static_cast<std::ptrdiff_t>(h * per), per, state_.alpha[h].begin());

  DamLogRow row;
  row.step = step_;
  row.mlm_loss = r.mlm;
  row.l1_term = state_.lambda * r.l1;
  row.total_loss = r.loss;
  row.binarized_sparsity = mean_sparsity(binarize(state_));
  ++step_;
  log_.push_back(row);
  return log_.back();
}

Checkpoint DamTrainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.params = params_;
  w_opt_.save(ckpt, "optimizer.weights");
  alpha_opt_.save(ckpt, "optimizer.alpha");
  for (std::size_t h = 0; h < state_.heads(); ++h)
    ckpt.arrays["dam.alpha.head" + std::to_string(h)] = state_.alpha[h];
  ckpt.counters["step"] = step_;
  ckpt.labels["trainer"] = "dam";
  ckpt.labels["dam.variant"] = std::string(to_string(state_.layout.variant()));
  return ckpt;
}

void DamTrainer::restore(const Checkpoint& ckpt) {
  if (!(ckpt.params.config == train_.model))
    throw CheckpointError("checkpoint model config differs from the trainer's");
  const auto variant = ckpt.labels.find("dam.variant");
  if (variant == ckpt.labels.end() || variant->second != to_string(state_.layout.variant()))
    throw CheckpointError("checkpoint holds no DAM state of the configured variant");
  const auto step = ckpt.counters.find("step");
  if (step == ckpt.counters.end()) throw CheckpointError("checkpoint lacks a step counter");
  DamState s = state_;
  for (std::size_t h = 0; h < s.heads(); ++h) {
    const auto it = ckpt.arrays.find("dam.alpha.head" + std::to_string(h));
    if (it == ckpt.arrays.end() || it->second.size() != s.layout.parameter_count())
      throw CheckpointError("checkpoint lacks mask logits for head " + std::to_string(h));
    s.alpha[h] = it->second;
  }
  params_ = ckpt.params;
  w_opt_.load(ckpt, "optimizer.weights");
  alpha_opt_.load(ckpt, "optimizer.alpha");
  state_ = std::move(s);
  step_ = step->second;
  log_.clear();
}

DamResult run_dam(const TrainConfig& train, const DamConfig& dam, const Corpus& corpus) {
  if (train.steps == 0) throw std::invalid_argument("run_dam needs steps >= 1");
  DamTrainer t(train, dam, corpus);
  while (t.steps_done() < train.steps) t.step();
  DamResult r;
  r.state = t.state();
  r.masks = binarize(r.state);
  r.params = t.params();
  r.log = t.log();
  return r;
}

}  // namespace sparsemask
