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

#include "sparsemask/trainer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sparsemask {

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) +
                              "' (expected sgd or adam)");
}

void OptimizerConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("adam betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("adam eps must be > 0");
}

Optimizer::Optimizer(const OptimizerConfig& config, std::size_t size)
    : config_(config), m_(size, 0.0), v_(config.kind == OptimizerKind::adam ? size : 0, 0.0) {
  config_.validate();
}

void Optimizer::step(std::span<double> x, std::span<const double> g, double lr_scale) {
  if (x.size() != m_.size() || g.size() != m_.size())
    throw std::invalid_argument("optimizer step: size mismatch");
  ++t_;
  const double lr = config_.lr * lr_scale;
  if (config_.kind == OptimizerKind::sgd) {
    if (config_.momentum == 0.0) {
      for (std::size_t i = 0; i < x.size(); ++i) x[i] -= lr * g[i];
      return;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      m_[i] = config_.momentum * m_[i] + g[i];
      x[i] -= lr * m_[i];
    }
    return;
  }
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < x.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * g[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * g[i] * g[i];
    x[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.eps);
  }
}

void Optimizer::save(Checkpoint& ckpt, const std::string& prefix) const {
  ckpt.arrays[prefix + ".m"] = m_;
  ckpt.arrays[prefix + ".v"] = v_;
  ckpt.counters[prefix + ".t"] = t_;
}

void Optimizer::load(const Checkpoint& ckpt, const std::string& prefix) {
  const auto m = ckpt.arrays.find(prefix + ".m");
  const auto v = ckpt.arrays.find(prefix + ".v");
  const auto t = ckpt.counters.find(prefix + ".t");
  if (m == ckpt.arrays.end() || v == ckpt.arrays.end() || t == ckpt.counters.end())
    throw CheckpointError("checkpoint lacks optimizer state '" + prefix + "'");
  if (m->second.size() != m_.size() || v->second.size() != v_.size())
    throw CheckpointError("optimizer state '" + prefix + "' does not match the model size");
  m_ = m->second;
  v_ = v->second;
  t_ = t->second;
}

void TrainConfig::validate() const {
  model.validate();
  corpus.validate();
  optimizer.validate();
  if (model.n != corpus.n)
    throw std::invalid_argument("model n=" + std::to_string(model.n) + " differs from corpus n=" +
                                std::to_string(corpus.n));
  if (model.vocab != corpus.vocab) throw std::invalid_argument("model and corpus vocab differ");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (!(mask_fraction > 0.0 && mask_fraction < 1.0))
    throw std::invalid_argument("mask_fraction must lie in (0, 1)");
  if (!(init_scale > 0.0)) throw std::invalid_argument("init_scale must be > 0");
}

MlmBatch training_batch(const TrainConfig& config, const Corpus& corpus, std::uint64_t step) {
  Rng rng = Rng::derive(config.seed, kBatchStream, step);
  return sample_mlm_batch(corpus.train, config.batch_size, config.mask_fraction, rng);
}

double heldout_loss(const TrainConfig& config, const Corpus& corpus, const ModelParams& params,
                    const HeadMasks& masks) {
  if (corpus.heldout.empty()) throw std::invalid_argument("corpus has no held-out sequences");
  std::uint64_t s = config.seed ^ 0x5EEDE7A1ULL;
  const MlmBatch batch = evaluation_batch(corpus.heldout, config.mask_fraction, splitmix64(s));
  return mlm_loss(batch, params, masks);
}

WeightTrainer::WeightTrainer(const TrainConfig& config, const Corpus& corpus, HeadMasks masks)
    : WeightTrainer(config, corpus, std::move(masks), [&] {
        Rng rng = Rng::derive(config.seed, kInitStream, 0);
        return ModelParams::init(config.model, rng, config.init_scale);
      }()) {}

WeightTrainer::WeightTrainer(const TrainConfig& config, const Corpus& corpus, HeadMasks masks,
                             ModelParams params)
    : config_(config), corpus_(&corpus), masks_(std::move(masks)), params_(std::move(params)) {
  config_.validate();
  if (!(params_.config == config_.model))
    throw std::invalid_argument("initial parameters were built for a different model config");
  optimizer_ = Optimizer(config_.optimizer, params_.parameter_count());
}

double WeightTrainer::step() {
  const MlmBatch batch = training_batch(config_, *corpus_, step_);
  const LossAndGrad lg = mlm_forward_loss(batch, params_, masks_);
  if (!std::isfinite(lg.loss))
    throw std::runtime_error("training diverged: non-finite loss at step " + std::to_string(step_));
  std::vector<double> x = params_.flatten();
  const std::vector<double> g = lg.grad.flatten();
  optimizer_.step(x, g);
  params_.unflatten(x);
  ++step_;
  return lg.loss;
}

double WeightTrainer::evaluate() const { return heldout_loss(config_, *corpus_, params_, masks_); }

Checkpoint WeightTrainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.params = params_;
  optimizer_.save(ckpt, "optimizer.weights");
  ckpt.counters["step"] = step_;
  ckpt.labels["trainer"] = "weights";
  return ckpt;
}

void WeightTrainer::restore(const Checkpoint& ckpt) {
  if (!(ckpt.params.config == config_.model))
    throw CheckpointError("checkpoint model config differs from the trainer's");
  const auto step = ckpt.counters.find("step");
  if (step == ckpt.counters.end()) throw CheckpointError("checkpoint lacks a step counter");
  params_ = ckpt.params;
  optimizer_.load(ckpt, "optimizer.weights");
  step_ = step->second;
}

}  // namespace sparsemask
