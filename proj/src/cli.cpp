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

#include "sparsemask/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sparsemask/approx.hpp"
#include "sparsemask/checkpoint.hpp"
#include "sparsemask/dam.hpp"
#include "sparsemask/experiment.hpp"
#include "sparsemask/masks.hpp"
#include "sparsemask/pruning.hpp"

namespace sparsemask {
namespace {

namespace fs = std::filesystem;

// Thrown for bad flag combinations found after parsing; exit code 1.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::uint64_t default_seed() {
  const char* env = std::getenv(kSeedEnvVar);
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (errno != 0 || *end != '\0' || env[0] == '-')
    throw UsageError(std::string(kSeedEnvVar) + "='" + env + "' is not an unsigned integer");
  return v;
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

// The invocation and every resolved flag, one per line.
std::string echo(const CLI::App& sub) {
  std::string text = "sparsemask " + sub.get_name() + "\n" + sub.config_to_str(true, false);
  while (!text.empty() && text.back() == '\n') text.pop_back();
  return text;
}

std::vector<std::string> echo_lines(const CLI::App& sub) {
  std::vector<std::string> lines;
  std::istringstream in(echo(sub));
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

void write_mask_json(const fs::path& path, const AttentionMask& mask, const CLI::App& sub) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::parse(mask_to_json(mask));
  doc["flags"] = echo_lines(sub);
  write_text_file(path, doc.dump() + "\n");
}

struct TrainFlags {
  TrainConfig train;
  std::string generator = "markov2";
  std::string optimizer = "adam";
  bool multiplicative = false;
  std::optional<std::uint64_t> corpus_seed;
};

void add_train_flags(CLI::App* s, TrainFlags& f, bool model_flags) {
  TrainConfig& tc = f.train;
  if (model_flags) {
    s->add_option("--n", tc.model.n, "Sequence length (model and corpus)");
    s->add_option("--d", tc.model.d, "Embedding size");
    s->add_option("--heads", tc.model.heads, "Attention heads per block");
    s->add_option("--d-ff", tc.model.d_ff, "Feed-forward hidden size");
    s->add_option("--blocks", tc.model.blocks, "Transformer blocks");
    s->add_option("--vocab", tc.model.vocab, "Vocabulary size, 4 special ids included");
    s->add_option("--mask-constant", tc.model.mask_constant, "Additive mask penalty c");
    s->add_flag("--scale-scores", tc.model.scale_scores, "Divide attention logits by sqrt(d_h)");
    s->add_flag("--multiplicative", f.multiplicative, "Multiply attention weights by the mask");
  }
  s->add_option("--generator", f.generator, "Corpus generator: markov2 | copy-noise");
  s->add_option("--train-size", tc.corpus.train_size, "Training sequences");
  s->add_option("--heldout-size", tc.corpus.heldout_size, "Held-out sequences");
  s->add_option("--branching", tc.corpus.branching, "markov2 successors per word");
  s->add_option("--noise", tc.corpus.noise, "copy-noise substitution probability");
  s->add_option("--corpus-seed", f.corpus_seed, "Corpus seed (default: --seed)");
  s->add_option("--steps", tc.steps, "Training steps");
  s->add_option("--batch-size", tc.batch_size, "Sequences per step");
  s->add_option("--mask-fraction", tc.mask_fraction, "Fraction of word positions masked");
  s->add_option("--optimizer", f.optimizer, "Weight optimizer: adam | sgd");
  s->add_option("--lr", tc.optimizer.lr, "Weight learning rate");
  s->add_option("--momentum", tc.optimizer.momentum, "sgd momentum");
  s->add_option("--init-scale", tc.init_scale, "Weights start uniform(-s, s)");
  s->add_option("--seed", tc.seed, std::string("Run seed (default from ") + kSeedEnvVar + ")");
}

TrainConfig resolve(const TrainFlags& f) {
  TrainConfig tc = f.train;
  tc.model.mask_application =
      f.multiplicative ? MaskApplication::multiplicative : MaskApplication::additive;
  tc.corpus.n = tc.model.n;
  tc.corpus.vocab = tc.model.vocab;
  tc.corpus.generator = parse_generator(f.generator);
  tc.corpus.seed = f.corpus_seed.value_or(tc.seed);
  tc.optimizer.kind = parse_optimizer_kind(f.optimizer);
  tc.validate();
  return tc;
}

struct DamFlags {
  DamConfig dam;
  std::string variant = "unstructured";
  std::string alpha_optimizer = "sgd";
  std::optional<double> tau_final;
  bool no_gumbel = false;
};

void add_dam_flags(CLI::App* s, DamFlags& f) {
  s->add_option("--variant", f.variant, "Mask layout: unstructured | structured");
  s->add_option("--lambda", f.dam.lambda, "L1 weight on the sampled mask");
  s->add_option("--tau", f.dam.tau, "Gumbel-sigmoid temperature");
  s->add_option("--tau-final", f.tau_final, "Temperature at the last step (default: --tau)");
  s->add_option("--alpha-init", f.dam.alpha_init, "Initial mask logit");
  s->add_option("--alpha-optimizer", f.alpha_optimizer, "Logit optimizer: sgd | adam");
  s->add_option("--alpha-lr", f.dam.alpha_optimizer.lr, "Logit learning rate");
  s->add_flag("--learn-diagonal", f.dam.learn_diagonal, "structured: learn the interior diagonal");
  s->add_flag("--no-gumbel", f.no_gumbel, "Train on the noise-free sigmoid(alpha/tau)");
}

DamConfig resolve(const DamFlags& f) {
  DamConfig dc = f.dam;
  dc.variant = parse_dam_variant(f.variant);
  dc.alpha_optimizer.kind = parse_optimizer_kind(f.alpha_optimizer);
  dc.tau_final = f.tau_final.value_or(dc.tau);
  dc.gumbel_noise = !f.no_gumbel;
  dc.validate();
  return dc;
}

HeadMasks to_matrices(const std::vector<AttentionMask>& masks) {
  HeadMasks out;
  for (const auto& m : masks) out.push_back(m.to_matrix());
  return out;
}

// gen-mask ------------------------------------------------------------------

struct GenMaskFlags {
  MaskSpec spec;
  std::string kind;
  std::optional<std::size_t> window;
  bool no_symmetrize = false;
  bool drop_diag = false;
  std::string out;
  std::string pgm;
};

int gen_mask(const GenMaskFlags& f, const CLI::App& sub, std::ostream& out) {
  MaskSpec spec = f.spec;
  spec.kind = parse_mask_kind(f.kind);
  spec.window = f.window;
  spec.symmetrize = !f.no_symmetrize;
  spec.keep_diag = !f.drop_diag;
  spec.validate();
  const AttentionMask m = generate_mask(spec);
  write_mask_json(f.out, m, sub);
  if (!f.pgm.empty()) write_text_file(f.pgm, render_mask(m, RenderFormat::pgm, echo(sub)));
  out << f.kind << " n=" << spec.n << " active=" << m.active_count() << " sparsity "
      << fixed3(sparsity(m)) << "\n";
  return kExitOk;
}

// render-mask ---------------------------------------------------------------

struct RenderFlags {
  std::string in;
  std::string format = "ascii";
  std::string out;
};

int render(const RenderFlags& f, const CLI::App& sub, std::ostream& out) {
  const AttentionMask m = load_mask(f.in);
  if (f.format == "ascii") {
    const std::string text = render_mask(m, RenderFormat::ascii);
    if (f.out.empty()) {
      out << text;
    } else {
      write_text_file(f.out, text);
    }
  } else if (f.format == "pgm") {
    if (f.out.empty()) throw UsageError("--format pgm needs --out FILE");
    write_text_file(f.out, render_mask(m, RenderFormat::pgm, echo(sub)));
  } else {
    throw UsageError("unknown --format '" + f.format + "' (expected ascii or pgm)");
  }
  return kExitOk;
}

// train ---------------------------------------------------------------------

struct TrainCmdFlags {
  TrainFlags train;
  DamFlags dam;
  std::string source = "full";
  std::size_t drop_count = 0;
  std::vector<std::string> masks;
  double prune_fraction = 0.8;
  std::size_t finetune_steps = 400;
  std::size_t log_every = 10;
  std::string out_dir;
};

int train_cmd(const TrainCmdFlags& f, const CLI::App& sub, std::ostream& out) {
  RunConfig rc;
  rc.train = resolve(f.train);
  rc.source = parse_mask_source(f.source);
  rc.drop_count = f.drop_count;
  rc.prune_fraction = f.prune_fraction;
  rc.finetune_steps = f.finetune_steps;
  rc.dam = resolve(f.dam);
  if (rc.source == MaskSource::fixed && f.masks.empty())
    throw UsageError("--source fixed needs --mask FILE (one, or one per head)");
  if (rc.source != MaskSource::fixed && !f.masks.empty())
    throw UsageError("--mask is only used with --source fixed");
  for (const auto& path : f.masks) rc.fixed_masks.push_back(load_mask(path));

  const TrainRun run = train(rc, f.log_every);
  const fs::path dir = f.out_dir;
  nlohmann::ordered_json doc = nlohmann::ordered_json::parse(run.to_json());
  doc["flags"] = echo_lines(sub);
  write_text_file(dir / "run.json", doc.dump(2) + "\n");
  write_text_file(dir / "metrics.csv", run.metrics_csv(echo(sub)));
  for (std::size_t h = 0; h < run.masks.size(); ++h)
    write_mask_json(dir / ("mask_head" + std::to_string(h) + ".json"), run.masks[h], sub);
  Checkpoint ckpt;
  ckpt.params = run.params;
  ckpt.labels["trainer"] = "weights";
  ckpt.labels["source"] = std::string(to_string(rc.source));
  save_checkpoint(ckpt, dir / "checkpoint.json");

  out << "source " << to_string(rc.source) << ", seed " << rc.train.seed << ", "
      << rc.train.steps << " steps\n";
  out << "mask sparsity " << fixed3(mean_sparsity(run.masks)) << "\n";
  out << "held-out loss " << fmt(run.heldout_loss) << "\n";
  out << "wrote " << (dir / "run.json").string() << "\n";
  return kExitOk;
}

// dam-train -----------------------------------------------------------------

struct DamCmdFlags {
  TrainFlags train;
  DamFlags dam;
  std::string out_dir;
};

int dam_train(DamCmdFlags f, const CLI::App& sub, std::ostream& out) {
  const TrainConfig tc = resolve(f.train);
  const DamConfig dc = resolve(f.dam);
  const Corpus corpus = make_corpus(tc.corpus);
  DamTrainer t(tc, dc, corpus);
  while (t.steps_done() < tc.steps) t.step();
  const std::vector<AttentionMask> masks = binarize(t.state());
  const double heldout = heldout_loss(tc, corpus, t.params(), to_matrices(masks));
  const auto [diag, off] = t.state().diagonal_means();

  const fs::path dir = f.out_dir;
  std::ostringstream log;
  for (const auto& line : echo_lines(sub)) log << "# " << line << '\n';
  log << "step,mlm_loss,l1_term,total_loss,binarized_sparsity\n";
  log.precision(10);
  for (const auto& r : t.log())
    log << r.step << ',' << r.mlm_loss << ',' << r.l1_term << ',' << r.total_loss << ','
        << r.binarized_sparsity << '\n';
  write_text_file(dir / "log.csv", log.str());
  for (std::size_t h = 0; h < masks.size(); ++h) {
    const std::string stem = "mask_head" + std::to_string(h);
    write_mask_json(dir / (stem + ".json"), masks[h], sub);
    write_text_file(dir / (stem + ".pgm"), render_mask(masks[h], RenderFormat::pgm, echo(sub)));
  }
  save_checkpoint(t.checkpoint(), dir / "checkpoint.json");

  nlohmann::ordered_json summary;
  summary["flags"] = echo_lines(sub);
  summary["variant"] = std::string(to_string(dc.variant));
  summary["lambda"] = dc.lambda;
  summary["seed"] = tc.seed;
  std::vector<double> per_head;
  for (const auto& m : masks) per_head.push_back(sparsity(m));
  summary["sparsity_per_head"] = per_head;
  summary["sparsity"] = mean_sparsity(masks);
  summary["heldout_loss"] = heldout;
  summary["diagonal_mean_sigmoid"] = diag;
  summary["off_diagonal_mean_sigmoid"] = off;
  write_text_file(dir / "summary.json", summary.dump(2) + "\n");

  out << "DAM-" << (dc.variant == DamVariant::structured ? "s" : "u") << " lambda "
      << fmt(dc.lambda) << ", seed " << tc.seed << ", " << tc.steps << " steps\n";
  for (std::size_t h = 0; h < masks.size(); ++h)
    out << "head " << h << " sparsity " << fixed3(per_head[h]) << "\n";
  out << "mean sparsity " << fixed3(mean_sparsity(masks)) << "\n";
  out << "held-out loss " << fmt(heldout) << "\n";
  out << "mean sigmoid(alpha): diagonal " << fmt(diag, 4) << ", off-diagonal " << fmt(off, 4)
      << "\n";
  return kExitOk;
}

// prune ---------------------------------------------------------------------

struct PruneFlags {
  TrainFlags train;
  std::string checkpoint;
  std::vector<double> fractions{0.5, 0.6, 0.7, 0.8, 0.9};
  std::size_t finetune_steps = 400;
  std::string out;
};

DamState state_from_checkpoint(const Checkpoint& ckpt) {
  const auto variant = ckpt.labels.find("dam.variant");
  if (variant == ckpt.labels.end())
    throw UsageError("checkpoint holds no learned mask distribution; create one with dam-train");
  const TransformerConfig& mc = ckpt.params.config;
  DamConfig dc;
  dc.variant = parse_dam_variant(variant->second);
  for (bool learn_diag : {false, true}) {
    dc.learn_diagonal = learn_diag;
    DamState s = DamState::create(dc, mc.n, mc.heads);
    bool ok = true;
    for (std::size_t h = 0; h < s.heads() && ok; ++h) {
      const auto it = ckpt.arrays.find("dam.alpha.head" + std::to_string(h));
      ok = it != ckpt.arrays.end() && it->second.size() == s.alpha[h].size();
      if (ok) s.alpha[h] = it->second;
    }
    if (ok) return s;
  }
  throw CheckpointError("checkpoint mask logits do not match its model config");
}

int prune(const PruneFlags& f, const CLI::App& sub, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(f.checkpoint);
  const DamState state = state_from_checkpoint(ckpt);
  TrainFlags tf = f.train;
  tf.train.model = ckpt.params.config;
  tf.multiplicative = ckpt.params.config.mask_application == MaskApplication::multiplicative;
  SweepConfig sc;
  sc.train = resolve(tf);
  sc.finetune_steps = f.finetune_steps;
  sc.fractions = f.fractions;
  sc.validate();
  const Corpus corpus = make_corpus(sc.train.corpus);
  const auto rows = sparsity_sweep(state.probabilities(), ckpt.params, sc, corpus);
  write_text_file(f.out, sweep_csv(rows, echo(sub)));
  out << "fraction  scored      random\n";
  for (const auto& r : rows)
    out << fixed3(r.fraction) << "     " << fmt(r.loss_scored) << "  " << fmt(r.loss_random) << "\n";
  out << "wrote " << f.out << "\n";
  return kExitOk;
}

// gradcheck -----------------------------------------------------------------

struct GradcheckFlags {
  std::string preset = "toy";
  std::size_t seeds = 3;
  std::uint64_t seed = 0;
  std::size_t batch_size = 2;
  double step = 1e-5;
  std::string tol = "1e-4";
};

int gradcheck_cmd(const GradcheckFlags& f, std::ostream& out) {
  if (f.preset != "toy") throw UsageError("unknown --preset '" + f.preset + "' (expected toy)");
  double tol = 0.0;
  try {
    tol = std::stod(f.tol);
  } catch (const std::exception&) {
    throw UsageError("--tol '" + f.tol + "' is not a number");
  }
  if (f.seeds == 0) throw UsageError("--seeds must be >= 1");
  double worst = 0.0;
  for (std::size_t k = 0; k < f.seeds; ++k) {
    const ModelGradcheck r = model_gradcheck(TrainConfig{}, f.seed + k, f.batch_size, f.step);
    out << "seed " << f.seed + k << ": weights (" << r.weight_count << ") "
        << fmt(r.weights.max_rel_error, 3) << ", alpha unstructured "
        << fmt(r.alpha_unstructured.max_rel_error, 3) << ", alpha structured "
        << fmt(r.alpha_structured.max_rel_error, 3) << "\n";
    worst = std::max(worst, r.max_rel_error());
  }
  out << "max rel err " << fmt(worst, 3) << "\n";
  const bool pass = worst < tol;
  out << "max rel err " << (pass ? "< " : ">= ") << f.tol << ": " << (pass ? "PASS" : "FAIL")
      << "\n";
  return pass ? kExitOk : kExitRuntime;
}

// approx-verify -------------------------------------------------------------

struct ApproxFlags {
  ApproxConfig config;
  bool no_hardmax_check = false;
  bool allow_permutation_collisions = false;
  std::string out;
};

int approx_verify(const ApproxFlags& f, const CLI::App& sub, std::ostream& out,
                  std::ostream& err) {
  f.config.validate();
  const VerifyReport r = verify_contextual_mapping(f.config, !f.no_hardmax_check);
  if (!f.out.empty()) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::parse(r.to_json());
    doc["flags"] = echo_lines(sub);
    write_text_file(f.out, doc.dump(2) + "\n");
  }
  out << r.inputs << " inputs, " << r.collisions << " collisions\n";
  out << r.values << " values, " << r.distinct_values << " distinct; "
      << r.collisions - r.collisions_non_permutation
      << " colliding pairs come from row permutations of one input\n";
  out << r.phases_checked << " phases checked, min margin " << r.min_margin.to_string()
      << " (scaled, 1 = delta)\n";
  out << "structural properties: " << (r.structural_ok() ? "hold" : "VIOLATED") << "\n";
  if (!r.structural_ok()) {
    err << "error: the construction violated a structural property; see the JSON report\n";
    return kExitRuntime;
  }
  if (r.collisions > 0 && !f.allow_permutation_collisions) {
    err << "error: contextual values are not disjoint across inputs (" << r.collisions
        << " colliding pairs); pass --allow-permutation-collisions to accept collisions "
           "between row permutations of one input\n";
    return kExitRuntime;
  }
  return kExitOk;
}

// sweep-baselines -----------------------------------------------------------

struct SweepBaselineFlags {
  std::size_t n = 128;
  std::uint64_t seed = 0;
  std::string out_dir;
};

int sweep_baselines(const SweepBaselineFlags& f, const CLI::App& sub, std::ostream& out) {
  std::ostringstream csv;
  for (const auto& line : echo_lines(sub)) csv << "# " << line << '\n';
  csv << "kind,n,sparsity,sparsity_no_diag\n";
  out << "kind        sparsity%  without diag%\n";
  for (MaskKind kind : {MaskKind::star, MaskKind::bigbird, MaskKind::logsparse,
                        MaskKind::longformer, MaskKind::fixed, MaskKind::strided}) {
    MaskSpec spec;
    spec.kind = kind;
    spec.n = f.n;
    spec.seed = f.seed;
    spec.validate();
    const AttentionMask m = generate_mask(spec);
    const AttentionMask nd = drop_diagonal(m);
    const std::string name(to_string(kind));
    csv << name << ',' << f.n << ',' << fmt(sparsity(m), 10) << ',' << fmt(sparsity(nd), 10)
        << '\n';
    char line[96];
    std::snprintf(line, sizeof line, "%-11s %9.1f  %13.1f\n", name.c_str(), 100.0 * sparsity(m),
                  100.0 * sparsity(nd));
    out << line;
    if (!f.out_dir.empty()) {
      const fs::path dir = f.out_dir;
      write_mask_json(dir / (name + ".json"), m, sub);
      write_text_file(dir / (name + ".pgm"), render_mask(m, RenderFormat::pgm, echo(sub)));
    }
  }
  if (!f.out_dir.empty()) write_text_file(fs::path(f.out_dir) / "sparsity.csv", csv.str());
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::uint64_t seed0 = 0;
  try {
    seed0 = default_seed();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  CLI::App app{"Sparse attention masks: generation, learning, pruning and verification",
               "sparsemask"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  GenMaskFlags gm;
  gm.spec.seed = seed0;
  auto* gen = app.add_subcommand("gen-mask", "Generate a fixed sparse mask as JSON");
  gen->add_option("--kind", gm.kind,
                  "star | logsparse | strided | fixed | longformer | bigbird | full | random")
      ->required();
  gen->add_option("--n", gm.spec.n, "Sequence length");
  gen->add_option("--stride", gm.spec.stride, "strided window/stride, fixed block (0: default)");
  gen->add_option("--window", gm.window, "longformer/bigbird band half-width");
  gen->add_option("--global-count", gm.spec.global_count, "Global positions");
  gen->add_option("--random-per-row", gm.spec.random_per_row, "bigbird random keys per row");
  gen->add_option("--drop-fraction", gm.spec.drop_fraction, "random: fraction of cells dropped");
  gen->add_option("--seed", gm.spec.seed, "Seed for random components");
  gen->add_flag("--no-symmetrize", gm.no_symmetrize, "Keep the raw pattern");
  gen->add_flag("--drop-diag", gm.drop_diag, "Remove the diagonal");
  gen->add_option("--out", gm.out, "Output mask JSON")->required();
  gen->add_option("--pgm", gm.pgm, "Also write a PGM image");

  RenderFlags rf;
  auto* rend = app.add_subcommand("render-mask", "Render a mask JSON as text or PGM");
  rend->add_option("--in", rf.in, "Mask JSON")->required()->check(CLI::ExistingFile);
  rend->add_option("--format", rf.format, "ascii | pgm");
  rend->add_option("--out", rf.out, "Output file (ascii defaults to stdout)");

  TrainCmdFlags tr;
  tr.train.train.seed = seed0;
  auto* trn = app.add_subcommand("train", "Train the toy MLM under one mask source");
  add_train_flags(trn, tr.train, true);
  add_dam_flags(trn, tr.dam);
  trn->add_option("--source", tr.source,
                  "full | no-diag | random-drop | fixed | dam | two-stage");
  trn->add_option("--drop-count", tr.drop_count, "random-drop: cells per head (0: n)");
  trn->add_option("--mask", tr.masks, "fixed: mask JSON, one or one per head")
      ->check(CLI::ExistingFile);
  trn->add_option("--prune-fraction", tr.prune_fraction, "two-stage: fraction pruned");
  trn->add_option("--finetune-steps", tr.finetune_steps, "two-stage: steps after pruning");
  trn->add_option("--log-every", tr.log_every, "Metric row interval");
  trn->add_option("--out-dir", tr.out_dir, "Output directory")->required();

  DamCmdFlags dm;
  dm.train.train.seed = seed0;
  dm.train.train.steps = 1000;
  auto* dam = app.add_subcommand("dam-train", "Learn binary masks jointly with the weights");
  add_train_flags(dam, dm.train, true);
  add_dam_flags(dam, dm.dam);
  dam->add_option("--out-dir", dm.out_dir, "Output directory")->required();

  PruneFlags pf;
  pf.train.train.seed = seed0;
  auto* prn = app.add_subcommand("prune", "Prune a learned mask distribution and compare to random");
  add_train_flags(prn, pf.train, false);
  prn->add_option("--checkpoint", pf.checkpoint, "dam-train checkpoint.json")
      ->required()
      ->check(CLI::ExistingFile);
  prn->add_option("--fractions", pf.fractions, "Drop fractions, ascending")->delimiter(',');
  prn->add_option("--finetune-steps", pf.finetune_steps, "Steps under each pruned mask");
  prn->add_option("--out", pf.out, "Output CSV")->required();

  GradcheckFlags gc;
  gc.seed = seed0;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  grad->add_option("--preset", gc.preset, "Model preset: toy");
  grad->add_option("--seeds", gc.seeds, "Number of seeds");
  grad->add_option("--seed", gc.seed, "First seed");
  grad->add_option("--batch-size", gc.batch_size, "Sequences in the checked batch");
  grad->add_option("--step", gc.step, "Central-difference step");
  grad->add_option("--tol", gc.tol, "Pass threshold on the max relative error");

  ApproxFlags af;
  auto* apx = app.add_subcommand("approx-verify", "Exhaustively verify the contextual mapping");
  apx->add_option("--n", af.config.n, "Tokens");
  apx->add_option("--d", af.config.d, "Token dimension");
  apx->add_option("--inv-delta", af.config.inv_delta, "Grid resolution 1/delta");
  apx->add_flag("--no-hardmax-check", af.no_hardmax_check, "Skip the attention-matrix cross-check");
  apx->add_flag("--allow-permutation-collisions", af.allow_permutation_collisions,
                "Exit 0 when the only collisions are between row permutations of one input");
  apx->add_option("--out", af.out, "Output JSON report");

  SweepBaselineFlags sb;
  sb.seed = seed0;
  auto* swp = app.add_subcommand("sweep-baselines", "All fixed mask kinds with their sparsity");
  swp->add_option("--n", sb.n, "Sequence length");
  swp->add_option("--seed", sb.seed, "Seed for random components");
  swp->add_option("--out-dir", sb.out_dir, "Write each mask as JSON and PGM plus sparsity.csv");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (gen->parsed()) return gen_mask(gm, *gen, out);
    if (rend->parsed()) return render(rf, *rend, out);
    if (trn->parsed()) return train_cmd(tr, *trn, out);
    if (dam->parsed()) return dam_train(dm, *dam, out);
    if (prn->parsed()) return prune(pf, *prn, out);
    if (grad->parsed()) return gradcheck_cmd(gc, out);
    if (apx->parsed()) return approx_verify(af, *apx, out, err);
    if (swp->parsed()) return sweep_baselines(sb, *swp, out);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const MaskFormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  err << "error: no subcommand given\n";
  return kExitValidation;
}

}  // namespace sparsemask
