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

#include "sparsemask/masks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace sparsemask {

AttentionMask::AttentionMask(std::size_t n, bool fill) : n_(n), bits_(n * n, fill ? 1 : 0) {}

AttentionMask AttentionMask::identity(std::size_t n) {
  AttentionMask m(n);
  for (std::size_t i = 0; i < n; ++i) m.set(i, i, true);
  return m;
}

std::size_t AttentionMask::active_count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::size_t AttentionMask::active_diagonal_count() const {
  std::size_t c = 0;
  for (std::size_t i = 0; i < n_; ++i) c += get(i, i) ? 1 : 0;
  return c;
}

bool AttentionMask::symmetric() const {
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = i + 1; j < n_; ++j)
      if (get(i, j) != get(j, i)) return false;
  return true;
}

AttentionMask AttentionMask::transposed() const {
  AttentionMask t(n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) t.set(j, i, get(i, j));
  return t;
}

Matrix AttentionMask::to_matrix() const {
  Matrix m(n_, n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) m(i, j) = get(i, j) ? 1.0 : 0.0;
  return m;
}

double sparsity(const AttentionMask& mask) {
  const double total = static_cast<double>(mask.n()) * static_cast<double>(mask.n());
  return 1.0 - static_cast<double>(mask.active_count()) / total;
}

double mean_sparsity(const std::vector<AttentionMask>& masks) {
  if (masks.empty()) return 0.0;
  double s = 0.0;
  for (const auto& m : masks) s += sparsity(m);
  return s / static_cast<double>(masks.size());
}

std::string_view to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::star: return "star";
    case MaskKind::logsparse: return "logsparse";
    case MaskKind::strided: return "strided";
    case MaskKind::fixed: return "fixed";
    case MaskKind::longformer: return "longformer";
    case MaskKind::bigbird: return "bigbird";
    case MaskKind::full: return "full";
    case MaskKind::random: return "random";
  }
  return "?";
}

MaskKind parse_mask_kind(std::string_view name) {
  for (MaskKind k : {MaskKind::star, MaskKind::logsparse, MaskKind::strided, MaskKind::fixed,
                     MaskKind::longformer, MaskKind::bigbird, MaskKind::full, MaskKind::random}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown mask kind '" + std::string(name) + "'");
}

std::size_t default_stride(MaskKind kind, std::size_t n) {
  const double root = std::sqrt(static_cast<double>(n));
  double l = 0.0;
  switch (kind) {
    case MaskKind::strided: l = std::round(1.5 * root); break;
    case MaskKind::fixed: l = std::round(0.8 * root); break;
    default: return 0;
  }
  return std::clamp<std::size_t>(static_cast<std::size_t>(l), 1, n > 1 ? n - 1 : 1);
}

std::size_t default_window(MaskKind kind) {
  switch (kind) {
    case MaskKind::longformer: return 5;
    case MaskKind::bigbird: return 0;
    default: return 0;
  }
}

void MaskSpec::validate() const {
  if (n < 2) throw std::invalid_argument("mask length n must be >= 2");
  if (stride != 0 && stride >= n)
    throw std::invalid_argument("stride " + std::to_string(stride) + " must be in [1, n)");
  if (window && *window >= n)
    throw std::invalid_argument("window " + std::to_string(*window) + " must be in [0, n)");
  if (global_count > n) throw std::invalid_argument("global count exceeds sequence length");
  if (random_per_row > n) throw std::invalid_argument("random entries per row exceed n");
  if (!(drop_fraction >= 0.0 && drop_fraction <= 1.0))
    throw std::invalid_argument("drop fraction must be in [0, 1]");
}

namespace {

void add_band(AttentionMask& m, std::size_t w) {
  const std::size_t n = m.n();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= w ? i - w : 0;
    const std::size_t hi = std::min(n - 1, i + w);
    for (std::size_t j = lo; j <= hi; ++j) m.set(i, j, true);
  }
}

void add_global(AttentionMask& m, std::size_t p) {
  for (std::size_t j = 0; j < m.n(); ++j) {
    m.set(p, j, true);
    m.set(j, p, true);
  }
}

// k distinct indices from [0, n) by partial Fisher–Yates.
std::vector<std::size_t> sample_distinct(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

AttentionMask star(std::size_t n) {
  AttentionMask m(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.set(i, i, true);
    m.set(i, (i + 1) % n, true);
    m.set(i, (i + n - 1) % n, true);
  }
  add_global(m, 0);  // relay token
  return m;
}

AttentionMask logsparse(std::size_t n) {
  AttentionMask m(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.set(i, i, true);
    for (std::size_t step = 1; step <= i; step <<= 1) m.set(i, i - step, true);
  }
  return m;
}

AttentionMask strided(std::size_t n, std::size_t l) {
  AttentionMask m(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      if (i - j <= l || (i - j) % l == 0) m.set(i, j, true);
  return m;
}

AttentionMask fixed(std::size_t n, std::size_t l) {
  AttentionMask m(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i / l == j / l || j % l == l - 1) m.set(i, j, true);
  return m;
}

AttentionMask longformer(std::size_t n, std::size_t w, std::size_t globals, Rng& rng) {
  AttentionMask m(n);
  add_band(m, w);
  for (std::size_t p : sample_distinct(n, globals, rng)) add_global(m, p);
  return m;
}

AttentionMask bigbird(std::size_t n, std::size_t w, std::size_t globals, std::size_t random,
                      Rng& rng) {
  AttentionMask m(n);
  add_band(m, w);
  const std::size_t leading = (globals + 1) / 2;
  const std::size_t trailing = globals / 2;
  for (std::size_t p = 0; p < leading; ++p) add_global(m, p);
  for (std::size_t p = 0; p < trailing; ++p) add_global(m, n - 1 - p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j : sample_distinct(n, random, rng)) m.set(i, j, true);
  return m;
}

AttentionMask random_mask(std::size_t n, double fraction, Rng& rng) {
  const auto total = n * n;
  const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total)));
  return random_drop(AttentionMask::full(n), std::min(count, total), rng);
}

}  // namespace

AttentionMask generate_mask(const MaskSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n;
  Rng rng(spec.seed);
  const std::size_t stride = spec.stride != 0 ? spec.stride : default_stride(spec.kind, n);
  const std::size_t window = std::min(spec.window.value_or(default_window(spec.kind)), n - 1);

  AttentionMask m;
  switch (spec.kind) {
    case MaskKind::star: m = star(n); break;
    case MaskKind::logsparse: m = logsparse(n); break;
    case MaskKind::strided: m = strided(n, stride); break;
    case MaskKind::fixed: m = fixed(n, stride); break;
    case MaskKind::longformer: m = longformer(n, window, spec.global_count, rng); break;
    case MaskKind::bigbird:
      m = bigbird(n, window, spec.global_count, spec.random_per_row, rng);
      break;
    case MaskKind::full: m = AttentionMask::full(n); break;
    case MaskKind::random: m = random_mask(n, spec.drop_fraction, rng); break;
  }
  if (spec.symmetrize) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const bool on = m.get(i, j) || m.get(j, i);
        m.set(i, j, on);
        m.set(j, i, on);
      }
  }
  if (!spec.keep_diag) m = drop_diagonal(m);
  return m;
}

AttentionMask drop_diagonal(const AttentionMask& mask) {
  AttentionMask out = mask;
  for (std::size_t i = 0; i < out.n(); ++i) out.set(i, i, false);
  return out;
}

AttentionMask random_drop(const AttentionMask& mask, std::size_t count, Rng& rng) {
  std::vector<std::size_t> active;
  active.reserve(mask.active_count());
  for (std::size_t i = 0; i < mask.n(); ++i)
    for (std::size_t j = 0; j < mask.n(); ++j)
      if (mask.get(i, j)) active.push_back(i * mask.n() + j);
  if (count > active.size())
    throw std::invalid_argument("random_drop: count " + std::to_string(count) +
                                " exceeds active entries " + std::to_string(active.size()));
  AttentionMask out = mask;
  for (std::size_t pick : sample_distinct(active.size(), count, rng)) {
    const std::size_t flat = active[pick];
    out.set(flat / mask.n(), flat % mask.n(), false);
  }
  return out;
}

std::string render_mask(const AttentionMask& mask, RenderFormat format, std::string_view comment) {
  std::string out;
  const std::size_t n = mask.n();
  if (format == RenderFormat::ascii) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) out += mask.get(i, j) ? "█" : "·";
      out += '\n';
    }
    return out;
  }
  out = "P5\n";
  // Every comment line gets its own "# " prefix.
  for (std::size_t pos = 0; pos < comment.size();) {
    const std::size_t end = std::min(comment.find('\n', pos), comment.size());
    out += "# ";
    out += comment.substr(pos, end - pos);
    out += '\n';
    pos = end + 1;
  }
  out += std::to_string(n) + " " + std::to_string(n) + "\n255\n";
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out += static_cast<char>(mask.get(i, j) ? 255 : 0);
  return out;
}

std::string mask_to_json(const AttentionMask& mask) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < mask.n(); ++i) {
    std::string r(mask.n(), '0');
    for (std::size_t j = 0; j < mask.n(); ++j)
      if (mask.get(i, j)) r[j] = '1';
    rows.push_back(std::move(r));
  }
  nlohmann::json doc;
  doc["n"] = mask.n();
  doc["rows"] = std::move(rows);
  return doc.dump();
}

AttentionMask mask_from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw MaskFormatError(std::string("mask JSON is malformed: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("n") || !doc.contains("rows"))
    throw MaskFormatError("mask JSON must be an object with \"n\" and \"rows\"");
  if (!doc["n"].is_number_unsigned()) throw MaskFormatError("mask \"n\" must be a positive integer");
  const auto n = doc["n"].get<std::size_t>();
  const auto& rows = doc["rows"];
  if (!rows.is_array() || rows.size() != n)
    throw MaskFormatError("mask \"rows\" must hold exactly n strings");
  AttentionMask m(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!rows[i].is_string()) throw MaskFormatError("mask row " + std::to_string(i) + " is not a string");
    const auto& r = rows[i].get_ref<const std::string&>();
    if (r.size() != n)
      throw MaskFormatError("mask row " + std::to_string(i) + " has length " +
                            std::to_string(r.size()) + ", expected " + std::to_string(n));
    for (std::size_t j = 0; j < n; ++j) {
      if (r[j] != '0' && r[j] != '1')
        throw MaskFormatError("mask row " + std::to_string(i) + " contains non-binary character");
      m.set(i, j, r[j] == '1');
    }
  }
  return m;
}

void save_mask(const AttentionMask& mask, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << mask_to_json(mask) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

AttentionMask load_mask(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return mask_from_json(ss.str());
}

}  // namespace sparsemask
