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

// Binary attention masks: the hand-designed sparse patterns (star, logsparse,
// strided, fixed, longformer, bigbird), transforms on them, and their JSON /
// PGM / ASCII encodings.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sparsemask/numerics.hpp"

namespace sparsemask {

/// n×n binary matrix; bit (i, j) = 1 means token i may attend to token j.
class AttentionMask {
 public:
  AttentionMask() = default;
  explicit AttentionMask(std::size_t n, bool fill = false);

  static AttentionMask full(std::size_t n) { return AttentionMask(n, true); }
  static AttentionMask identity(std::size_t n);

  std::size_t n() const { return n_; }
  bool get(std::size_t i, std::size_t j) const { return bits_[i * n_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool on) { bits_[i * n_ + j] = on ? 1 : 0; }

  std::size_t active_count() const;
  std::size_t active_diagonal_count() const;
  bool symmetric() const;
  AttentionMask transposed() const;

  /// 0/1 doubles, the form the attention layers consume.
  Matrix to_matrix() const;

  friend bool operator==(const AttentionMask&, const AttentionMask&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// ρ = 1 − |M| / n².
double sparsity(const AttentionMask& mask);
double mean_sparsity(const std::vector<AttentionMask>& masks);

enum class MaskKind { star, logsparse, strided, fixed, longformer, bigbird, full, random };

std::string_view to_string(MaskKind kind);
MaskKind parse_mask_kind(std::string_view name);

struct MaskSpec {
  MaskKind kind = MaskKind::full;
  std::size_t n = 16;
  /// strided: local window and stride; fixed: block length. 0 selects the
  /// documented default for n.
  std::size_t stride = 0;
  /// longformer / bigbird half-width of the sliding band; nullopt selects the
  /// kind's default.
  std::optional<std::size_t> window;
  /// longformer: number of seeded-random global positions; bigbird: number of
  /// leading/trailing global tokens.
  std::size_t global_count = 2;
  /// bigbird: random keys per query row.
  std::size_t random_per_row = 2;
  /// random kind: fraction of the n² entries dropped.
  double drop_fraction = 0.5;
  std::uint64_t seed = 0;
  bool symmetrize = true;
  bool keep_diag = true;

  void validate() const;
};

std::size_t default_stride(MaskKind kind, std::size_t n);
std::size_t default_window(MaskKind kind);

AttentionMask generate_mask(const MaskSpec& spec);

AttentionMask drop_diagonal(const AttentionMask& mask);

/// Zeroes exactly `count` active entries chosen uniformly without replacement.
AttentionMask random_drop(const AttentionMask& mask, std::size_t count, Rng& rng);

enum class RenderFormat { ascii, pgm };

/// ascii: one line per row, "█" attend / "·" blocked. pgm: binary P5 image,
/// 255 = attend. `comment` (pgm only) becomes "# ..." header lines, one per line.
std::string render_mask(const AttentionMask& mask, RenderFormat format,
                        std::string_view comment = {});

/// {"n": int, "rows": ["0101...", ...]}
std::string mask_to_json(const AttentionMask& mask);
AttentionMask mask_from_json(std::string_view text);

void save_mask(const AttentionMask& mask, const std::filesystem::path& path);
AttentionMask load_mask(const std::filesystem::path& path);

class MaskFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sparsemask
