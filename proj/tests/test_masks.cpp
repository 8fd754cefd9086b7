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
#include <filesystem>
#include <set>

#include "doctest.h"
#include "sparsemask/masks.hpp"

using namespace sparsemask;

namespace {

const MaskKind kAllKinds[] = {MaskKind::star,       MaskKind::logsparse, MaskKind::strided,
                              MaskKind::fixed,      MaskKind::longformer, MaskKind::bigbird,
                              MaskKind::full,       MaskKind::random};

MaskSpec spec_of(MaskKind kind, std::size_t n, bool symmetrize = true) {
  MaskSpec s;
  s.kind = kind;
  s.n = n;
  s.symmetrize = symmetrize;
  s.seed = 11;
  return s;
}

}  // namespace

TEST_SUITE("masks") {

TEST_CASE("sparsity of full and identity masks") {
  CHECK(sparsity(AttentionMask::full(16)) == 0.0);
  CHECK(sparsity(AttentionMask::identity(16)) == 1.0 - 16.0 / 256.0);
  CHECK(sparsity(generate_mask(spec_of(MaskKind::full, 16))) == 0.0);
}

TEST_CASE("star at n=128 matches the published ratio") {
  CHECK(std::abs(sparsity(generate_mask(spec_of(MaskKind::star, 128))) - 0.961) <= 0.003);
}

TEST_CASE("star keeps the relay row and column plus cyclic neighbours") {
  const AttentionMask m = generate_mask(spec_of(MaskKind::star, 16));
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(m.get(0, i));
    CHECK(m.get(i, 0));
    CHECK(m.get(i, i));
    CHECK(m.get(i, (i + 1) % 16));
    CHECK(m.get(i, (i + 15) % 16));
  }
  CHECK_FALSE(m.get(5, 8));
}

TEST_CASE("logsparse row 10 before symmetrization") {
  const AttentionMask m = generate_mask(spec_of(MaskKind::logsparse, 16, false));
  std::set<std::size_t> cols;
  for (std::size_t j = 0; j < 16; ++j)
    if (m.get(10, j)) cols.insert(j);
  CHECK(cols == std::set<std::size_t>{2, 6, 8, 9, 10});
}

TEST_CASE("symmetrized kinds equal their transpose and are deterministic") {
  for (MaskKind k : kAllKinds) {
    CAPTURE(to_string(k));
    const AttentionMask a = generate_mask(spec_of(k, 32));
    CHECK(a.symmetric());
    CHECK(a == generate_mask(spec_of(k, 32)));
  }
}

TEST_CASE("mask spec validation") {
  MaskSpec s = spec_of(MaskKind::strided, 16);
  s.stride = 16;
  CHECK_THROWS_AS(generate_mask(s), std::invalid_argument);
  s = spec_of(MaskKind::full, 1);
  CHECK_THROWS_AS(generate_mask(s), std::invalid_argument);
  s = spec_of(MaskKind::random, 16);
  s.drop_fraction = 1.5;
  CHECK_THROWS_AS(generate_mask(s), std::invalid_argument);
  CHECK_THROWS_AS(parse_mask_kind("diamond"), std::invalid_argument);
}

TEST_CASE("drop_diagonal on the full and star masks") {
  const AttentionMask full = AttentionMask::full(128);
  const double delta = sparsity(drop_diagonal(full)) - sparsity(full);
  CHECK(delta == 128.0 / 16384.0);
  const AttentionMask star = generate_mask(spec_of(MaskKind::star, 128));
  CHECK(std::abs(sparsity(drop_diagonal(star)) - 0.969) <= 0.001);
}

TEST_CASE("drop_diagonal is idempotent and adds exactly the active diagonal") {
  for (MaskKind k : kAllKinds) {
    CAPTURE(to_string(k));
    const AttentionMask m = generate_mask(spec_of(k, 24));
    const AttentionMask once = drop_diagonal(m);
    CHECK(drop_diagonal(once) == once);
    CHECK(once.active_diagonal_count() == 0);
    const double expected = static_cast<double>(m.active_diagonal_count()) / (24.0 * 24.0);
    CHECK(std::abs(sparsity(once) - sparsity(m) - expected) < 1e-15);
  }
}

TEST_CASE("random_drop removes exactly the requested count") {
  Rng a(9);
  const AttentionMask full = AttentionMask::full(128);
  CHECK(random_drop(full, 0, a) == full);
  Rng b(9);
  Rng c(9);
  const AttentionMask x = random_drop(full, 128, b);
  CHECK(x == random_drop(full, 128, c));
  CHECK(sparsity(x) == 128.0 / 16384.0);
  Rng d(1);
  const AttentionMask small = AttentionMask::identity(4);
  CHECK_THROWS_AS(random_drop(small, 5, d), std::invalid_argument);
}

TEST_CASE("ascii rendering") {
  CHECK(render_mask(AttentionMask::identity(2), RenderFormat::ascii) == "█·\n·█\n");
}

TEST_CASE("pgm rendering") {
  const AttentionMask m = generate_mask(spec_of(MaskKind::star, 16));
  const std::string pgm = render_mask(m, RenderFormat::pgm);
  const std::string header = "P5\n16 16\n255\n";
  REQUIRE(pgm.size() == header.size() + 256);
  CHECK(pgm.substr(0, header.size()) == header);
  const auto px = [&](std::size_t i, std::size_t j) {
    return static_cast<unsigned char>(pgm[header.size() + i * 16 + j]);
  };
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(px(0, i) == 255);
    CHECK(px(i, 0) == 255);
  }
  CHECK(px(5, 8) == 0);
  const std::string commented = render_mask(m, RenderFormat::pgm, "a\nb");
  CHECK(commented.substr(0, 11) == "P5\n# a\n# b\n");
}

TEST_CASE("mask JSON format and round trip") {
  CHECK(mask_to_json(AttentionMask::identity(2)) == R"({"n":2,"rows":["10","01"]})");
  for (MaskKind k : kAllKinds) {
    const AttentionMask m = generate_mask(spec_of(k, 20));
    CHECK(mask_from_json(mask_to_json(m)) == m);
  }
  const auto path = std::filesystem::temp_directory_path() / "sparsemask_mask_roundtrip.json";
  const AttentionMask m = generate_mask(spec_of(MaskKind::bigbird, 40));
  save_mask(m, path);
  CHECK(load_mask(path) == m);
  std::filesystem::remove(path);
}

TEST_CASE("malformed mask JSON is rejected") {
  CHECK_THROWS_AS(mask_from_json(R"({"n":2,"rows":["10","0"]})"), MaskFormatError);
  CHECK_THROWS_AS(mask_from_json(R"({"n":2,"rows":["10","02"]})"), MaskFormatError);
  CHECK_THROWS_AS(mask_from_json(R"({"n":2,"rows":["10"]})"), MaskFormatError);
  CHECK_THROWS_AS(mask_from_json("{not json"), MaskFormatError);
}

}  // TEST_SUITE
