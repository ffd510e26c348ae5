// Copyright (c) 2026 The TimeBalance Authors. All Rights Reserved.
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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "oracle.hpp"
#include "timebalance/balance.hpp"
#include "timebalance/rng.hpp"
#include "timebalance/synthgen.hpp"

namespace fs = std::filesystem;
using tb::Vec;

namespace {

Vec unit_axis(int dim, int axis) {
  Vec v = Vec::Zero(dim);
  v[axis] = 1.0;
  return v;
}

Vec random_unit(tb::Rng& rng, int dim) {
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.normal();
  return v / v.norm();
}

Vec random_simplex(tb::Rng& rng, int dim) {
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = rng.uniform(1e-3, 1.0);
  return v / v.sum();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("tb_bal_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("similarity matrix examples") {
  tb::Rng rng(1);
  const Vec z = random_unit(rng, 6);

  std::vector<Vec> identical = {z, z, z};
  const auto ones = tb::similarity_matrix(identical);
  CHECK((ones - Eigen::MatrixXd::Ones(3, 3)).norm() <= 1e-9);

  std::vector<Vec> ortho = {unit_axis(4, 0), unit_axis(4, 1), unit_axis(4, 2)};
  const auto eye = tb::similarity_matrix(ortho);
  CHECK((eye - Eigen::MatrixXd::Identity(3, 3)).norm() <= 1e-12);

  // n=2 with cos 0.6.
  Vec a = unit_axis(2, 0);
  Vec b(2);
  b << 0.6, 0.8;
  const auto m = tb::similarity_matrix({a, b});
  CHECK(m(0, 0) == doctest::Approx(1.0));
  CHECK(m(0, 1) == doctest::Approx(0.6));
  CHECK(m(1, 0) == doctest::Approx(0.6));
  CHECK(m(1, 1) == doctest::Approx(1.0));

  CHECK_THROWS_AS(tb::similarity_matrix({a}), tb::ContractError);
}

TEST_CASE("similarity matrix is symmetric with unit diagonal on random inputs") {
  tb::Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(0, 4));
    std::vector<Vec> zs;
    for (int i = 0; i < n; ++i) zs.push_back(random_unit(rng, 8));
    const auto c = tb::similarity_matrix(zs);
    CHECK((c - c.transpose()).norm() <= 1e-12);
    for (int i = 0; i < n; ++i) CHECK(std::abs(c(i, i) - 1.0) <= 1e-5);
    CHECK(c.maxCoeff() <= 1.0 + 1e-9);
    CHECK(c.minCoeff() >= -1.0 - 1e-9);
    // Oracle agreement.
    oracle::Vecs ov;
    for (const auto& z : zs) ov.emplace_back(z.data(), z.data() + z.size());
    const auto oc = oracle::similarity_matrix(ov);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) CHECK(std::abs(c(i, j) - oc[i][j]) <= 1e-9);
  }
}

TEST_CASE("similarity score examples and clamping") {
  const auto ones = Eigen::MatrixXd::Ones(4, 4);
  Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(4, 4);
  CHECK(tb::similarity_score(ones, ones) == doctest::Approx(1.0));
  CHECK(tb::similarity_score(ones, eye) == doctest::Approx(0.5));

  // Negative cosines can push the raw average below zero; the score clamps.
  Eigen::MatrixXd neg = -Eigen::MatrixXd::Ones(4, 4);
  neg.diagonal().setOnes();
  CHECK(tb::similarity_score_raw(neg, neg) == doctest::Approx(-1.0));
  CHECK(tb::similarity_score(neg, neg) == doctest::Approx(0.0));

  Eigen::MatrixXd wrong(3, 4);
  CHECK_THROWS_AS(tb::similarity_score(wrong, wrong), tb::ContractError);
}

TEST_CASE("similarity score monotonicity and exchange symmetry") {
  tb::Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(0, 3));
    std::vector<Vec> za, zb;
    for (int i = 0; i < n; ++i) {
      za.push_back(random_unit(rng, 6));
      zb.push_back(random_unit(rng, 6));
    }
    Eigen::MatrixXd ca = tb::similarity_matrix(za);
    Eigen::MatrixXd cb = tb::similarity_matrix(zb);
    CHECK(tb::similarity_score(ca, cb) == doctest::Approx(tb::similarity_score(cb, ca)));
    // Oracle agreement on the raw score.
    oracle::Vecs oa, ob;
    for (const auto& z : za) oa.emplace_back(z.data(), z.data() + z.size());
    for (const auto& z : zb) ob.emplace_back(z.data(), z.data() + z.size());
    CHECK(tb::similarity_score_raw(ca, cb) ==
          doctest::Approx(oracle::similarity_score(oracle::similarity_matrix(oa),
                                                   oracle::similarity_matrix(ob)))
              .epsilon(1e-9));

    // Raising one off-diagonal strictly raises the raw score.
    const double before = tb::similarity_score_raw(ca, cb);
    const int a = static_cast<int>(rng.uniform_int(0, n - 1));
    int b = static_cast<int>(rng.uniform_int(0, n - 1));
    if (b == a) b = (b + 1) % n;
    ca(a, b) += 0.05;
    CHECK(tb::similarity_score_raw(ca, cb) > before);
  }
}

TEST_CASE("teacher combination endpoints are bitwise exact") {
  tb::Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec pi = random_simplex(rng, 7);
    const Vec pd = random_simplex(rng, 7);
    const Vec at_one = tb::combine_teachers(pi, pd, 1.0);
    const Vec at_zero = tb::combine_teachers(pi, pd, 0.0);
    for (int c = 0; c < 7; ++c) {
      CHECK(at_one[c] == pi[c]);   // bitwise
      CHECK(at_zero[c] == pd[c]);  // bitwise
    }
  }

  Vec pi(2), pd(2);
  pi << 0.8, 0.2;
  pd << 0.2, 0.8;
  const Vec mid = tb::combine_teachers(pi, pd, 0.5);
  CHECK(mid[0] == doctest::Approx(0.5));
  CHECK(mid[1] == doctest::Approx(0.5));

  CHECK_THROWS_AS(tb::combine_teachers(pi, pd, 1.2), tb::ContractError);
  CHECK_THROWS_AS(tb::combine_teachers(pi, pd, -0.1), tb::ContractError);
}

TEST_CASE("teacher combination stays a convex combination on the simplex") {
  tb::Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec pi = random_simplex(rng, 5);
    const Vec pd = random_simplex(rng, 5);
    const double s = rng.uniform();
    const Vec pt = tb::combine_teachers(pi, pd, s);
    CHECK(std::abs(pt.sum() - 1.0) <= 1e-6);
    for (int c = 0; c < 5; ++c) {
      CHECK(pt[c] >= std::min(pi[c], pd[c]) - 1e-12);
      CHECK(pt[c] <= std::max(pi[c], pd[c]) + 1e-12);
    }
  }
}

TEST_CASE("score cache round trip preserves records") {
  TempDir dir("cache");
  tb::ScoreCache cache;
  cache.invariant_hash = 0x1234abcd5678ef01ULL;
  cache.distinctive_hash = 0xfeedface0badc0deULL;
  cache.n = 3;
  tb::Rng rng(6);
  for (int k = 0; k < 5; ++k) {
    tb::SimilarityRecord rec;
    rec.video_id = "vid_" + std::to_string(k);
    std::vector<Vec> zi, zd;
    for (int i = 0; i < 3; ++i) {
      zi.push_back(random_unit(rng, 8));
      zd.push_back(random_unit(rng, 8));
    }
    rec.c_invariant = tb::similarity_matrix(zi);
    rec.c_distinctive = tb::similarity_matrix(zd);
    rec.score = tb::similarity_score(rec.c_invariant, rec.c_distinctive);
    cache.records.emplace(rec.video_id, rec);
  }
  const fs::path p = dir.path / "scores.tsv";
  tb::save_score_cache(p, cache);
  const auto loaded = tb::load_score_cache(p);
  CHECK(loaded.invariant_hash == cache.invariant_hash);
  CHECK(loaded.distinctive_hash == cache.distinctive_hash);
  CHECK(loaded.n == 3);
  REQUIRE(loaded.records.size() == cache.records.size());
  for (const auto& [id, rec] : cache.records) {
    const auto& l = loaded.records.at(id);
    CHECK(l.score == rec.score);  // exact: %.17g round trip
    CHECK((l.c_invariant - rec.c_invariant).norm() <= 1e-15);
    CHECK((l.c_distinctive - rec.c_distinctive).norm() <= 1e-15);
  }

  // Hash mismatch invalidates the cache.
  CHECK(tb::maybe_load_score_cache(p, cache.invariant_hash, cache.distinctive_hash).has_value());
  CHECK_FALSE(tb::maybe_load_score_cache(p, cache.invariant_hash + 1, cache.distinctive_hash)
                  .has_value());
  CHECK_FALSE(tb::maybe_load_score_cache(dir.path / "missing.tsv", 0, 0).has_value());
}

TEST_CASE("precompute produces one record per video and skips short ones") {
  tb::SynthSpec spec;
  spec.num_classes_atomic = 1;
  spec.num_classes_composite = 1;
  spec.videos_per_class = 3;
  spec.frames = 32;

  std::vector<tb::VideoInstance> videos;
  for (int cls = 0; cls < 2; ++cls)
    for (int i = 0; i < 3; ++i) {
      auto inst = cls == 0 ? tb::gen_atomic(0, 100 + i, spec) : tb::gen_composite(1, 200 + i, spec);
      inst.id = "v" + std::to_string(cls) + "_" + std::to_string(i);
      videos.push_back(std::move(inst));
    }
  // One deliberately short video.
  tb::VideoInstance short_video;
  short_video.id = "too_short";
  short_video.video = tb::Video(8, 32, 32, 3);
  videos.push_back(std::move(short_video));

  tb::EncoderWeights inv(2, 8, tb::Role::InvariantTeacher, 51);
  tb::EncoderWeights dist(2, 8, tb::Role::DistinctiveTeacher, 52);

  std::vector<const tb::VideoInstance*> ptrs;
  for (const auto& v : videos) ptrs.push_back(&v);
  tb::ScoringOptions options{4, 8, 16};
  const auto cache = tb::precompute_scores(inv, dist, ptrs, options, 0xa, 0xb);
  CHECK(cache.records.size() == 7);
  CHECK(cache.records.at("too_short").skipped);
  CHECK(cache.records.at("too_short").score == doctest::Approx(0.5));
  for (const auto& [id, rec] : cache.records) {
    CHECK(rec.score >= 0.0);
    CHECK(rec.score <= 1.0);
    if (!rec.skipped) {
      CHECK((rec.c_invariant - rec.c_invariant.transpose()).norm() <= 1e-6);
      CHECK((rec.c_distinctive - rec.c_distinctive.transpose()).norm() <= 1e-6);
    }
  }

  // Determinism: recomputation yields identical scores.
  const auto cache2 = tb::precompute_scores(inv, dist, ptrs, options, 0xa, 0xb);
  for (const auto& [id, rec] : cache.records)
    CHECK(cache2.records.at(id).score == rec.score);

  bool missing = false;
  CHECK(cache.score_or_default("unknown_video", &missing) == doctest::Approx(0.5));
  CHECK(missing);
}
