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

#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "timebalance/datamodel.hpp"
#include "timebalance/encoder.hpp"
#include "timebalance/losses.hpp"

namespace tb {

// Per-video temporal self-similarity matrices of both teachers and the
// resulting instance similarity score.
struct SimilarityRecord {
  std::string video_id;
  Eigen::MatrixXd c_invariant;    // [n, n]
  Eigen::MatrixXd c_distinctive;  // [n, n]
  double score = 0.5;             // in [0, 1]
  bool skipped = false;           // video too short; score defaulted
};

// Cosine similarities between all pairs of clip embeddings: symmetric with a
// unit diagonal.
Eigen::MatrixXd similarity_matrix(const std::vector<Vec>& z_list);

// Average of the off-diagonal entries of both matrices, clamped to [0, 1].
// The raw (pre-clamp) value is exposed for monotonicity checks.
double similarity_score_raw(const Eigen::MatrixXd& c_invariant,
                            const Eigen::MatrixXd& c_distinctive);
double similarity_score(const Eigen::MatrixXd& c_invariant,
                        const Eigen::MatrixXd& c_distinctive);

// Convex combination p = s * p_invariant + (1 - s) * p_distinctive.
Vec combine_teachers(const Vec& p_invariant, const Vec& p_distinctive, double s);

// --- Score cache --------------------------------------------------------------
// Text format: header lines carrying the teacher checkpoint hashes and n,
// then one line per video: id <TAB> s <TAB> 2n(n-1) raw off-diagonal values
// (C_invariant row-major without the diagonal, then C_distinctive).

struct ScoreCache {
  std::uint64_t invariant_hash = 0;
  std::uint64_t distinctive_hash = 0;
  int n = 0;
  std::map<std::string, SimilarityRecord> records;

  double score_or_default(const std::string& video_id, bool* missing = nullptr) const {
    auto it = records.find(video_id);
    if (it == records.end()) {
      if (missing) *missing = true;
      return 0.5;
    }
    if (missing) *missing = false;
    return it->second.score;
  }
};

void save_score_cache(const std::filesystem::path& path, const ScoreCache& cache);
ScoreCache load_score_cache(const std::filesystem::path& path);

// Loads the cache only when it exists and matches both teacher hashes.
std::optional<ScoreCache> maybe_load_score_cache(const std::filesystem::path& path,
                                                 std::uint64_t invariant_hash,
                                                 std::uint64_t distinctive_hash);

struct ScoringOptions {
  int n = 4;
  int clip_len = 16;    // pretraining clip length
  int input_size = 16;  // encoder input side; eval-path preprocessing
};

// Embeds n deterministically sampled clips (fixed(0), no augmentation, eval
// preprocessing) with each teacher's projection head and builds the records.
// Videos shorter than n * clip_len are recorded as skipped with s = 0.5.
ScoreCache precompute_scores(EncoderWeights& invariant_teacher,
                             EncoderWeights& distinctive_teacher,
                             const std::vector<const VideoInstance*>& videos,
                             const ScoringOptions& options, std::uint64_t invariant_hash,
                             std::uint64_t distinctive_hash);

}  // namespace tb
