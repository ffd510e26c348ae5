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

#include "timebalance/balance.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "timebalance/common.hpp"

namespace tb {

Eigen::MatrixXd similarity_matrix(const std::vector<Vec>& z_list) {
  const auto n = static_cast<Eigen::Index>(z_list.size());
  check_contract(n >= 2, "similarity matrix needs at least 2 embeddings");
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    c(a, a) = 1.0;
    for (Eigen::Index b = a + 1; b < n; ++b) {
      const double na = z_list[a].norm(), nb = z_list[b].norm();
      check_contract(na > 0.0 && nb > 0.0, "zero embedding");
      const double cos_ab = z_list[a].dot(z_list[b]) / (na * nb);
      c(a, b) = cos_ab;
      c(b, a) = cos_ab;
    }
  }
  return c;
}

double similarity_score_raw(const Eigen::MatrixXd& c_invariant,
                            const Eigen::MatrixXd& c_distinctive) {
  const auto n = c_invariant.rows();
  check_contract(c_invariant.cols() == n && c_distinctive.rows() == n &&
                     c_distinctive.cols() == n,
                 "similarity matrices must be square and equally sized");
  check_contract(n >= 2, "similarity score needs n >= 2");
  double sum = 0.0;
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b)
      if (a != b) sum += c_invariant(a, b) + c_distinctive(a, b);
  return sum / (2.0 * static_cast<double>(n) * static_cast<double>(n - 1));
}

double similarity_score(const Eigen::MatrixXd& c_invariant,
                        const Eigen::MatrixXd& c_distinctive) {
  return std::clamp(similarity_score_raw(c_invariant, c_distinctive), 0.0, 1.0);
}

Vec combine_teachers(const Vec& p_invariant, const Vec& p_distinctive, double s) {
  check_contract(p_invariant.size() == p_distinctive.size(), "prediction length mismatch");
  check_contract(s >= 0.0 && s <= 1.0, "similarity score outside [0,1]");
  return s * p_invariant + (1.0 - s) * p_distinctive;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  const int len = std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

// Row-major off-diagonal order used by the cache lines.
std::vector<double> off_diagonals(const Eigen::MatrixXd& c) {
  std::vector<double> out;
  for (Eigen::Index a = 0; a < c.rows(); ++a)
    for (Eigen::Index b = 0; b < c.cols(); ++b)
      if (a != b) out.push_back(c(a, b));
  return out;
}

Eigen::MatrixXd from_off_diagonals(const std::vector<double>& values, int n, std::size_t base) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(n, n);
  std::size_t k = base;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (a != b) c(a, b) = values[k++];
  return c;
}

}  // namespace

void save_score_cache(const std::filesystem::path& path, const ScoreCache& cache) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write score cache: " + path.string());
  char hexbuf[32];
  os << "# timebalance-scores v1\n";
  std::snprintf(hexbuf, sizeof(hexbuf), "%016llx",
                static_cast<unsigned long long>(cache.invariant_hash));
  os << "# teacher_invariant " << hexbuf << "\n";
  std::snprintf(hexbuf, sizeof(hexbuf), "%016llx",
                static_cast<unsigned long long>(cache.distinctive_hash));
  os << "# teacher_distinctive " << hexbuf << "\n";
  os << "# n " << cache.n << "\n";
  for (const auto& [id, rec] : cache.records) {
    os << id << '\t' << format_double(rec.score);
    for (double v : off_diagonals(rec.c_invariant)) os << '\t' << format_double(v);
    for (double v : off_diagonals(rec.c_distinctive)) os << '\t' << format_double(v);
    os << '\n';
  }
  if (!os) throw DataError("score cache write failed: " + path.string());
}

ScoreCache load_score_cache(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open score cache: " + path.string());
  ScoreCache cache;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string tag;
      hs >> tag;
      if (tag == "teacher_invariant" || tag == "teacher_distinctive") {
        std::string hex;
        hs >> hex;
        const std::uint64_t v = std::strtoull(hex.c_str(), nullptr, 16);
        (tag == "teacher_invariant" ? cache.invariant_hash : cache.distinctive_hash) = v;
      } else if (tag == "n") {
        hs >> cache.n;
      }
      continue;
    }
    std::istringstream ls(line);
    std::string id;
    if (!std::getline(ls, id, '\t'))
      throw DataError("score cache line " + std::to_string(line_no) + ": bad record");
    std::vector<double> values;
    std::string tok;
    while (std::getline(ls, tok, '\t')) values.push_back(std::strtod(tok.c_str(), nullptr));
    const int n = cache.n;
    if (n < 2 || values.size() != 1 + 2 * static_cast<std::size_t>(n) * (n - 1))
      throw DataError("score cache line " + std::to_string(line_no) +
                      ": wrong number of values");
    SimilarityRecord rec;
    rec.video_id = id;
    rec.score = values[0];
    rec.c_invariant = from_off_diagonals(values, n, 1);
    rec.c_distinctive = from_off_diagonals(values, n, 1 + static_cast<std::size_t>(n) * (n - 1));
    cache.records.emplace(id, std::move(rec));
  }
  return cache;
}

std::optional<ScoreCache> maybe_load_score_cache(const std::filesystem::path& path,
                                                 std::uint64_t invariant_hash,
                                                 std::uint64_t distinctive_hash) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  ScoreCache cache = load_score_cache(path);
  if (cache.invariant_hash != invariant_hash || cache.distinctive_hash != distinctive_hash)
    return std::nullopt;
  return cache;
}

ScoreCache precompute_scores(EncoderWeights& invariant_teacher,
                             EncoderWeights& distinctive_teacher,
                             const std::vector<const VideoInstance*>& videos,
                             const ScoringOptions& options, std::uint64_t invariant_hash,
                             std::uint64_t distinctive_hash) {
  check_contract(options.n >= 2, "scoring needs n >= 2 clips");
  ScoreCache cache;
  cache.invariant_hash = invariant_hash;
  cache.distinctive_hash = distinctive_hash;
  cache.n = options.n;

  for (const VideoInstance* video : videos) {
    SimilarityRecord rec;
    rec.video_id = video->id;
    if (video->video.frames < options.n * options.clip_len) {
      std::cerr << "warning: video '" << video->id << "' too short for scoring ("
                << video->video.frames << " frames); defaulting s = 0.5\n";
      rec.skipped = true;
      rec.score = 0.5;
      rec.c_invariant = Eigen::MatrixXd::Identity(options.n, options.n);
      rec.c_distinctive = Eigen::MatrixXd::Identity(options.n, options.n);
      cache.records.emplace(rec.video_id, std::move(rec));
      continue;
    }
    const ClipSet clips =
        sample_consecutive_clips(*video, options.n, options.clip_len, StartPolicy::fixed(0));
    std::vector<Vec> z_inv, z_dist;
    for (const Video& raw : clips.clips) {
      const Video clip = center_crop_resize(raw, 1.0, options.input_size, options.input_size);
      const auto vol = to_volume<float>(clip);
      for (auto* teacher : {&invariant_teacher, &distinctive_teacher}) {
        const auto feat = teacher->encode_clip(vol);
        MatX<float> row(1, feat.pooled.size());
        row.row(0) = feat.pooled.transpose();
        const MatX<float> z = teacher->project(row, /*train=*/false);
        Vec zd = z.row(0).transpose().cast<double>();
        (teacher == &invariant_teacher ? z_inv : z_dist).push_back(std::move(zd));
      }
    }
    rec.c_invariant = similarity_matrix(z_inv);
    rec.c_distinctive = similarity_matrix(z_dist);
    rec.score = similarity_score(rec.c_invariant, rec.c_distinctive);
    cache.records.emplace(rec.video_id, std::move(rec));
  }
  return cache;
}

}  // namespace tb
