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

// Brute-force reference implementations used as test oracles. Everything here
// is written with explicit loops and direct exp ratios, independent of the
// library's vectorized, log-space code paths. Test-only.

#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "timebalance/datamodel.hpp"

namespace oracle {

using Vecs = std::vector<std::vector<double>>;          // [index][dim]
using Grid = std::vector<Vecs>;                         // [instance][timestamp][dim]

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline double h(const std::vector<double>& u, const std::vector<double>& v, double tau) {
  return std::exp(dot(u, v) / (norm(u) * norm(v) * tau));
}

// Eq.-1-style invariant loss: ordered timestamp pairs, denominator = positive
// plus both projections of every other instance; mean over instances.
inline double invariant_loss(const Grid& z, double tau) {
  const std::size_t num_instances = z.size();
  const std::size_t n = z[0].size();
  double total = 0.0;
  for (std::size_t i = 0; i < num_instances; ++i) {
    double li = 0.0;
    for (std::size_t t1 = 0; t1 < n; ++t1) {
      for (std::size_t t2 = 0; t2 < n; ++t2) {
        if (t2 == t1) continue;
        const double pos = h(z[i][t1], z[i][t2], tau);
        double denom = pos;
        for (std::size_t j = 0; j < num_instances; ++j) {
          if (j == i) continue;
          denom += h(z[i][t1], z[j][t1], tau);
          denom += h(z[i][t1], z[j][t2], tau);
        }
        li += -std::log(pos / denom);
      }
    }
    total += li;
  }
  return total / static_cast<double>(num_instances);
}

// Eq.-3-style pooled distinctive loss; the positive is not in the denominator.
inline double distinctive_pooled_loss(const Grid& z, const Grid& z_tilde, double tau) {
  const std::size_t num_instances = z.size();
  const std::size_t n = z[0].size();
  double total = 0.0;
  for (std::size_t i = 0; i < num_instances; ++i) {
    double li = 0.0;
    for (std::size_t t1 = 0; t1 < n; ++t1) {
      const double pos = h(z[i][t1], z_tilde[i][t1], tau);
      double denom = 0.0;
      for (std::size_t t2 = 0; t2 < n; ++t2) {
        if (t2 == t1) continue;
        denom += h(z[i][t1], z[i][t2], tau);
        denom += h(z[i][t1], z_tilde[i][t2], tau);
      }
      li += -std::log(pos / denom);
    }
    total += li;
  }
  return total / static_cast<double>(num_instances);
}

// Unpooled distinctive loss: anchor t1 sees local-local, local-slice and
// slice-slice misalignments in the denominator.
inline double distinctive_unpooled_loss(const Grid& local, const Grid& slices, double tau) {
  const std::size_t num_instances = local.size();
  const std::size_t n = local[0].size();
  double total = 0.0;
  for (std::size_t i = 0; i < num_instances; ++i) {
    double li = 0.0;
    for (std::size_t t1 = 0; t1 < n; ++t1) {
      const double pos = h(local[i][t1], slices[i][t1], tau);
      double denom = 0.0;
      for (std::size_t t2 = 0; t2 < n; ++t2) {
        if (t2 == t1) continue;
        denom += h(local[i][t1], local[i][t2], tau);
        denom += h(local[i][t1], slices[i][t2], tau);
        denom += h(slices[i][t1], slices[i][t2], tau);
      }
      li += -std::log(pos / denom);
    }
    total += li;
  }
  return total / static_cast<double>(num_instances);
}

// Eq. 5.
inline Vecs similarity_matrix(const Vecs& zs) {
  const std::size_t n = zs.size();
  Vecs c(n, std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      c[a][b] = dot(zs[a], zs[b]) / (norm(zs[a]) * norm(zs[b]));
  return c;
}

// Eq. 6 without the clamp.
inline double similarity_score(const Vecs& ci, const Vecs& cd) {
  const std::size_t n = ci.size();
  double sum = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b) sum += ci[a][b] + cd[a][b];
  return sum / (2.0 * static_cast<double>(n) * static_cast<double>(n - 1));
}

// Eq. 7.
inline std::vector<double> combine(const std::vector<double>& pi, const std::vector<double>& pd,
                                   double s) {
  std::vector<double> out(pi.size());
  for (std::size_t c = 0; c < pi.size(); ++c) out[c] = s * pi[c] + (1.0 - s) * pd[c];
  return out;
}

// Eq. 8.
inline double l2_distill(const std::vector<double>& pt, const std::vector<double>& ps) {
  double v = 0.0;
  for (std::size_t c = 0; c < pt.size(); ++c) v += (pt[c] - ps[c]) * (pt[c] - ps[c]);
  return v;
}

// Central finite difference of `eval` with respect to the value in `slot`.
inline double central_diff(const std::function<double()>& eval, double& slot,
                           double step = 1e-5) {
  const double orig = slot;
  slot = orig + step;
  const double up = eval();
  slot = orig - step;
  const double down = eval();
  slot = orig;
  return (up - down) / (2.0 * step);
}

inline bool grad_close(double analytic, double fd, double rtol = 1e-4, double atol = 1e-8) {
  return std::abs(analytic - fd) <= atol + rtol * std::max(std::abs(analytic), std::abs(fd));
}

// Pixel-space nearest-centroid classifier over whole videos.
class CentroidClassifier {
 public:
  void fit(const std::vector<const tb::VideoInstance*>& train, int num_classes) {
    centroids_.assign(num_classes, {});
    counts_.assign(num_classes, 0);
    for (const auto* v : train) {
      auto& c = centroids_[*v->label];
      if (c.empty()) c.assign(v->video.data.size(), 0.0);
      for (std::size_t i = 0; i < v->video.data.size(); ++i) c[i] += v->video.data[i];
      counts_[*v->label] += 1;
    }
    for (std::size_t k = 0; k < centroids_.size(); ++k)
      for (auto& x : centroids_[k]) x /= static_cast<double>(counts_[k]);
  }

  int predict(const tb::Video& video) const {
    int best = -1;
    double best_dist = 0.0;
    for (std::size_t k = 0; k < centroids_.size(); ++k) {
      double d = 0.0;
      for (std::size_t i = 0; i < video.data.size(); ++i) {
        const double diff = video.data[i] - centroids_[k][i];
        d += diff * diff;
      }
      if (best < 0 || d < best_dist) {
        best = static_cast<int>(k);
        best_dist = d;
      }
    }
    return best;
  }

  double accuracy(const std::vector<const tb::VideoInstance*>& test) const {
    std::size_t correct = 0;
    for (const auto* v : test)
      if (predict(v->video) == *v->label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(test.size());
  }

 private:
  std::vector<std::vector<double>> centroids_;
  std::vector<int> counts_;
};

// Mean cosine similarity between the flattened pixel vectors of the n
// consecutive clips of a video.
inline double mean_cross_clip_cosine(const tb::Video& video, int n, int clip_len) {
  const std::size_t clip_elems = static_cast<std::size_t>(clip_len) * video.height *
                                 video.width * video.channels;
  std::vector<std::vector<double>> clips;
  for (int t = 0; t < n; ++t) {
    std::vector<double> c(clip_elems);
    const std::size_t base = static_cast<std::size_t>(t) * clip_elems;
    for (std::size_t i = 0; i < clip_elems; ++i) c[i] = video.data[base + i];
    clips.push_back(std::move(c));
  }
  double sum = 0.0;
  int pairs = 0;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      sum += dot(clips[a], clips[b]) / (norm(clips[a]) * norm(clips[b]));
      ++pairs;
    }
  return sum / pairs;
}

}  // namespace oracle
