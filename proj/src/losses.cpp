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

#include "timebalance/losses.hpp"

#include <cmath>
#include <functional>

#include "timebalance/common.hpp"

namespace tb {

namespace {

constexpr double kProbFloor = 1e-12;

double cosine(const Vec& u, const Vec& v) {
  const double nu = u.norm(), nv = v.norm();
  check_contract(nu > 0.0 && nv > 0.0, "cosine of a zero vector");
  return u.dot(v) / (nu * nv);
}

// d cos(u,v)/du = v/(|u||v|) - cos * u/|u|^2 (and symmetrically for v).
void accumulate_cosine_grad(const Vec& u, const Vec& v, double cos_uv, double weight, Vec& du,
                            Vec& dv) {
  const double nu = u.norm(), nv = v.norm();
  du.noalias() += weight * (v / (nu * nv) - cos_uv / (nu * nu) * u);
  dv.noalias() += weight * (u / (nu * nv) - cos_uv / (nv * nv) * v);
}

// One -log softmax-style term in log-space. `entries` holds the scaled
// similarities a_k = cos_k / tau; entry 0 is the positive. With
// `positive_in_denominator` false the denominator runs over entries 1..K
// only (the literal Eq.-3-style convention; values can go negative).
// Fills dterm/da_k.
double log_ratio_term(const std::vector<double>& entries, bool positive_in_denominator,
                      std::vector<double>& dentries) {
  const std::size_t begin = positive_in_denominator ? 0 : 1;
  double m = entries[begin];
  for (std::size_t k = begin; k < entries.size(); ++k) m = std::max(m, entries[k]);
  double sum = 0.0;
  for (std::size_t k = begin; k < entries.size(); ++k) sum += std::exp(entries[k] - m);
  const double lse = m + std::log(sum);

  dentries.assign(entries.size(), 0.0);
  for (std::size_t k = begin; k < entries.size(); ++k)
    dentries[k] = std::exp(entries[k] - m) / sum;
  dentries[0] -= 1.0;
  return -entries[0] + lse;
}

void init_like(const ProjectionGrid& src, ProjectionGrid* dst) {
  if (!dst) return;
  dst->resize(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    (*dst)[i].resize(src[i].size());
    for (std::size_t t = 0; t < src[i].size(); ++t)
      (*dst)[i][t] = Vec::Zero(src[i][t].size());
  }
}

void scale_grid(ProjectionGrid* g, double s) {
  if (!g) return;
  for (auto& row : *g)
    for (auto& v : row) v *= s;
}

// A projection is addressed by (grid, instance, timestamp); grid 0 is the
// primary view, grid 1 the secondary (z_tilde, or the global-clip slices).
struct Ref {
  int grid;
  std::size_t i, t;
};

using PairList = std::vector<std::pair<Ref, Ref>>;

// Evaluates a family of -log ratio terms over up to two projection grids and
// accumulates gradients. `terms(i, k, list)` fills the pair list for the k-th
// term of instance i, entry 0 being the positive pair. Returns the
// per-instance mean of the summed terms.
double contrastive_eval(
    const ProjectionGrid& g0, const ProjectionGrid* g1, double tau,
    bool positive_in_denominator, std::size_t num_instances, std::size_t terms_per_instance,
    const std::function<void(std::size_t, std::size_t, PairList&)>& terms, ProjectionGrid* d0,
    ProjectionGrid* d1) {
  if (!(tau > 0.0)) throw ContractError("temperature must be positive");
  const double inv_tau = 1.0 / tau;
  auto vec_at = [&](const Ref& r) -> const Vec& {
    return r.grid == 0 ? g0[r.i][r.t] : (*g1)[r.i][r.t];
  };
  auto grad_at = [&](const Ref& r) -> Vec& {
    return r.grid == 0 ? (*d0)[r.i][r.t] : (*d1)[r.i][r.t];
  };

  PairList list;
  std::vector<double> entries, dentries;
  double total = 0.0;
  for (std::size_t i = 0; i < num_instances; ++i) {
    for (std::size_t k = 0; k < terms_per_instance; ++k) {
      list.clear();
      terms(i, k, list);
      entries.clear();
      for (const auto& [a, b] : list) entries.push_back(cosine(vec_at(a), vec_at(b)) * inv_tau);
      total += log_ratio_term(entries, positive_in_denominator, dentries);
      if (d0) {
        for (std::size_t e = 0; e < list.size(); ++e) {
          const double w = dentries[e] * inv_tau;
          if (w == 0.0) continue;
          const auto& [a, b] = list[e];
          accumulate_cosine_grad(vec_at(a), vec_at(b), entries[e] * tau, w, grad_at(a),
                                 grad_at(b));
        }
      }
    }
  }
  const double scale = 1.0 / static_cast<double>(num_instances);
  scale_grid(d0, scale);
  scale_grid(d1, scale);
  return total * scale;
}

}  // namespace

double kernel_h(const Vec& u1, const Vec& u2, double tau) {
  if (!(tau > 0.0)) throw ContractError("temperature must be positive");
  return std::exp(cosine(u1, u2) / tau);
}

double loss_invariant(const ContrastiveBatch& batch, ProjectionGrid* dz) {
  const std::size_t num_instances = batch.z.size();
  check_contract(num_instances >= 2, "invariant loss needs at least 2 instances");
  const std::size_t n = batch.z.front().size();
  check_contract(n >= 2, "invariant loss needs at least 2 timestamps");
  for (const auto& row : batch.z) check_contract(row.size() == n, "ragged projection grid");

  init_like(batch.z, dz);
  // One term per ordered timestamp pair; k enumerates (t1, t2), t2 != t1.
  return contrastive_eval(
      batch.z, nullptr, batch.tau, /*positive_in_denominator=*/true, num_instances,
      n * (n - 1),
      [&](std::size_t i, std::size_t k, PairList& list) {
        const std::size_t t1 = k / (n - 1);
        std::size_t t2 = k % (n - 1);
        if (t2 >= t1) ++t2;
        list.push_back({{0, i, t1}, {0, i, t2}});  // positive
        for (std::size_t j = 0; j < num_instances; ++j) {
          if (j == i) continue;
          list.push_back({{0, i, t1}, {0, j, t1}});
          list.push_back({{0, i, t1}, {0, j, t2}});
        }
      },
      dz, nullptr);
}

double loss_distinctive_pooled(const ContrastiveBatch& batch, ProjectionGrid* dz,
                               ProjectionGrid* dz_tilde) {
  const std::size_t num_instances = batch.z.size();
  check_contract(num_instances >= 1, "empty batch");
  check_contract(batch.z_tilde.size() == num_instances,
                 "distinctive loss needs the second augmented view");
  const std::size_t n = batch.z.front().size();
  check_contract(n >= 2, "distinctive loss needs at least 2 timestamps");
  for (std::size_t i = 0; i < num_instances; ++i)
    check_contract(batch.z[i].size() == n && batch.z_tilde[i].size() == n,
                   "ragged projection grid");
  check_contract((dz == nullptr) == (dz_tilde == nullptr),
                 "pass both gradient grids or neither");

  init_like(batch.z, dz);
  init_like(batch.z_tilde, dz_tilde);
  return contrastive_eval(
      batch.z, &batch.z_tilde, batch.tau, /*positive_in_denominator=*/false, num_instances, n,
      [&](std::size_t i, std::size_t t1, PairList& list) {
        list.push_back({{0, i, t1}, {1, i, t1}});  // positive: two views, same timestamp
        for (std::size_t t2 = 0; t2 < n; ++t2) {
          if (t2 == t1) continue;
          list.push_back({{0, i, t1}, {0, i, t2}});
          list.push_back({{0, i, t1}, {1, i, t2}});
        }
      },
      dz, dz_tilde);
}

double loss_distinctive_unpooled(const ProjectionGrid& local_z, const ProjectionGrid& slices_z,
                                 double tau, ProjectionGrid* dlocal, ProjectionGrid* dslices) {
  const std::size_t num_instances = local_z.size();
  check_contract(num_instances >= 1, "empty batch");
  check_contract(slices_z.size() == num_instances, "local/slice instance count mismatch");
  const std::size_t n = local_z.front().size();
  check_contract(n >= 2, "unpooled distinctive loss needs at least 2 timestamps");
  for (std::size_t i = 0; i < num_instances; ++i)
    check_contract(local_z[i].size() == n && slices_z[i].size() == n,
                   "local/slice timestamp count mismatch");
  check_contract((dlocal == nullptr) == (dslices == nullptr),
                 "pass both gradient grids or neither");

  init_like(local_z, dlocal);
  init_like(slices_z, dslices);
  return contrastive_eval(
      local_z, &slices_z, tau, /*positive_in_denominator=*/false, num_instances, n,
      [&](std::size_t i, std::size_t t1, PairList& list) {
        list.push_back({{0, i, t1}, {1, i, t1}});  // positive: temporally aligned pair
        for (std::size_t t2 = 0; t2 < n; ++t2) {
          if (t2 == t1) continue;
          list.push_back({{0, i, t1}, {0, i, t2}});
          list.push_back({{0, i, t1}, {1, i, t2}});
          list.push_back({{1, i, t1}, {1, i, t2}});
        }
      },
      dlocal, dslices);
}

Vec softmax(const Vec& logits) {
  const double m = logits.maxCoeff();
  Vec e = (logits.array() - m).exp();
  return e / e.sum();
}

double loss_cross_entropy(const Vec& p, int y) {
  check_contract(y >= 0 && y < p.size(), "label out of range");
  return -std::log(std::max(p[y], kProbFloor));
}

double cross_entropy_from_logits(const Vec& logits, int y, Vec* dlogits) {
  check_contract(y >= 0 && y < logits.size(), "label out of range");
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  if (dlogits) {
    *dlogits = softmax(logits);
    (*dlogits)[y] -= 1.0;
  }
  return lse - logits[y];
}

double loss_distill(const Vec& p_teacher, const Vec& p_student, DistillKind kind,
                    Vec* dp_student) {
  check_contract(p_teacher.size() == p_student.size(), "prediction length mismatch");
  const auto c = p_teacher.size();
  if (dp_student) *dp_student = Vec::Zero(c);
  switch (kind) {
    case DistillKind::L2: {
      const Vec diff = p_student - p_teacher;
      if (dp_student) *dp_student = 2.0 * diff;
      return diff.squaredNorm();
    }
    case DistillKind::KL: {
      double v = 0.0;
      for (Eigen::Index k = 0; k < c; ++k) {
        const double pt = std::max(p_teacher[k], kProbFloor);
        const double ps = std::max(p_student[k], kProbFloor);
        v += pt * (std::log(pt) - std::log(ps));
        if (dp_student) (*dp_student)[k] = -pt / ps;
      }
      return v;
    }
    case DistillKind::JS: {
      double v = 0.0;
      for (Eigen::Index k = 0; k < c; ++k) {
        const double pt = std::max(p_teacher[k], kProbFloor);
        const double ps = std::max(p_student[k], kProbFloor);
        const double m = 0.5 * (pt + ps);
        v += 0.5 * (pt * std::log(pt / m) + ps * std::log(ps / m));
        if (dp_student) (*dp_student)[k] = 0.5 * std::log(ps / m);
      }
      return v;
    }
  }
  throw ContractError("unknown distillation kind");
}

double distill_from_logits(const Vec& p_teacher, const Vec& student_logits, DistillKind kind,
                           Vec* dlogits) {
  const Vec p_student = softmax(student_logits);
  Vec dp;
  const double value = loss_distill(p_teacher, p_student, kind, dlogits ? &dp : nullptr);
  if (dlogits) {
    // Softmax Jacobian: d logit_k = p_k (g_k - sum_j g_j p_j).
    const double inner = dp.dot(p_student);
    *dlogits = (p_student.array() * (dp.array() - inner)).matrix();
  }
  return value;
}

double loss_total(std::optional<double> l_sup, double l_unsup, double omega) {
  check_contract(omega >= 0.0, "omega must be non-negative");
  return (l_sup ? *l_sup : 0.0) + omega * l_unsup;
}

}  // namespace tb
