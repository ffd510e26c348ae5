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
#include <optional>
#include <vector>

namespace tb {

using Vec = Eigen::VectorXd;

// Projections indexed [instance][timestamp]; gradients use the same layout.
using ProjectionGrid = std::vector<std::vector<Vec>>;

// exp(cos(u1,u2)/tau). Symmetric in its arguments.
double kernel_h(const Vec& u1, const Vec& u2, double tau);

struct ContrastiveBatch {
  ProjectionGrid z;        // first augmented view, [B][n]
  ProjectionGrid z_tilde;  // optional second view, same layout (may be empty)
  double tau = 0.1;
};

// Temporally-invariant contrastive loss. Per instance, every ordered
// timestamp pair (t1, t2) anchors at z[i][t1]; the denominator holds the
// positive plus both same-timestamp and cross-timestamp projections of every
// other instance. Batch value is the mean over instances.
double loss_invariant(const ContrastiveBatch& batch, ProjectionGrid* dz = nullptr);

// Clip-level temporally-distinctive loss. Positive pair: same timestamp
// across the two views; negatives: all within-video cross-timestamp pairs.
// The positive is NOT part of the denominator, so values can be negative.
double loss_distinctive_pooled(const ContrastiveBatch& batch, ProjectionGrid* dz = nullptr,
                               ProjectionGrid* dz_tilde = nullptr);

// Fine-grained temporally-distinctive loss between local clip projections and
// the projections of the temporally-aligned slices of a global clip.
// For anchor timestamp t1 the denominator sums, over t2 != t1,
// h(local_t1, local_t2) + h(local_t1, slice_t2) + h(slice_t1, slice_t2);
// like the pooled variant it excludes the positive, so values can be negative.
double loss_distinctive_unpooled(const ProjectionGrid& local_z, const ProjectionGrid& slices_z,
                                 double tau, ProjectionGrid* dlocal = nullptr,
                                 ProjectionGrid* dslices = nullptr);

// --- Classification and distillation ----------------------------------------

Vec softmax(const Vec& logits);

// -log p[y] with an epsilon floor; the preferred training path goes through
// the logits overload (log-sum-exp).
double loss_cross_entropy(const Vec& p, int y);
double cross_entropy_from_logits(const Vec& logits, int y, Vec* dlogits = nullptr);

enum class DistillKind { L2, KL, JS };

// Teacher-to-student penalty between probability vectors. The gradient
// targets p_student only; the teacher side is a frozen constant.
double loss_distill(const Vec& p_teacher, const Vec& p_student, DistillKind kind = DistillKind::L2,
                    Vec* dp_student = nullptr);

// Same penalty chained through softmax so the gradient lands on the student's
// logits.
double distill_from_logits(const Vec& p_teacher, const Vec& student_logits,
                           DistillKind kind = DistillKind::L2, Vec* dlogits = nullptr);

// L_sup + omega * L_unsup; unlabeled samples pass an absent L_sup.
double loss_total(std::optional<double> l_sup, double l_unsup, double omega);

}  // namespace tb
