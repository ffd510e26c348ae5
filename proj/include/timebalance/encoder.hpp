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

#include <filesystem>
#include <memory>
#include <optional>

#include "timebalance/datamodel.hpp"
#include "timebalance/nn.hpp"

namespace tb {

enum class Role : std::uint32_t {
  InvariantTeacher = 0,
  DistinctiveTeacher = 1,
  Student = 2,
};

const char* role_name(Role role);

// Pooled/unpooled features of one clip after spatial pooling.
template <typename S>
struct ClipFeature {
  MatX<S> unpooled;  // [T', feat_dim]
  VecX<S> pooled;    // temporal mean of unpooled
};

// Toy video encoder: four (conv3x3x3 -> instance norm -> ReLU -> pool)
// blocks with total temporal stride 4, a linear classifier on the pooled
// feature, and a projection MLP (Linear -> BatchNorm -> ReLU -> Linear ->
// BatchNorm -> L2 norm) mapping feat_dim -> feat_dim/4 -> proj_dim.
template <typename S>
class EncoderNet {
 public:
  static constexpr int kFeatDim = 128;
  static constexpr int kChannels[4] = {8, 16, 32, kFeatDim};
  static constexpr int kTemporalStride = 4;

  EncoderNet(int num_classes, int proj_dim, Role role, std::uint64_t init_seed)
      : conv1_("backbone.block1.conv", 3, kChannels[0]),
        norm1_("backbone.block1.norm", kChannels[0]),
        pool1_(2, 2, 2),
        conv2_("backbone.block2.conv", kChannels[0], kChannels[1]),
        norm2_("backbone.block2.norm", kChannels[1]),
        pool2_(2, 2, 2),
        conv3_("backbone.block3.conv", kChannels[1], kChannels[2]),
        norm3_("backbone.block3.norm", kChannels[2]),
        pool3_(1, 2, 2),
        conv4_("backbone.block4.conv", kChannels[2], kChannels[3]),
        norm4_("backbone.block4.norm", kChannels[3]),
        classifier_("classifier", kFeatDim, num_classes),
        proj1_("projector.fc1", kFeatDim, kFeatDim / 4, /*with_bias=*/true),
        proj_bn1_("projector.bn1", kFeatDim / 4),
        proj2_("projector.fc2", kFeatDim / 4, proj_dim, /*with_bias=*/false),
        proj_bn2_("projector.bn2", proj_dim),
        num_classes_(num_classes),
        proj_dim_(proj_dim),
        role_(role) {
    check_contract(num_classes >= 2, "need at least 2 classes");
    check_contract(proj_dim >= 2, "projection dimension too small");
    Rng rng(derive_seed({0xe2c0de2u, init_seed}));
    conv1_.init_he(rng);
    conv2_.init_he(rng);
    conv3_.init_he(rng);
    conv4_.init_he(rng);
    classifier_.init_he(rng);
    proj1_.init_he(rng);
    proj2_.init_he(rng);
  }

  int num_classes() const { return num_classes_; }
  int proj_dim() const { return proj_dim_; }
  Role role() const { return role_; }
  void set_role(Role role) { role_ = role; }

  // Parameters in declaration order; the checkpoint layout follows this.
  std::vector<Param<S>*> params() {
    return {&conv1_.weight,        &conv1_.bias,
            &norm1_.gamma,         &norm1_.beta,
            &conv2_.weight,        &conv2_.bias,
            &norm2_.gamma,         &norm2_.beta,
            &conv3_.weight,        &conv3_.bias,
            &norm3_.gamma,         &norm3_.beta,
            &conv4_.weight,        &conv4_.bias,
            &norm4_.gamma,         &norm4_.beta,
            &classifier_.weight,   &classifier_.bias,
            &proj1_.weight,        &proj1_.bias,
            &proj_bn1_.gamma,      &proj_bn1_.beta,
            &proj_bn1_.running_mean, &proj_bn1_.running_var,
            &proj2_.weight,
            &proj_bn2_.gamma,      &proj_bn2_.beta,
            &proj_bn2_.running_mean, &proj_bn2_.running_var};
  }
  std::vector<const Param<S>*> params() const {
    auto* self = const_cast<EncoderNet<S>*>(this);
    std::vector<const Param<S>*> out;
    for (auto* p : self->params()) out.push_back(p);
    return out;
  }

  void zero_grads() {
    for (auto* p : params()) p->zero_grad();
  }

  // --- encode ----------------------------------------------------------------

  struct EncodeCtx {
    typename Conv3d<S>::Ctx conv1, conv2, conv3, conv4;
    typename InstanceNorm<S>::Ctx norm1, norm2, norm3, norm4;
    ReluCtx<S> relu1, relu2, relu3, relu4;
    typename MaxPool3d<S>::Ctx pool1, pool2, pool3;
    int final_t = 0, final_h = 0, final_w = 0;
  };

  ClipFeature<S> encode_clip(const Volume<S>& clip, EncodeCtx* ctx = nullptr) const {
    check_contract(clip.ch == 3, "encoder expects 3 input channels");
    check_contract(clip.t % kTemporalStride == 0, "clip length must be divisible by 4");
    check_contract(clip.h % 8 == 0 && clip.w % 8 == 0,
                   "spatial input must be divisible by 8");
    EncodeCtx local;
    EncodeCtx& c = ctx ? *ctx : local;
    Volume<S> x = conv1_.forward(clip, c.conv1);
    x = norm1_.forward(x, c.norm1);
    x = relu_forward(x, c.relu1);
    x = pool1_.forward(x, c.pool1);
    x = conv2_.forward(x, c.conv2);
    x = norm2_.forward(x, c.norm2);
    x = relu_forward(x, c.relu2);
    x = pool2_.forward(x, c.pool2);
    x = conv3_.forward(x, c.conv3);
    x = norm3_.forward(x, c.norm3);
    x = relu_forward(x, c.relu3);
    x = pool3_.forward(x, c.pool3);
    x = conv4_.forward(x, c.conv4);
    x = norm4_.forward(x, c.norm4);
    x = relu_forward(x, c.relu4);
    c.final_t = x.t;
    c.final_h = x.h;
    c.final_w = x.w;

    ClipFeature<S> feat;
    feat.unpooled.resize(x.t, kFeatDim);
    const S inv_spatial = S(1) / static_cast<S>(x.h * x.w);
    for (int f = 0; f < kFeatDim; ++f) {
      for (int tt = 0; tt < x.t; ++tt) {
        S acc = S(0);
        for (int y = 0; y < x.h; ++y)
          for (int xx = 0; xx < x.w; ++xx) acc += x.at(f, tt, y, xx);
        feat.unpooled(tt, f) = acc * inv_spatial;
      }
    }
    feat.pooled = feat.unpooled.colwise().mean().transpose();
    return feat;
  }

  // Backward through the backbone from a gradient on the unpooled feature.
  void encode_backward(const MatX<S>& dunpooled, EncodeCtx& c) {
    Volume<S> dx(kFeatDim, c.final_t, c.final_h, c.final_w);
    const S inv_spatial = S(1) / static_cast<S>(c.final_h * c.final_w);
    for (int f = 0; f < kFeatDim; ++f)
      for (int tt = 0; tt < c.final_t; ++tt) {
        const S g = dunpooled(tt, f) * inv_spatial;
        for (int y = 0; y < c.final_h; ++y)
          for (int xx = 0; xx < c.final_w; ++xx) dx.at(f, tt, y, xx) = g;
      }
    dx = relu_backward(dx, c.relu4);
    dx = norm4_.backward(dx, c.norm4);
    dx = conv4_.backward(dx, c.conv4);
    dx = pool3_.backward(dx, c.pool3);
    dx = relu_backward(dx, c.relu3);
    dx = norm3_.backward(dx, c.norm3);
    dx = conv3_.backward(dx, c.conv3);
    dx = pool2_.backward(dx, c.pool2);
    dx = relu_backward(dx, c.relu2);
    dx = norm2_.backward(dx, c.norm2);
    dx = conv2_.backward(dx, c.conv2);
    dx = pool1_.backward(dx, c.pool1);
    dx = relu_backward(dx, c.relu1);
    dx = norm1_.backward(dx, c.norm1);
    (void)conv1_.backward(dx, c.conv1);
  }

  // Spreads a pooled-feature gradient uniformly over the unpooled rows.
  static MatX<S> pooled_to_unpooled_grad(const VecX<S>& dpooled, int t_prime) {
    MatX<S> d(t_prime, dpooled.size());
    const S inv = S(1) / static_cast<S>(t_prime);
    for (int tt = 0; tt < t_prime; ++tt) d.row(tt) = dpooled.transpose() * inv;
    return d;
  }

  // --- temporal slices ---------------------------------------------------------

  // Partitions the unpooled sequence into n contiguous equal segments and
  // mean-pools each one.
  static MatX<S> temporal_slices(const MatX<S>& unpooled, int n) {
    check_contract(n >= 1, "slice count must be positive");
    check_contract(unpooled.rows() % n == 0,
                   "unpooled length not divisible by slice count");
    const int seg = static_cast<int>(unpooled.rows()) / n;
    MatX<S> slices(n, unpooled.cols());
    for (int s = 0; s < n; ++s)
      slices.row(s) = unpooled.middleRows(s * seg, seg).colwise().mean();
    return slices;
  }

  static MatX<S> temporal_slices_backward(const MatX<S>& dslices, int t_prime) {
    const int n = static_cast<int>(dslices.rows());
    const int seg = t_prime / n;
    MatX<S> d(t_prime, dslices.cols());
    const S inv = S(1) / static_cast<S>(seg);
    for (int s = 0; s < n; ++s)
      for (int k = 0; k < seg; ++k) d.row(s * seg + k) = dslices.row(s) * inv;
    return d;
  }

  // --- projection head ---------------------------------------------------------

  struct ProjectCtx {
    MatX<S> input, h1, h1n, h1r, h2;
    typename BatchNorm1d<S>::Ctx bn1, bn2;
    ReluCtx<S> relu;
    L2NormCtx<S> l2;
  };

  // Rows of `pooled` are projected to unit-norm rows of dimension proj_dim.
  MatX<S> project(const MatX<S>& pooled, bool train, ProjectCtx* ctx = nullptr) {
    ProjectCtx local;
    ProjectCtx& c = ctx ? *ctx : local;
    c.input = pooled;
    c.h1 = proj1_.forward(pooled);
    c.h1n = proj_bn1_.forward(c.h1, train, c.bn1);
    c.h1r = matrix_relu(c.h1n, c.relu);
    c.h2 = proj2_.forward(c.h1r);
    MatX<S> h2n = proj_bn2_.forward(c.h2, train, c.bn2);
    return l2_normalize_rows(h2n, c.l2);
  }

  MatX<S> project_backward(const MatX<S>& dz, ProjectCtx& c) {
    MatX<S> d = l2_normalize_rows_backward(dz, c.l2);
    d = proj_bn2_.backward(d, c.bn2);
    d = proj2_.backward(c.h1r, d);
    d = matrix_relu_backward(d, c.relu);
    d = proj_bn1_.backward(d, c.bn1);
    return proj1_.backward(c.input, d);
  }

  // --- classifier ----------------------------------------------------------------

  VecX<S> classify_logits(const VecX<S>& pooled) const {
    MatX<S> row(1, pooled.size());
    row.row(0) = pooled.transpose();
    return classifier_.forward(row).row(0).transpose();
  }

  VecX<S> classifier_backward(const VecX<S>& pooled, const VecX<S>& dlogits) {
    MatX<S> row(1, pooled.size());
    row.row(0) = pooled.transpose();
    MatX<S> drow(1, dlogits.size());
    drow.row(0) = dlogits.transpose();
    return classifier_.backward(row, drow).row(0).transpose();
  }

 private:
  static MatX<S> matrix_relu(const MatX<S>& x, ReluCtx<S>& ctx) {
    MatX<S> y = x;
    ctx.mask.assign(static_cast<std::size_t>(x.size()), false);
    S* p = y.data();
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (p[i] > S(0)) {
        ctx.mask[static_cast<std::size_t>(i)] = true;
      } else {
        p[i] = S(0);
      }
    }
    return y;
  }

  static MatX<S> matrix_relu_backward(const MatX<S>& dy, const ReluCtx<S>& ctx) {
    MatX<S> dx = dy;
    S* p = dx.data();
    for (Eigen::Index i = 0; i < dx.size(); ++i)
      if (!ctx.mask[static_cast<std::size_t>(i)]) p[i] = S(0);
    return dx;
  }

  Conv3d<S> conv1_;
  InstanceNorm<S> norm1_;
  MaxPool3d<S> pool1_;
  Conv3d<S> conv2_;
  InstanceNorm<S> norm2_;
  MaxPool3d<S> pool2_;
  Conv3d<S> conv3_;
  InstanceNorm<S> norm3_;
  MaxPool3d<S> pool3_;
  Conv3d<S> conv4_;
  InstanceNorm<S> norm4_;
  Linear<S> classifier_;
  Linear<S> proj1_;
  BatchNorm1d<S> proj_bn1_;
  Linear<S> proj2_;
  BatchNorm1d<S> proj_bn2_;
  int num_classes_;
  int proj_dim_;
  Role role_;
};

// Converts a [F, H, W, Ch] frame clip to the channel-major encoder input.
template <typename S>
Volume<S> to_volume(const Video& clip) {
  Volume<S> vol(clip.channels, clip.frames, clip.height, clip.width);
  for (int t = 0; t < clip.frames; ++t)
    for (int y = 0; y < clip.height; ++y)
      for (int x = 0; x < clip.width; ++x)
        for (int c = 0; c < clip.channels; ++c)
          vol.at(c, t, y, x) = static_cast<S>(clip.at(t, y, x, c));
  return vol;
}

using EncoderWeights = EncoderNet<float>;

// --- Checkpoints -------------------------------------------------------------
// Binary layout: magic "TBCK", format version, role tag, model dims, a shape
// table (name + element count per parameter in declaration order), a content
// hash, then float32 little-endian parameter blobs and an optional optimizer
// section.

struct AdamState;  // defined in optimizer.hpp

void save_checkpoint(const EncoderWeights& net, const AdamState* optimizer,
                     const std::filesystem::path& path);

struct LoadedCheckpoint {
  std::unique_ptr<EncoderWeights> net;
  std::unique_ptr<AdamState> optimizer;  // null when the file carries none
  std::uint64_t content_hash = 0;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Reads just the stored content hash (cheap cache-key lookup).
std::uint64_t checkpoint_hash(const std::filesystem::path& path);

}  // namespace tb
