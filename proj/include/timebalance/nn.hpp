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

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "timebalance/common.hpp"
#include "timebalance/rng.hpp"

// Minimal 3-D conv building blocks with hand-written backward passes.
// Everything is templated on the scalar so training runs in float while
// gradient checks instantiate the same code in double.

namespace tb {

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Buffers that Eigen maps must share one alignment across allocations;
// otherwise SIMD head/tail peeling regroups reductions per run and breaks
// bitwise reproducibility.
template <typename T>
using AVec = std::vector<T, Eigen::aligned_allocator<T>>;

// Channel-major activation volume [C, T, H, W].
template <typename S>
struct Volume {
  int ch = 0, t = 0, h = 0, w = 0;
  AVec<S> v;

  Volume() = default;
  Volume(int c_, int t_, int h_, int w_)
      : ch(c_), t(t_), h(h_), w(w_),
        v(static_cast<std::size_t>(c_) * t_ * h_ * w_, S(0)) {}

  S& at(int c, int tt, int y, int x) {
    return v[((static_cast<std::size_t>(c) * t + tt) * h + y) * w + x];
  }
  S at(int c, int tt, int y, int x) const {
    return v[((static_cast<std::size_t>(c) * t + tt) * h + y) * w + x];
  }
  std::size_t spatial_size() const { return static_cast<std::size_t>(t) * h * w; }
  std::size_t size() const { return v.size(); }
};

template <typename S>
struct Param {
  std::string name;
  std::vector<S> value;
  std::vector<S> grad;
  bool trainable = true;

  void init(std::string n, std::size_t count, bool train = true) {
    name = std::move(n);
    value.assign(count, S(0));
    grad.assign(count, S(0));
    trainable = train;
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), S(0)); }
};

// --- 3x3x3 convolution, stride 1, zero padding 1 ----------------------------

template <typename S>
class Conv3d {
 public:
  Conv3d(const std::string& name, int cin, int cout) : cin_(cin), cout_(cout) {
    weight.init(name + ".weight", static_cast<std::size_t>(cout) * cin * 27);
    bias.init(name + ".bias", static_cast<std::size_t>(cout));
  }

  void init_he(Rng& rng) {
    const double stddev = std::sqrt(2.0 / (cin_ * 27.0));
    for (auto& x : weight.value) x = static_cast<S>(rng.normal(0.0, stddev));
    std::fill(bias.value.begin(), bias.value.end(), S(0));
  }

  struct Ctx {
    std::vector<S> col;  // [positions, cin*27] row-major
    int positions = 0;
    int cin = 0, t = 0, h = 0, w = 0;
  };

  Volume<S> forward(const Volume<S>& x, Ctx& ctx) const {
    check_contract(x.ch == cin_, "conv input channel mismatch");
    const int positions = x.t * x.h * x.w;
    const int k = cin_ * 27;
    ctx.cin = x.ch;
    ctx.t = x.t;
    ctx.h = x.h;
    ctx.w = x.w;
    ctx.positions = positions;
    ctx.col.assign(static_cast<std::size_t>(positions) * k, S(0));
    im2col(x, ctx.col.data());

    Volume<S> y(cout_, x.t, x.h, x.w);
    // y[cout, P] = W[cout, K] * col^T[K, P]; the row-major [P, K] buffer
    // viewed column-major is exactly col^T.
    Eigen::Map<const MatX<S>> wm(weight.value.data(), cout_, k);
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>> col_t(ctx.col.data(), k,
                                                                             positions);
    Eigen::Map<MatX<S>> ym(y.v.data(), cout_, positions);
    ym.noalias() = wm * col_t;
    for (int c = 0; c < cout_; ++c) ym.row(c).array() += bias.value[c];
    return y;
  }

  Volume<S> backward(const Volume<S>& dy, const Ctx& ctx) {
    const int positions = ctx.positions;
    const int k = cin_ * 27;
    Eigen::Map<const MatX<S>> dym(dy.v.data(), cout_, positions);
    Eigen::Map<const MatX<S>> colm(ctx.col.data(), positions, k);
    Eigen::Map<MatX<S>> dwm(weight.grad.data(), cout_, k);
    dwm.noalias() += dym * colm;
    for (int c = 0; c < cout_; ++c) bias.grad[c] += dym.row(c).sum();

    std::vector<S> dcol(static_cast<std::size_t>(positions) * k);
    Eigen::Map<const MatX<S>> wm(weight.value.data(), cout_, k);
    Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>> dcol_t(dcol.data(), k,
                                                                        positions);
    dcol_t.noalias() = wm.transpose() * dym;

    Volume<S> dx(ctx.cin, ctx.t, ctx.h, ctx.w);
    col2im(dcol.data(), dx);
    return dx;
  }

  Param<S> weight, bias;
  int in_channels() const { return cin_; }
  int out_channels() const { return cout_; }

 private:
  void im2col(const Volume<S>& x, S* col) const {
    const int t = x.t, h = x.h, w = x.w;
    const int k = cin_ * 27;
    for (int tt = 0; tt < t; ++tt) {
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          S* row = col + (static_cast<std::size_t>((tt * h + y) * w + xx)) * k;
          int idx = 0;
          for (int c = 0; c < cin_; ++c) {
            for (int dt = -1; dt <= 1; ++dt) {
              const int st = tt + dt;
              for (int dy = -1; dy <= 1; ++dy) {
                const int sy = y + dy;
                for (int dx = -1; dx <= 1; ++dx, ++idx) {
                  const int sx = xx + dx;
                  if (st >= 0 && st < t && sy >= 0 && sy < h && sx >= 0 && sx < w)
                    row[idx] = x.at(c, st, sy, sx);
                }
              }
            }
          }
        }
      }
    }
  }

  void col2im(const S* dcol, Volume<S>& dx) const {
    const int t = dx.t, h = dx.h, w = dx.w;
    const int k = cin_ * 27;
    for (int tt = 0; tt < t; ++tt) {
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          const S* row = dcol + (static_cast<std::size_t>((tt * h + y) * w + xx)) * k;
          int idx = 0;
          for (int c = 0; c < cin_; ++c) {
            for (int dt = -1; dt <= 1; ++dt) {
              const int st = tt + dt;
              for (int dy = -1; dy <= 1; ++dy) {
                const int sy = y + dy;
                for (int dx_ = -1; dx_ <= 1; ++dx_, ++idx) {
                  const int sx = xx + dx_;
                  if (st >= 0 && st < t && sy >= 0 && sy < h && sx >= 0 && sx < w)
                    dx.at(c, st, sy, sx) += row[idx];
                }
              }
            }
          }
        }
      }
    }
  }

  int cin_, cout_;
};

// --- Per-channel instance normalization (affine) ----------------------------
// Statistics are computed over (T, H, W) of each channel of each sample, so
// train and eval behave identically and samples stay independent.

template <typename S>
class InstanceNorm {
 public:
  explicit InstanceNorm(const std::string& name, int channels) : channels_(channels) {
    gamma.init(name + ".gamma", channels);
    beta.init(name + ".beta", channels);
    std::fill(gamma.value.begin(), gamma.value.end(), S(1));
  }

  struct Ctx {
    std::vector<S> xhat;
    std::vector<S> inv_std;  // per channel
  };

  Volume<S> forward(const Volume<S>& x, Ctx& ctx) const {
    check_contract(x.ch == channels_, "norm channel mismatch");
    const std::size_t m = x.spatial_size();
    Volume<S> y(x.ch, x.t, x.h, x.w);
    ctx.xhat.resize(x.size());
    ctx.inv_std.resize(channels_);
    for (int c = 0; c < channels_; ++c) {
      const S* px = x.v.data() + c * m;
      S* py = y.v.data() + c * m;
      S* ph = ctx.xhat.data() + c * m;
      double mean = 0.0;
      for (std::size_t i = 0; i < m; ++i) mean += px[i];
      mean /= static_cast<double>(m);
      double var = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double d = px[i] - mean;
        var += d * d;
      }
      var /= static_cast<double>(m);
      const double inv = 1.0 / std::sqrt(var + kEps);
      ctx.inv_std[c] = static_cast<S>(inv);
      for (std::size_t i = 0; i < m; ++i) {
        ph[i] = static_cast<S>((px[i] - mean) * inv);
        py[i] = gamma.value[c] * ph[i] + beta.value[c];
      }
    }
    return y;
  }

  Volume<S> backward(const Volume<S>& dy, const Ctx& ctx) {
    const std::size_t m = dy.spatial_size();
    Volume<S> dx(dy.ch, dy.t, dy.h, dy.w);
    for (int c = 0; c < channels_; ++c) {
      const S* pdy = dy.v.data() + c * m;
      const S* ph = ctx.xhat.data() + c * m;
      S* pdx = dx.v.data() + c * m;
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        sum_dy += pdy[i];
        sum_dy_xhat += static_cast<double>(pdy[i]) * ph[i];
      }
      gamma.grad[c] += static_cast<S>(sum_dy_xhat);
      beta.grad[c] += static_cast<S>(sum_dy);
      const double g = gamma.value[c];
      const double inv = ctx.inv_std[c];
      const double mean_dy = sum_dy / static_cast<double>(m);
      const double mean_dy_xhat = sum_dy_xhat / static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i) {
        pdx[i] = static_cast<S>(g * inv * (pdy[i] - mean_dy - ph[i] * mean_dy_xhat));
      }
    }
    return dx;
  }

  Param<S> gamma, beta;
  static constexpr double kEps = 1e-5;

 private:
  int channels_;
};

// --- ReLU --------------------------------------------------------------------

template <typename S>
struct ReluCtx {
  std::vector<bool> mask;
};

template <typename S>
Volume<S> relu_forward(const Volume<S>& x, ReluCtx<S>& ctx) {
  Volume<S> y(x.ch, x.t, x.h, x.w);
  ctx.mask.assign(x.size(), false);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x.v[i] > S(0)) {
      y.v[i] = x.v[i];
      ctx.mask[i] = true;
    }
  }
  return y;
}

template <typename S>
Volume<S> relu_backward(const Volume<S>& dy, const ReluCtx<S>& ctx) {
  Volume<S> dx(dy.ch, dy.t, dy.h, dy.w);
  for (std::size_t i = 0; i < dy.size(); ++i)
    if (ctx.mask[i]) dx.v[i] = dy.v[i];
  return dx;
}

// --- Max pooling, window == stride -------------------------------------------

template <typename S>
class MaxPool3d {
 public:
  MaxPool3d(int pt, int ph, int pw) : pt_(pt), ph_(ph), pw_(pw) {}

  struct Ctx {
    std::vector<std::size_t> argmax;  // input linear index per output element
    int in_ch = 0, in_t = 0, in_h = 0, in_w = 0;
  };

  Volume<S> forward(const Volume<S>& x, Ctx& ctx) const {
    check_contract(x.t % pt_ == 0 && x.h % ph_ == 0 && x.w % pw_ == 0,
                   "pooling requires divisible dimensions");
    const int ot = x.t / pt_, oh = x.h / ph_, ow = x.w / pw_;
    Volume<S> y(x.ch, ot, oh, ow);
    ctx.argmax.resize(y.size());
    ctx.in_ch = x.ch;
    ctx.in_t = x.t;
    ctx.in_h = x.h;
    ctx.in_w = x.w;
    std::size_t out_idx = 0;
    for (int c = 0; c < x.ch; ++c) {
      for (int tt = 0; tt < ot; ++tt) {
        for (int y0 = 0; y0 < oh; ++y0) {
          for (int x0 = 0; x0 < ow; ++x0, ++out_idx) {
            S best = -std::numeric_limits<S>::infinity();
            std::size_t best_idx = 0;
            for (int dt = 0; dt < pt_; ++dt)
              for (int dy = 0; dy < ph_; ++dy)
                for (int dx = 0; dx < pw_; ++dx) {
                  const std::size_t idx =
                      ((static_cast<std::size_t>(c) * x.t + (tt * pt_ + dt)) * x.h +
                       (y0 * ph_ + dy)) *
                          x.w +
                      (x0 * pw_ + dx);
                  if (x.v[idx] > best) {  // first maximum wins on ties
                    best = x.v[idx];
                    best_idx = idx;
                  }
                }
            y.v[out_idx] = best;
            ctx.argmax[out_idx] = best_idx;
          }
        }
      }
    }
    return y;
  }

  Volume<S> backward(const Volume<S>& dy, const Ctx& ctx) const {
    Volume<S> dx(ctx.in_ch, ctx.in_t, ctx.in_h, ctx.in_w);
    for (std::size_t i = 0; i < dy.size(); ++i) dx.v[ctx.argmax[i]] += dy.v[i];
    return dx;
  }

 private:
  int pt_, ph_, pw_;
};

// --- Linear (rows are samples) ------------------------------------------------

template <typename S>
class Linear {
 public:
  Linear(const std::string& name, int in, int out, bool with_bias = true)
      : in_(in), out_(out), has_bias_(with_bias) {
    weight.init(name + ".weight", static_cast<std::size_t>(out) * in);
    if (with_bias) bias.init(name + ".bias", out);
  }

  void init_he(Rng& rng) {
    const double stddev = std::sqrt(2.0 / in_);
    for (auto& x : weight.value) x = static_cast<S>(rng.normal(0.0, stddev));
    if (has_bias_) std::fill(bias.value.begin(), bias.value.end(), S(0));
  }

  MatX<S> forward(const MatX<S>& x) const {
    check_contract(x.cols() == in_, "linear input width mismatch");
    Eigen::Map<const MatX<S>> wm(weight.value.data(), out_, in_);
    MatX<S> y = x * wm.transpose();
    if (has_bias_) {
      Eigen::Map<const VecX<S>> bm(bias.value.data(), out_);
      y.rowwise() += bm.transpose();
    }
    return y;
  }

  MatX<S> backward(const MatX<S>& x, const MatX<S>& dy) {
    Eigen::Map<const MatX<S>> wm(weight.value.data(), out_, in_);
    Eigen::Map<MatX<S>> dwm(weight.grad.data(), out_, in_);
    dwm.noalias() += dy.transpose() * x;
    if (has_bias_) {
      Eigen::Map<VecX<S>> dbm(bias.grad.data(), out_);
      dbm.noalias() += dy.colwise().sum().transpose();
    }
    return dy * wm;
  }

  Param<S> weight, bias;
  bool has_bias() const { return has_bias_; }

 private:
  int in_, out_;
  bool has_bias_;
};

// --- BatchNorm over rows -------------------------------------------------------
// Batch statistics during training, running statistics at eval (momentum
// 0.1, unbiased variance into the running buffer).

template <typename S>
class BatchNorm1d {
 public:
  explicit BatchNorm1d(const std::string& name, int features) : features_(features) {
    gamma.init(name + ".gamma", features);
    beta.init(name + ".beta", features);
    running_mean.init(name + ".running_mean", features, /*train=*/false);
    running_var.init(name + ".running_var", features, /*train=*/false);
    std::fill(gamma.value.begin(), gamma.value.end(), S(1));
    std::fill(running_var.value.begin(), running_var.value.end(), S(1));
  }

  struct Ctx {
    MatX<S> xhat;
    VecX<S> inv_std;
    bool train = false;
  };

  MatX<S> forward(const MatX<S>& x, bool train, Ctx& ctx) {
    check_contract(x.cols() == features_, "batchnorm width mismatch");
    const auto n = x.rows();
    ctx.train = train;
    MatX<S> y(n, features_);
    if (train) {
      check_contract(n >= 2, "batch statistics need at least 2 rows");
      ctx.xhat.resize(n, features_);
      ctx.inv_std.resize(features_);
      for (int f = 0; f < features_; ++f) {
        const double mean = x.col(f).template cast<double>().mean();
        double var = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
          const double d = static_cast<double>(x(r, f)) - mean;
          var += d * d;
        }
        const double biased = var / static_cast<double>(n);
        const double unbiased = var / static_cast<double>(n - 1);
        const double inv = 1.0 / std::sqrt(biased + kEps);
        ctx.inv_std[f] = static_cast<S>(inv);
        for (Eigen::Index r = 0; r < n; ++r) {
          ctx.xhat(r, f) = static_cast<S>((x(r, f) - mean) * inv);
          y(r, f) = gamma.value[f] * ctx.xhat(r, f) + beta.value[f];
        }
        running_mean.value[f] =
            static_cast<S>((1.0 - kMomentum) * running_mean.value[f] + kMomentum * mean);
        running_var.value[f] =
            static_cast<S>((1.0 - kMomentum) * running_var.value[f] + kMomentum * unbiased);
      }
    } else {
      for (int f = 0; f < features_; ++f) {
        const double inv = 1.0 / std::sqrt(static_cast<double>(running_var.value[f]) + kEps);
        for (Eigen::Index r = 0; r < n; ++r)
          y(r, f) = static_cast<S>(gamma.value[f] * (x(r, f) - running_mean.value[f]) * inv +
                                   beta.value[f]);
      }
    }
    return y;
  }

  MatX<S> backward(const MatX<S>& dy, const Ctx& ctx) {
    check_contract(ctx.train, "backward requires a training-mode forward");
    const auto n = dy.rows();
    MatX<S> dx(n, features_);
    for (int f = 0; f < features_; ++f) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (Eigen::Index r = 0; r < n; ++r) {
        sum_dy += dy(r, f);
        sum_dy_xhat += static_cast<double>(dy(r, f)) * ctx.xhat(r, f);
      }
      gamma.grad[f] += static_cast<S>(sum_dy_xhat);
      beta.grad[f] += static_cast<S>(sum_dy);
      const double g = gamma.value[f];
      const double inv = ctx.inv_std[f];
      const double mean_dy = sum_dy / static_cast<double>(n);
      const double mean_dy_xhat = sum_dy_xhat / static_cast<double>(n);
      for (Eigen::Index r = 0; r < n; ++r) {
        dx(r, f) =
            static_cast<S>(g * inv * (dy(r, f) - mean_dy - ctx.xhat(r, f) * mean_dy_xhat));
      }
    }
    return dx;
  }

  Param<S> gamma, beta, running_mean, running_var;
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

 private:
  int features_;
};

// --- Row-wise L2 normalization ---------------------------------------------

template <typename S>
struct L2NormCtx {
  MatX<S> z;        // normalized rows
  VecX<S> inv_len;  // 1 / sqrt(|v|^2 + eps)
};

template <typename S>
MatX<S> l2_normalize_rows(const MatX<S>& x, L2NormCtx<S>& ctx) {
  const auto n = x.rows();
  ctx.z.resize(n, x.cols());
  ctx.inv_len.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double len = std::sqrt(static_cast<double>(x.row(r).squaredNorm()) + 1e-24);
    ctx.inv_len[r] = static_cast<S>(1.0 / len);
    ctx.z.row(r) = x.row(r) * ctx.inv_len[r];
  }
  return ctx.z;
}

template <typename S>
MatX<S> l2_normalize_rows_backward(const MatX<S>& dz, const L2NormCtx<S>& ctx) {
  MatX<S> dx(dz.rows(), dz.cols());
  for (Eigen::Index r = 0; r < dz.rows(); ++r) {
    const S inner = ctx.z.row(r).dot(dz.row(r));
    dx.row(r) = (dz.row(r) - ctx.z.row(r) * inner) * ctx.inv_len[r];
  }
  return dx;
}

}  // namespace tb
