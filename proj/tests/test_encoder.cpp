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
#include <fstream>

#include "oracle.hpp"
#include "timebalance/encoder.hpp"
#include "timebalance/losses.hpp"
#include "timebalance/optimizer.hpp"
#include "timebalance/rng.hpp"

namespace fs = std::filesystem;

namespace {

template <typename S>
tb::Volume<S> random_volume(tb::Rng& rng, int c, int t, int h, int w, double scale = 1.0) {
  tb::Volume<S> v(c, t, h, w);
  for (auto& x : v.v) x = static_cast<S>(rng.uniform() * scale);
  return v;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("tb_enc_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("zero backbone weights produce the zero pooled feature") {
  tb::EncoderNet<float> net(4, 8, tb::Role::Student, 1);
  for (auto* p : net.params()) {
    if (p->name.rfind("backbone.", 0) == 0) std::fill(p->value.begin(), p->value.end(), 0.0f);
  }
  tb::Rng rng(2);
  const auto vol = random_volume<float>(rng, 3, 8, 16, 16);
  const auto feat = net.encode_clip(vol);
  CHECK(feat.pooled.norm() == doctest::Approx(0.0));
  CHECK(feat.unpooled.norm() == doctest::Approx(0.0));
}

TEST_CASE("encode is deterministic and batch order preserving") {
  tb::EncoderNet<float> net(4, 8, tb::Role::Student, 3);
  tb::Rng rng(4);
  std::vector<tb::Volume<float>> clips;
  for (int k = 0; k < 3; ++k) clips.push_back(random_volume<float>(rng, 3, 8, 16, 16));

  std::vector<tb::VecX<float>> first;
  for (const auto& c : clips) first.push_back(net.encode_clip(c).pooled);
  for (int k = 0; k < 3; ++k) {
    const auto again = net.encode_clip(clips[k]).pooled;
    CHECK(again == first[k]);  // bitwise, eval-mode determinism
  }
}

TEST_CASE("pooled equals the temporal mean of unpooled") {
  tb::EncoderNet<float> net(4, 8, tb::Role::Student, 5);
  tb::Rng rng(6);
  const auto vol = random_volume<float>(rng, 3, 16, 16, 16);
  const auto feat = net.encode_clip(vol);
  CHECK(feat.unpooled.rows() == 4);  // temporal stride 4
  for (int f = 0; f < feat.pooled.size(); ++f) {
    double mean = 0.0;
    for (int t = 0; t < feat.unpooled.rows(); ++t) mean += feat.unpooled(t, f);
    mean /= static_cast<double>(feat.unpooled.rows());
    const double rel = std::abs(mean - feat.pooled[f]) / std::max(1e-6, std::abs(mean));
    CHECK(rel <= 1e-6);
  }
}

TEST_CASE("projection outputs unit rows with the documented widths") {
  tb::EncoderNet<float> net(4, 32, tb::Role::InvariantTeacher, 7);
  tb::Rng rng(8);
  tb::MatX<float> rows(6, tb::EncoderNet<float>::kFeatDim);
  for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = static_cast<float>(rng.normal());
  const auto z = net.project(rows, /*train=*/true);
  CHECK(z.cols() == 32);  // feat 128 -> hidden 32 -> d 32
  for (Eigen::Index r = 0; r < z.rows(); ++r)
    CHECK(std::abs(z.row(r).norm() - 1.0f) <= 1e-5f);
}

TEST_CASE("row normalization is scale invariant") {
  tb::Rng rng(9);
  tb::MatX<float> rows(3, 16);
  for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = static_cast<float>(rng.normal());
  tb::L2NormCtx<float> ctx1, ctx2;
  const auto a = tb::l2_normalize_rows(rows, ctx1);
  const auto b = tb::l2_normalize_rows(tb::MatX<float>(3.0f * rows), ctx2);
  CHECK((a - b).norm() <= 1e-6f);
}

TEST_CASE("classifier softmax contracts") {
  tb::EncoderNet<float> net(4, 8, tb::Role::Student, 11);
  // Zero logits: zero the classifier weights and bias.
  for (auto* p : net.params())
    if (p->name.rfind("classifier.", 0) == 0) std::fill(p->value.begin(), p->value.end(), 0.0f);
  tb::Rng rng(12);
  const auto vol = random_volume<float>(rng, 3, 8, 16, 16);
  const auto logits = net.classify_logits(net.encode_clip(vol).pooled);
  const tb::Vec p = tb::softmax(logits.cast<double>());
  for (int c = 0; c < 4; ++c) CHECK(p[c] == doctest::Approx(0.25).epsilon(1e-9));

  // Shift invariance and argmax consistency.
  tb::Vec raw(5);
  raw << 0.3, -1.2, 2.0, 0.0, 0.4;
  const tb::Vec p1 = tb::softmax(raw);
  const tb::Vec p2 = tb::softmax((raw.array() + 3.5).matrix());
  CHECK((p1 - p2).norm() <= 1e-12);
  Eigen::Index amax_p, amax_l;
  p1.maxCoeff(&amax_p);
  raw.maxCoeff(&amax_l);
  CHECK(amax_p == amax_l);
  CHECK(p1.sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("temporal slices partition and pool the unpooled sequence") {
  using Net = tb::EncoderNet<float>;
  tb::Rng rng(13);
  tb::MatX<float> unpooled(8, 6);
  for (Eigen::Index i = 0; i < unpooled.size(); ++i)
    unpooled.data()[i] = static_cast<float>(rng.normal());

  // n=1 degenerates to the pooled feature of the whole sequence.
  const auto one = Net::temporal_slices(unpooled, 1);
  CHECK(one.rows() == 1);
  CHECK((one.row(0) - unpooled.colwise().mean()).norm() <= 1e-6f);

  // n=4 with T'=8: each slice pools 2 timesteps.
  const auto four = Net::temporal_slices(unpooled, 4);
  CHECK(four.rows() == 4);
  for (int s = 0; s < 4; ++s)
    CHECK((four.row(s) - 0.5f * (unpooled.row(2 * s) + unpooled.row(2 * s + 1))).norm() <=
          1e-6f);

  // The average of slice means equals the global pooled feature.
  const tb::MatX<float> slice_mean = four.colwise().mean();
  CHECK((slice_mean - unpooled.colwise().mean()).norm() <= 1e-6f);

  CHECK_THROWS_AS(Net::temporal_slices(unpooled, 3), tb::ContractError);
}

TEST_CASE("encode rejects malformed input shapes") {
  tb::EncoderNet<float> net(4, 8, tb::Role::Student, 14);
  tb::Rng rng(15);
  const auto bad_channels = random_volume<float>(rng, 1, 8, 16, 16);
  CHECK_THROWS_AS(net.encode_clip(bad_channels), tb::ContractError);
  const auto bad_frames = random_volume<float>(rng, 3, 6, 16, 16);
  CHECK_THROWS_AS(net.encode_clip(bad_frames), tb::ContractError);
  const auto bad_spatial = random_volume<float>(rng, 3, 8, 12, 12);
  CHECK_THROWS_AS(net.encode_clip(bad_spatial), tb::ContractError);
}

// End-to-end gradient check: a composite scalar loss through
// encode -> project and encode -> classify in double precision.
TEST_CASE("backprop through the full network matches finite differences") {
  using Net = tb::EncoderNet<double>;
  Net net(3, 4, tb::Role::Student, 21);
  tb::Rng rng(22);
  // Jitter every trainable parameter so no pre-activation sits exactly on a
  // ReLU kink (finite differences straddle kinks).
  for (auto* p : net.params()) {
    if (!p->trainable) continue;
    for (auto& x : p->value) x += rng.normal(0.0, 0.05);
  }
  const auto clip_a = random_volume<double>(rng, 3, 4, 16, 16);
  const auto clip_b = random_volume<double>(rng, 3, 4, 16, 16);

  const int label = 1;
  auto eval_loss = [&](Net& m) {
    // Projection branch: contrastive-style coupling of two clips.
    typename Net::EncodeCtx ca, cb;
    const auto fa = m.encode_clip(clip_a, &ca);
    const auto fb = m.encode_clip(clip_b, &cb);
    tb::MatX<double> rows(2, Net::kFeatDim);
    rows.row(0) = fa.pooled.transpose();
    rows.row(1) = fb.pooled.transpose();
    typename Net::ProjectCtx pc;
    const auto z = m.project(rows, /*train=*/true, &pc);
    const double cos = z.row(0).dot(z.row(1));
    // Classification branch.
    const tb::Vec logits = m.classify_logits(fa.pooled);
    const double ce = tb::cross_entropy_from_logits(logits, label);
    return std::make_tuple(1.5 * cos + ce, std::move(ca), std::move(cb), std::move(pc), z, fa,
                           fb);
  };

  // Analytic gradients.
  net.zero_grads();
  {
    auto [loss, ca, cb, pc, z, fa, fb] = eval_loss(net);
    (void)loss;
    tb::MatX<double> dz(2, z.cols());
    dz.row(0) = 1.5 * z.row(1);
    dz.row(1) = 1.5 * z.row(0);
    const tb::MatX<double> dpooled = net.project_backward(dz, pc);

    tb::Vec dlogits;
    const tb::Vec logits = net.classify_logits(fa.pooled);
    tb::cross_entropy_from_logits(logits, label, &dlogits);
    const tb::VecX<double> dp_cls = net.classifier_backward(fa.pooled, dlogits);

    tb::VecX<double> dpa = dpooled.row(0).transpose();
    dpa += dp_cls;
    net.encode_backward(
        Net::pooled_to_unpooled_grad(dpa, static_cast<int>(fa.unpooled.rows())), ca);
    net.encode_backward(Net::pooled_to_unpooled_grad(dpooled.row(1).transpose(),
                                                     static_cast<int>(fb.unpooled.rows())),
                        cb);
  }

  // Finite differences over a deterministic subsample of each parameter.
  // BatchNorm running buffers mutate during forward; save/restore them so
  // every forward sees identical statistics.
  std::vector<std::vector<double>> saved;
  for (auto* p : net.params()) saved.push_back(p->value);
  auto restore = [&] {
    auto params = net.params();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = saved[i];
  };

  auto loss_only = [&]() {
    const auto state = net.params();
    std::vector<std::vector<double>> snap;
    for (auto* p : state) snap.push_back(p->value);
    auto [loss, ca, cb, pc, z, fa, fb] = eval_loss(net);
    (void)ca;
    for (std::size_t i = 0; i < state.size(); ++i) state[i]->value = snap[i];
    return loss;
  };

  int checked = 0;
  auto params = net.params();
  for (auto* p : params) {
    if (!p->trainable) continue;
    const std::size_t stride = std::max<std::size_t>(1, p->value.size() / 5);
    for (std::size_t i = 0; i < p->value.size(); i += stride) {
      const double analytic = p->grad[i];
      const double fd = oracle::central_diff(loss_only, p->value[i], 1e-5);
      INFO(p->name << "[" << i << "] analytic=" << analytic << " fd=" << fd);
      CHECK(oracle::grad_close(analytic, fd, 1e-4, 1e-7));
      ++checked;
    }
  }
  CHECK(checked > 50);
  restore();
}

TEST_CASE("checkpoint round trip preserves everything bitwise") {
  TempDir dir("ckpt");
  tb::EncoderWeights net(5, 16, tb::Role::DistinctiveTeacher, 31);
  // Give the BN buffers non-default values so the round trip is non-trivial.
  tb::Rng rng(32);
  tb::MatX<float> rows(4, tb::EncoderWeights::kFeatDim);
  for (Eigen::Index i = 0; i < rows.size(); ++i) rows.data()[i] = static_cast<float>(rng.normal());
  (void)net.project(rows, /*train=*/true);

  tb::LrSchedule sched{1e-3, 2, 3};
  std::vector<tb::Param<float>*> trainable;
  for (auto* p : net.params())
    if (p->trainable) trainable.push_back(p);
  tb::AdamState opt = tb::AdamState::create(sched, trainable);
  for (auto* p : trainable)
    for (auto& g : p->grad) g = static_cast<float>(rng.normal());
  opt.step(trainable, 1e-3);

  const fs::path p1 = dir.path / "a.tbck";
  const fs::path p2 = dir.path / "b.tbck";
  tb::save_checkpoint(net, &opt, p1);

  auto loaded = tb::load_checkpoint(p1);
  CHECK(loaded.net->role() == tb::Role::DistinctiveTeacher);
  CHECK(loaded.net->num_classes() == 5);
  CHECK(loaded.net->proj_dim() == 16);
  REQUIRE(loaded.optimizer != nullptr);
  CHECK(loaded.optimizer->step_count == 1);
  CHECK(loaded.optimizer->schedule.warmup_epochs == 2);

  tb::save_checkpoint(*loaded.net, loaded.optimizer.get(), p2);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string c1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string c2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(c1 == c2);

  CHECK(tb::checkpoint_hash(p1) == loaded.content_hash);
}

TEST_CASE("checkpoint loader detects corruption") {
  TempDir dir("ckpt_bad");
  tb::EncoderWeights net(3, 8, tb::Role::Student, 41);
  const fs::path p = dir.path / "net.tbck";
  tb::save_checkpoint(net, nullptr, p);

  // Truncation.
  const auto size = fs::file_size(p);
  fs::copy_file(p, dir.path / "trunc.tbck");
  fs::resize_file(dir.path / "trunc.tbck", size - 64);
  CHECK_THROWS_AS(tb::load_checkpoint(dir.path / "trunc.tbck"), tb::DataError);

  // Payload bit flip breaks the content hash.
  {
    std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(size) - 5);
    char byte = 0;
    f.read(&byte, 1);
    f.seekp(static_cast<std::streamoff>(size) - 5);
    byte = static_cast<char>(byte ^ 0x40);
    f.write(&byte, 1);
  }
  CHECK_THROWS_AS(tb::load_checkpoint(p), tb::DataError);

  CHECK_THROWS_AS(tb::load_checkpoint(dir.path / "missing.tbck"), tb::DataError);
}
