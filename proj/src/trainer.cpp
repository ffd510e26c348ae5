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

#include "timebalance/trainer.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "timebalance/losses.hpp"
#include "timebalance/rng.hpp"

namespace tb {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Stage tags folded into derived seed streams.
constexpr std::uint64_t kStagePretrainInvariant = 11;
constexpr std::uint64_t kStagePretrainDistinctive = 12;
constexpr std::uint64_t kStageFinetune = 13;
constexpr std::uint64_t kStageStudent = 14;

class MetricsLog {
 public:
  explicit MetricsLog(const fs::path& path) : os_(path) {
    if (!os_) throw DataError("cannot open metrics log: " + path.string());
  }
  void append(const json& j) {
    os_ << j.dump() << '\n';
    os_.flush();
  }

 private:
  std::ofstream os_;
};

std::vector<Param<float>*> select_trainable(EncoderWeights& net,
                                            const std::string& excluded_prefix) {
  std::vector<Param<float>*> out;
  for (auto* p : net.params()) {
    if (!p->trainable) continue;
    if (!excluded_prefix.empty() && p->name.rfind(excluded_prefix, 0) == 0) continue;
    out.push_back(p);
  }
  return out;
}

void save_epoch_checkpoint(const EncoderWeights& net, const AdamState& opt,
                           const fs::path& out_dir, int epoch) {
  char name[32];
  std::snprintf(name, sizeof(name), "epoch_%03d.tbck", epoch);
  save_checkpoint(net, &opt, out_dir / name);
}

// Draws indices from a pool in shuffled order, reshuffling on wrap-around.
class CyclicSampler {
 public:
  CyclicSampler(std::size_t pool_size, std::uint64_t seed) : rng_(seed) {
    indices_.resize(pool_size);
    for (std::size_t i = 0; i < pool_size; ++i) indices_[i] = i;
    rng_.shuffle(indices_);
  }
  std::size_t next() {
    if (pos_ >= indices_.size()) {
      rng_.shuffle(indices_);
      pos_ = 0;
    }
    return indices_[pos_++];
  }

 private:
  Rng rng_;
  std::vector<std::size_t> indices_;
  std::size_t pos_ = 0;
};

Video slice_clip(const VideoInstance& video, int start, int len) {
  return sample_consecutive_clips(video, 1, len, StartPolicy::fixed(start)).clips.front();
}

void ensure_finite(double loss, int epoch, const std::vector<const VideoInstance*>& batch) {
  if (std::isfinite(loss)) return;
  std::string ids;
  for (const auto* v : batch) ids += (ids.empty() ? "" : ",") + v->id;
  throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                     "; batch videos: " + ids);
}

// Splits [0, count) into shuffled batches of `batch_size`; a trailing
// singleton is folded into the previous batch so contrastive losses always
// see at least two instances.
std::vector<std::vector<std::size_t>> make_batches(std::size_t count, int batch_size,
                                                   std::uint64_t seed) {
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < count; i += batch_size) {
    const std::size_t end = std::min(count, i + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + i, order.begin() + end);
  }
  if (batches.size() >= 2 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

}  // namespace

std::vector<const VideoInstance*> instance_pointers(const std::vector<VideoInstance>& v) {
  std::vector<const VideoInstance*> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(&x);
  return out;
}

// --- Self-supervised pretraining ---------------------------------------------

std::unique_ptr<EncoderWeights> pretrain_teacher(PretrainObjective objective,
                                                 const std::vector<const VideoInstance*>& videos,
                                                 int num_classes, const Config& config,
                                                 const fs::path& out_dir) {
  check_contract(!videos.empty(), "pretraining needs a non-empty dataset");
  const bool distinctive = objective == PretrainObjective::Distinctive;
  if (!distinctive) check_contract(videos.size() >= 2, "invariant objective needs >= 2 videos");
  if (config.epochs_pretrain < config.warmup_epochs)
    throw ConfigError("epochs_pretrain must be >= warmup_epochs");

  fs::create_directories(out_dir);
  MetricsLog log(out_dir / "metrics.jsonl");

  const std::uint64_t stage = distinctive ? kStagePretrainDistinctive : kStagePretrainInvariant;
  const Role role = distinctive ? Role::DistinctiveTeacher : Role::InvariantTeacher;
  auto net = std::make_unique<EncoderWeights>(num_classes, config.proj_dim, role,
                                              derive_seed({config.seed, stage, 0xfeed}));

  auto trainable = select_trainable(*net, "classifier.");
  LrSchedule schedule{config.base_lr, config.warmup_epochs, config.patience};
  AdamState opt = AdamState::create(schedule, trainable);

  const int n = config.n;
  const int f = config.f_pretrain;
  const int feat = EncoderWeights::kFeatDim;

  for (int epoch = 0; epoch < config.epochs_pretrain; ++epoch) {
    const double lr = opt.schedule.lr_for_epoch(epoch);
    const auto batches = make_batches(videos.size(), config.batch_size,
                                      derive_seed({config.seed, stage, 0xba7c4,
                                                   static_cast<std::uint64_t>(epoch)}));
    double epoch_loss = 0.0, epoch_d1 = 0.0, epoch_d2 = 0.0;
    std::size_t epoch_instances = 0;

    for (const auto& batch : batches) {
      const std::size_t bsz = batch.size();
      std::vector<const VideoInstance*> batch_videos;
      for (auto idx : batch) batch_videos.push_back(videos[idx]);

      // Pass 1: augment, encode (no contexts), gather pooled rows.
      struct PerVideo {
        std::vector<Volume<float>> views;   // n clips (plus n more when distinctive)
        Volume<float> global_clip;          // distinctive only
        int global_t_prime = 0;
        MatX<float> global_unpooled;
      };
      std::vector<PerVideo> work(bsz);
      const int rows_per_video = distinctive ? 3 * n : n;
      MatX<float> pooled_rows(static_cast<Eigen::Index>(bsz) * rows_per_video, feat);

      for (std::size_t b = 0; b < bsz; ++b) {
        const VideoInstance& video = *batch_videos[b];
        const std::uint64_t vseed = derive_seed({config.seed, stage,
                                                 static_cast<std::uint64_t>(epoch),
                                                 static_cast<std::uint64_t>(batch[b])});
        const ClipSet clips =
            sample_consecutive_clips(video, n, f, StartPolicy::uniform_random(
                                                      derive_seed({vseed, 0})));
        PerVideo& w = work[b];
        for (int t = 0; t < n; ++t) {
          w.views.push_back(to_volume<float>(
              augment(clips.clips[t], config.augment_spec(derive_seed(
                                          {vseed, 1, static_cast<std::uint64_t>(t)})))));
        }
        if (distinctive) {
          for (int t = 0; t < n; ++t) {
            w.views.push_back(to_volume<float>(
                augment(clips.clips[t], config.augment_spec(derive_seed(
                                            {vseed, 2, static_cast<std::uint64_t>(t)})))));
          }
          const Video global_raw = slice_clip(video, clips.timestamps.front(), n * f);
          w.global_clip = to_volume<float>(
              augment(global_raw, config.augment_spec(derive_seed({vseed, 3}))));
        }
        for (int k = 0; k < (distinctive ? 2 * n : n); ++k) {
          const auto ft = net->encode_clip(w.views[k]);
          pooled_rows.row(static_cast<Eigen::Index>(b) * rows_per_video + k) =
              ft.pooled.transpose();
        }
        if (distinctive) {
          const auto gf = net->encode_clip(w.global_clip);
          w.global_t_prime = static_cast<int>(gf.unpooled.rows());
          w.global_unpooled = gf.unpooled;
          const MatX<float> slices = EncoderWeights::temporal_slices(gf.unpooled, n);
          for (int t = 0; t < n; ++t)
            pooled_rows.row(static_cast<Eigen::Index>(b) * rows_per_video + 2 * n + t) =
                slices.row(t);
        }
      }

      typename EncoderWeights::ProjectCtx pctx;
      const MatX<float> z_rows = net->project(pooled_rows, /*train=*/true, &pctx);

      // Loss on double-precision grids.
      auto grid_of = [&](int view_offset) {
        ProjectionGrid g(bsz);
        for (std::size_t b = 0; b < bsz; ++b)
          for (int t = 0; t < n; ++t)
            g[b].push_back(z_rows.row(static_cast<Eigen::Index>(b) * rows_per_video +
                                      view_offset + t)
                               .transpose()
                               .cast<double>());
        return g;
      };

      double batch_loss = 0.0, batch_d1 = 0.0, batch_d2 = 0.0;
      MatX<float> dz_rows = MatX<float>::Zero(z_rows.rows(), z_rows.cols());
      if (!distinctive) {
        ContrastiveBatch cb{grid_of(0), {}, config.tau};
        ProjectionGrid dz;
        batch_loss = loss_invariant(cb, &dz);
        for (std::size_t b = 0; b < bsz; ++b)
          for (int t = 0; t < n; ++t)
            dz_rows.row(static_cast<Eigen::Index>(b) * rows_per_video + t) =
                dz[b][t].transpose().cast<float>();
      } else {
        ContrastiveBatch cb{grid_of(0), grid_of(n), config.tau};
        ProjectionGrid dz1, dzt, dz2, dslice;
        batch_d1 = loss_distinctive_pooled(cb, &dz1, &dzt);
        batch_d2 = loss_distinctive_unpooled(cb.z, grid_of(2 * n), config.tau, &dz2, &dslice);
        batch_loss = batch_d1 + batch_d2;
        for (std::size_t b = 0; b < bsz; ++b) {
          for (int t = 0; t < n; ++t) {
            const auto row = static_cast<Eigen::Index>(b) * rows_per_video;
            dz_rows.row(row + t) = (dz1[b][t] + dz2[b][t]).transpose().cast<float>();
            dz_rows.row(row + n + t) = dzt[b][t].transpose().cast<float>();
            dz_rows.row(row + 2 * n + t) = dslice[b][t].transpose().cast<float>();
          }
        }
      }
      ensure_finite(batch_loss, epoch, batch_videos);

      net->zero_grads();
      const MatX<float> dpooled = net->project_backward(dz_rows, pctx);

      // Pass 2: recompute each clip forward with contexts and backpropagate.
      for (std::size_t b = 0; b < bsz; ++b) {
        PerVideo& w = work[b];
        for (int k = 0; k < (distinctive ? 2 * n : n); ++k) {
          typename EncoderWeights::EncodeCtx ctx;
          const auto ft = net->encode_clip(w.views[k], &ctx);
          const VecX<float> dp =
              dpooled.row(static_cast<Eigen::Index>(b) * rows_per_video + k).transpose();
          net->encode_backward(
              EncoderWeights::pooled_to_unpooled_grad(dp, static_cast<int>(ft.unpooled.rows())),
              ctx);
        }
        if (distinctive) {
          typename EncoderWeights::EncodeCtx ctx;
          (void)net->encode_clip(w.global_clip, &ctx);
          MatX<float> dslices(n, feat);
          for (int t = 0; t < n; ++t)
            dslices.row(t) =
                dpooled.row(static_cast<Eigen::Index>(b) * rows_per_video + 2 * n + t);
          net->encode_backward(
              EncoderWeights::temporal_slices_backward(dslices, w.global_t_prime), ctx);
        }
      }
      opt.step(trainable, lr);

      epoch_loss += batch_loss * static_cast<double>(bsz);
      epoch_d1 += batch_d1 * static_cast<double>(bsz);
      epoch_d2 += batch_d2 * static_cast<double>(bsz);
      epoch_instances += bsz;
    }

    const double mean_loss = epoch_loss / static_cast<double>(epoch_instances);
    json j{{"epoch", epoch},
           {"stage", distinctive ? "pretrain_distinctive" : "pretrain_invariant"},
           {"loss", mean_loss},
           {"lr", lr}};
    if (distinctive) {
      j["loss_d1"] = epoch_d1 / static_cast<double>(epoch_instances);
      j["loss_d2"] = epoch_d2 / static_cast<double>(epoch_instances);
    }
    log.append(j);
    opt.schedule.observe_epoch_loss(epoch, mean_loss);
    save_epoch_checkpoint(*net, opt, out_dir, epoch);
  }
  save_checkpoint(*net, &opt, out_dir / "final.tbck");
  return net;
}

// --- Supervised finetuning ----------------------------------------------------

std::unique_ptr<EncoderWeights> finetune_teacher(const EncoderWeights& pretrained,
                                                 const std::vector<const VideoInstance*>& labeled,
                                                 const Config& config, const fs::path& out_dir) {
  if (labeled.empty()) throw ContractError("finetuning needs a non-empty labeled set");
  if (config.epochs_finetune < config.warmup_epochs)
    throw ConfigError("epochs_finetune must be >= warmup_epochs");
  for (const auto* v : labeled)
    check_contract(v->label.has_value(), "finetuning requires labels");

  fs::create_directories(out_dir);
  MetricsLog log(out_dir / "metrics.jsonl");

  auto net = std::make_unique<EncoderWeights>(pretrained);
  auto trainable = select_trainable(*net, "projector.");
  LrSchedule schedule{config.base_lr, config.warmup_epochs, config.patience};
  AdamState opt = AdamState::create(schedule, trainable);

  const int f = config.f_student;
  const int cpv = config.finetune_clips_per_video;

  for (int epoch = 0; epoch < config.epochs_finetune; ++epoch) {
    const double lr = opt.schedule.lr_for_epoch(epoch);
    // Sample pool: every labeled video contributes `cpv` clips per epoch.
    const std::size_t samples = labeled.size() * static_cast<std::size_t>(cpv);
    const auto batches = make_batches(samples, config.batch_size,
                                      derive_seed({config.seed, kStageFinetune, 0xba7c4,
                                                   static_cast<std::uint64_t>(epoch)}));
    double epoch_loss = 0.0;
    std::size_t count = 0;
    for (const auto& batch : batches) {
      net->zero_grads();
      double batch_loss = 0.0;
      std::vector<const VideoInstance*> batch_videos;
      for (auto sample_idx : batch) {
        const VideoInstance& video = *labeled[sample_idx % labeled.size()];
        batch_videos.push_back(&video);
        const std::uint64_t sseed = derive_seed({config.seed, kStageFinetune,
                                                 static_cast<std::uint64_t>(epoch),
                                                 static_cast<std::uint64_t>(sample_idx)});
        const ClipSet cs = sample_consecutive_clips(
            video, 1, f, StartPolicy::uniform_random(derive_seed({sseed, 0})));
        const auto vol = to_volume<float>(
            augment(cs.clips.front(), config.augment_spec(derive_seed({sseed, 1}))));

        typename EncoderWeights::EncodeCtx ctx;
        const auto ft = net->encode_clip(vol, &ctx);
        const VecX<float> logits = net->classify_logits(ft.pooled);
        Vec dlogits;
        const double ce =
            cross_entropy_from_logits(logits.cast<double>(), *video.label, &dlogits);
        batch_loss += ce;
        const VecX<float> dl = (dlogits / static_cast<double>(batch.size())).cast<float>();
        const VecX<float> dpooled = net->classifier_backward(ft.pooled, dl);
        net->encode_backward(EncoderWeights::pooled_to_unpooled_grad(
                                 dpooled, static_cast<int>(ft.unpooled.rows())),
                             ctx);
      }
      batch_loss /= static_cast<double>(batch.size());
      ensure_finite(batch_loss, epoch, batch_videos);
      opt.step(trainable, lr);
      epoch_loss += batch_loss * static_cast<double>(batch.size());
      count += batch.size();
    }
    const double mean_loss = epoch_loss / static_cast<double>(count);
    const double acc = quick_accuracy(*net, labeled, f, config.crop_size);
    log.append(json{{"epoch", epoch},
                    {"stage", "finetune_teacher"},
                    {"loss", mean_loss},
                    {"lr", lr},
                    {"accuracy", acc}});
    opt.schedule.observe_epoch_loss(epoch, mean_loss);
    save_epoch_checkpoint(*net, opt, out_dir, epoch);
  }
  save_checkpoint(*net, &opt, out_dir / "final.tbck");
  return net;
}

// --- Semi-supervised student ---------------------------------------------------

std::unique_ptr<EncoderWeights> train_student(const StudentSetup& setup,
                                              const std::vector<const VideoInstance*>& labeled,
                                              const std::vector<const VideoInstance*>& unlabeled,
                                              int num_classes, const Config& config,
                                              const fs::path& out_dir) {
  check_contract(setup.teacher_invariant && setup.teacher_distinctive && setup.scores,
                 "student training needs both teachers and the score cache");
  if (labeled.empty()) throw ContractError("student training needs labeled data");
  if (config.epochs_student < config.warmup_epochs)
    throw ConfigError("epochs_student must be >= warmup_epochs");
  if (setup.scores->invariant_hash != setup.teacher_invariant_hash ||
      setup.scores->distinctive_hash != setup.teacher_distinctive_hash)
    throw DataError("score cache was computed for different teacher checkpoints");

  fs::create_directories(out_dir);
  MetricsLog log(out_dir / "metrics.jsonl");

  std::unique_ptr<EncoderWeights> net;
  if (setup.init_weights) {
    net = std::make_unique<EncoderWeights>(*setup.init_weights);
    net->set_role(Role::Student);
  } else {
    net = std::make_unique<EncoderWeights>(num_classes, config.proj_dim, Role::Student,
                                           derive_seed({config.seed, kStageStudent, 0xfeed}));
  }

  auto trainable = select_trainable(*net, "projector.");
  LrSchedule schedule{config.base_lr, config.warmup_epochs, config.patience};
  AdamState opt = AdamState::create(schedule, trainable);

  const int f = config.f_student;
  const DistillKind kind = config.distill_kind();
  const int labeled_per_batch = std::clamp(
      static_cast<int>(std::lround(config.batch_size * config.batch_labeled_fraction)), 0,
      config.batch_size);
  const int unlabeled_per_batch = config.batch_size - labeled_per_batch;
  check_contract(labeled_per_batch > 0, "student batches need at least one labeled sample");

  std::set<std::string> warned_missing;
  auto teacher_probs = [&](EncoderWeights& teacher, const Volume<float>& vol) {
    const auto ft = teacher.encode_clip(vol);
    return softmax(teacher.classify_logits(ft.pooled).cast<double>());
  };

  for (int epoch = 0; epoch < config.epochs_student; ++epoch) {
    const double lr = opt.schedule.lr_for_epoch(epoch);
    CyclicSampler labeled_sampler(labeled.size(),
                                  derive_seed({config.seed, kStageStudent, 0x1ab,
                                               static_cast<std::uint64_t>(epoch)}));
    CyclicSampler unlabeled_sampler(std::max<std::size_t>(unlabeled.size(), 1),
                                    derive_seed({config.seed, kStageStudent, 0x04a1ab,
                                                 static_cast<std::uint64_t>(epoch)}));
    // One epoch covers the larger pool once at its per-batch rate.
    std::size_t steps = 1;
    if (unlabeled_per_batch > 0 && !unlabeled.empty())
      steps = std::max(steps, (unlabeled.size() + unlabeled_per_batch - 1) /
                                  static_cast<std::size_t>(unlabeled_per_batch));
    steps = std::max(steps, (labeled.size() + labeled_per_batch - 1) /
                                static_cast<std::size_t>(labeled_per_batch));

    double epoch_sup = 0.0, epoch_unsup = 0.0, epoch_total = 0.0;
    std::size_t sup_count = 0, all_count = 0;

    for (std::size_t step = 0; step < steps; ++step) {
      // Assemble the mixed batch: labeled samples first, then unlabeled.
      std::vector<const VideoInstance*> batch_videos;
      std::vector<bool> is_labeled;
      for (int k = 0; k < labeled_per_batch; ++k) {
        batch_videos.push_back(labeled[labeled_sampler.next()]);
        is_labeled.push_back(true);
      }
      if (!unlabeled.empty()) {
        for (int k = 0; k < unlabeled_per_batch; ++k) {
          batch_videos.push_back(unlabeled[unlabeled_sampler.next()]);
          is_labeled.push_back(false);
        }
      }
      const auto bsz = static_cast<double>(batch_videos.size());

      net->zero_grads();
      double batch_total = 0.0;
      for (std::size_t k = 0; k < batch_videos.size(); ++k) {
        const VideoInstance& video = *batch_videos[k];
        const std::uint64_t sseed = derive_seed({config.seed, kStageStudent,
                                                 static_cast<std::uint64_t>(epoch),
                                                 static_cast<std::uint64_t>(step),
                                                 static_cast<std::uint64_t>(k)});
        const ClipSet cs = sample_consecutive_clips(
            video, 1, f, StartPolicy::uniform_random(derive_seed({sseed, 0})));
        const auto vol = to_volume<float>(
            augment(cs.clips.front(), config.augment_spec(derive_seed({sseed, 1}))));

        typename EncoderWeights::EncodeCtx ctx;
        const auto ft = net->encode_clip(vol, &ctx);
        const VecX<float> logits = net->classify_logits(ft.pooled);
        const Vec logits_d = logits.cast<double>();

        // Teachers see the same augmented clip the student sees.
        bool missing = false;
        const double s = setup.scores->score_or_default(video.id, &missing);
        if (missing && warned_missing.insert(video.id).second)
          std::cerr << "warning: no cached similarity score for '" << video.id
                    << "'; using s = 0.5\n";
        const Vec p_teacher =
            combine_teachers(teacher_probs(*setup.teacher_invariant, vol),
                             teacher_probs(*setup.teacher_distinctive, vol), s);

        Vec dlogits = Vec::Zero(logits_d.size());
        double sample_loss = 0.0;
        if (is_labeled[k]) {
          Vec dce;
          const double ce = cross_entropy_from_logits(logits_d, *video.label, &dce);
          sample_loss += ce;
          dlogits += dce;
          epoch_sup += ce;
          ++sup_count;
        }
        Vec ddist;
        const double dist = distill_from_logits(p_teacher, logits_d, kind, &ddist);
        sample_loss += config.omega * dist;
        dlogits += config.omega * ddist;
        epoch_unsup += dist;
        ++all_count;
        batch_total += sample_loss;

        const VecX<float> dl = (dlogits / bsz).cast<float>();
        const VecX<float> dpooled = net->classifier_backward(ft.pooled, dl);
        net->encode_backward(EncoderWeights::pooled_to_unpooled_grad(
                                 dpooled, static_cast<int>(ft.unpooled.rows())),
                             ctx);
      }
      batch_total /= bsz;
      ensure_finite(batch_total, epoch, batch_videos);
      opt.step(trainable, lr);
      epoch_total += batch_total * bsz;
    }

    const double mean_total = epoch_total / static_cast<double>(all_count);
    const double mean_sup = sup_count ? epoch_sup / static_cast<double>(sup_count) : 0.0;
    const double mean_unsup = epoch_unsup / static_cast<double>(all_count);
    const double acc = quick_accuracy(*net, labeled, f, config.crop_size);
    log.append(json{{"epoch", epoch},
                    {"stage", "train_student"},
                    {"loss", mean_total},
                    {"loss_sup", mean_sup},
                    {"loss_unsup", mean_unsup},
                    {"lr", lr},
                    {"accuracy", acc}});
    opt.schedule.observe_epoch_loss(epoch, mean_total);
    save_epoch_checkpoint(*net, opt, out_dir, epoch);
  }
  save_checkpoint(*net, &opt, out_dir / "final.tbck");
  return net;
}

double quick_accuracy(EncoderWeights& net, const std::vector<const VideoInstance*>& videos,
                      int clip_len, int input_size) {
  std::size_t correct = 0, total = 0;
  for (const auto* v : videos) {
    if (!v->label) continue;
    const Video clip = center_crop_resize(slice_clip(*v, 0, clip_len), 1.0, input_size,
                                          input_size);
    const auto ft = net.encode_clip(to_volume<float>(clip));
    const VecX<float> logits = net.classify_logits(ft.pooled);
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.size(); ++c)
      if (logits[c] > logits[best]) best = c;
    if (static_cast<int>(best) == *v->label) ++correct;
    ++total;
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace tb
