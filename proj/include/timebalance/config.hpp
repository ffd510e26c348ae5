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

#include <cstdint>
#include <filesystem>
#include <string>

#include "timebalance/datamodel.hpp"
#include "timebalance/losses.hpp"
#include "timebalance/synthgen.hpp"

namespace tb {

// Flat `key = value` configuration covering all pipeline stages. Unknown keys
// are rejected; every key has a documented default, so an empty file is a
// valid full configuration.
struct Config {
  // shared training knobs
  std::uint64_t seed = 7;
  int n = 4;                     // clips per video in SSL pretraining
  int f_pretrain = 16;           // pretraining clip length, frames
  int f_student = 8;             // finetune/student/eval clip length, frames
  double tau = 0.1;              // contrastive temperature
  double omega = 1.0;            // unsupervised loss weight
  double base_lr = 1e-3;
  int warmup_epochs = 10;
  int patience = 5;
  int batch_size = 8;
  int epochs_pretrain = 30;
  int epochs_finetune = 15;
  int epochs_student = 30;
  double labeled_fraction = 0.1;
  double batch_labeled_fraction = 0.5;  // labeled share of a student batch
  std::string distill = "l2";           // l2 | kl | js
  std::string student_init = "ssl";     // ssl | random
  int proj_dim = 32;
  int finetune_clips_per_video = 4;

  // augmentation
  int crop_size = 16;
  bool crop_enabled = true;
  double crop_scale_min = 0.6;
  double crop_scale_max = 1.0;
  double flip_prob = 0.5;
  double grayscale_prob = 0.2;
  double jitter_brightness = 0.2;
  double jitter_contrast = 0.2;
  double jitter_saturation = 0.2;

  // synthetic benchmark
  int synth_atomic = 5;
  int synth_composite = 5;
  int synth_videos_per_class = 20;
  int synth_frames = 64;
  int synth_size = 32;
  double synth_noise_std = 0.01;

  // inference protocol
  int eval_num_clips = 10;
  int eval_num_scales = 3;

  DistillKind distill_kind() const;
  SynthSpec synth_spec() const;
  AugmentSpec augment_spec(std::uint64_t stream_seed) const;
};

Config parse_config_text(const std::string& text);
Config parse_config(const std::filesystem::path& path);

// Emits every key in canonical order; dump(parse(x)) is idempotent.
std::string dump_config(const Config& config);

// Applies the TIMEBALANCE_SEED environment override, if set.
void apply_env_seed(Config& config);

}  // namespace tb
