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
#include <vector>

#include "timebalance/balance.hpp"
#include "timebalance/config.hpp"
#include "timebalance/datamodel.hpp"
#include "timebalance/encoder.hpp"
#include "timebalance/optimizer.hpp"

namespace tb {

enum class PretrainObjective { Invariant, Distinctive };

// Stage outputs land in `out_dir`: per-epoch checkpoints, `final.tbck`
// (with optimizer state) and `metrics.jsonl` (one JSON object per epoch).

// Self-supervised teacher pretraining; labels are ignored. The invariant
// objective minimizes L_I; the distinctive objective minimizes L_D1 + L_D2
// with a second augmented view set and one global clip of length n * F.
std::unique_ptr<EncoderWeights> pretrain_teacher(PretrainObjective objective,
                                                 const std::vector<const VideoInstance*>& videos,
                                                 int num_classes, const Config& config,
                                                 const std::filesystem::path& out_dir);

// Full-network supervised finetuning (backbone + classifier); the projection
// head stays frozen so cached similarity scores remain auditable.
std::unique_ptr<EncoderWeights> finetune_teacher(const EncoderWeights& pretrained,
                                                 const std::vector<const VideoInstance*>& labeled,
                                                 const Config& config,
                                                 const std::filesystem::path& out_dir);

struct StudentSetup {
  EncoderWeights* teacher_invariant = nullptr;
  EncoderWeights* teacher_distinctive = nullptr;
  const ScoreCache* scores = nullptr;
  std::uint64_t teacher_invariant_hash = 0;
  std::uint64_t teacher_distinctive_hash = 0;
  const EncoderWeights* init_weights = nullptr;  // null -> random init
};

// Semi-supervised student training: mixed labeled/unlabeled batches, frozen
// teachers in eval mode, TSTR-combined predictions distilled into the
// student; labeled samples additionally get cross-entropy.
std::unique_ptr<EncoderWeights> train_student(const StudentSetup& setup,
                                              const std::vector<const VideoInstance*>& labeled,
                                              const std::vector<const VideoInstance*>& unlabeled,
                                              int num_classes, const Config& config,
                                              const std::filesystem::path& out_dir);

// Single-clip top-1 on labeled instances (start 0, full-frame center crop);
// used for per-epoch progress metrics.
double quick_accuracy(EncoderWeights& net, const std::vector<const VideoInstance*>& videos,
                      int clip_len, int input_size);

std::vector<const VideoInstance*> instance_pointers(const std::vector<VideoInstance>& v);

}  // namespace tb
