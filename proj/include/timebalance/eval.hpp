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

#include <map>
#include <vector>

#include "timebalance/datamodel.hpp"
#include "timebalance/encoder.hpp"
#include "timebalance/losses.hpp"

namespace tb {

// Video-level inference: predictions of uniformly spaced clips at several
// center-crop scales, averaged on the simplex.
struct EvalProtocol {
  int num_clips = 10;
  int num_scales = 3;  // scales are taken from {1.0, 0.875, 0.75} in order
  int clip_len = 8;
  int input_size = 16;
};

// Clip start schedule: floor(k * (T - F) / (num_clips - 1)); a single clip
// starts at 0.
std::vector<int> clip_start_schedule(int total_frames, int clip_len, int num_clips);

extern const double kEvalScales[3];

// Mean softmax output over all clip x scale combinations.
Vec predict_video(const EncoderWeights& net, const Video& video, const EvalProtocol& protocol);

struct EvalReport {
  double top1 = 0.0;
  std::map<int, double> per_class;     // class -> accuracy
  std::map<int, int> class_counts;     // class -> video count
  int num_videos = 0;
  EvalProtocol protocol;
};

// Deterministic; argmax ties break toward the lower class index.
EvalReport evaluate(const EncoderWeights& net, const std::vector<const VideoInstance*>& test_set,
                    const EvalProtocol& protocol);

// Per-class accuracy deltas (distinctive minus invariant), sorted descending.
// Returns the full sorted list; the first k and last k entries are the
// extremes.
std::vector<std::pair<int, double>> classwise_delta(const EvalReport& report_distinctive,
                                                    const EvalReport& report_invariant);

void write_delta_csv(const std::filesystem::path& path,
                     const std::vector<std::pair<int, double>>& deltas, int k);

}  // namespace tb
