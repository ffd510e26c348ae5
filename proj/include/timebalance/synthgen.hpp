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

namespace tb {

// Synthetic corpus with two families of classes:
//  - atomic: one parametric shape oscillating with a class-specific period,
//    so every clip of a video looks like every other clip;
//  - composite: four ordered motion phases, one per clip window, where the
//    class identity is the phase ORDER (all composite classes share the same
//    shape and the same phase set).
struct SynthSpec {
  int num_classes_atomic = 5;
  int num_classes_composite = 5;
  int videos_per_class = 20;
  int frames = 64;   // n * pretraining clip length for the default pipeline
  int height = 32;
  int width = 32;
  double noise_std = 0.01;
  std::uint64_t seed = 0;

  int num_classes() const { return num_classes_atomic + num_classes_composite; }
};

void validate(const SynthSpec& spec);

// Class naming: atomic_00..; composite_00.. — lexicographic rank matches the
// generated class index (all atomic classes sort before composite ones).
std::string synth_class_name(const SynthSpec& spec, int class_id);

// Both generators are pure functions of (class_id, seed, spec).
VideoInstance gen_atomic(int class_id, std::uint64_t seed, const SynthSpec& spec);
VideoInstance gen_composite(int class_id, std::uint64_t seed, const SynthSpec& spec);

// Writes `<out_root>/<class_name>/<video_id>.tbv` for every class/video plus
// `manifest.txt` with kind tags. Fully reproducible from (spec, spec.seed).
void gen_benchmark(const SynthSpec& spec, const std::filesystem::path& out_root);

}  // namespace tb
