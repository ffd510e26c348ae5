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
#include <optional>
#include <string>
#include <vector>

namespace tb {

// Dense frame tensor [T, H, W, Ch], row-major, values in [0, 1].
struct Video {
  int frames = 0;
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  Video() = default;
  Video(int t, int h, int w, int c)
      : frames(t), height(h), width(w), channels(c),
        data(static_cast<std::size_t>(t) * h * w * c, 0.0f) {}

  float& at(int t, int h, int w, int c) {
    return data[((static_cast<std::size_t>(t) * height + h) * width + w) * channels + c];
  }
  float at(int t, int h, int w, int c) const {
    return data[((static_cast<std::size_t>(t) * height + h) * width + w) * channels + c];
  }
  std::size_t size() const { return data.size(); }
};

enum class VideoKind { Atomic, Composite };

struct VideoInstance {
  std::string id;
  Video video;
  std::optional<int> label;        // class index, absent for unlabeled instances
  std::optional<VideoKind> kind;   // provenance tag from the corpus manifest
};

// n consecutive, non-overlapping clips from one video (stride = clip length).
struct ClipSet {
  std::string video_id;
  std::vector<Video> clips;
  std::vector<int> timestamps;  // start-frame indices, strictly increasing
};

struct StartPolicy {
  enum class Mode { UniformRandom, Fixed };
  Mode mode = Mode::Fixed;
  std::uint64_t seed = 0;  // for UniformRandom
  int start = 0;           // for Fixed

  static StartPolicy uniform_random(std::uint64_t seed) {
    return {Mode::UniformRandom, seed, 0};
  }
  static StartPolicy fixed(int start) { return {Mode::Fixed, 0, start}; }
};

// Stochastic clip transformations. With every probability at 0 and crop
// disabled this is the identity map; a fixed seed gives bitwise-identical
// output.
struct AugmentSpec {
  bool crop_enabled = false;
  int crop_height = 0;
  int crop_width = 0;
  double crop_scale_min = 1.0;  // relative side length of the sampled crop
  double crop_scale_max = 1.0;
  double flip_prob = 0.0;
  double grayscale_prob = 0.0;
  double jitter_brightness = 0.0;
  double jitter_contrast = 0.0;
  double jitter_saturation = 0.0;
  std::uint64_t seed = 0;
};

// --- On-disk container -----------------------------------------------------
// One file per video: 32-byte header (magic "TBV1", dims T,H,W,Ch as
// little-endian u32, dtype code 1 = float32, 8 reserved bytes), then
// row-major float32 little-endian frames.

void write_tbv(const std::filesystem::path& path, const Video& video);
Video read_tbv(const std::filesystem::path& path);

// --- Dataset loading --------------------------------------------------------

struct SplitOptions {
  double labeled_fraction = 1.0;  // must be in (0, 1]
  std::uint64_t seed = 0;
  int min_frames = 1;  // instances shorter than this are rejected at load
};

struct DatasetSplit {
  std::vector<VideoInstance> labeled;
  std::vector<VideoInstance> unlabeled;  // labels stripped
  std::vector<std::string> class_names;  // lexicographic; index = class id
};

// Loads `<root>/<class_name>/<video_id>.tbv` (class index = lexicographic
// rank of class_name) and produces a deterministic, class-stratified split.
DatasetSplit load_dataset(const std::filesystem::path& root, const SplitOptions& options);

// Writes `video_id,split` lines for audit.
void write_split_manifest(const std::filesystem::path& path, const DatasetSplit& split);

// --- Clip sampling and augmentation ----------------------------------------

ClipSet sample_consecutive_clips(const VideoInstance& video, int n, int clip_len,
                                 const StartPolicy& policy);

Video augment(const Video& clip, const AugmentSpec& spec);

// Deterministic eval-path preprocessing: center crop at a relative scale,
// then bilinear resize to out_h x out_w. Shared by the inference protocol
// and similarity scoring.
Video center_crop_resize(const Video& clip, double scale, int out_h, int out_w);

Video resize_bilinear(const Video& clip, int out_h, int out_w);

}  // namespace tb
