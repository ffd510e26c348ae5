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

#include "timebalance/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "timebalance/common.hpp"
#include "timebalance/rng.hpp"

namespace tb {

namespace fs = std::filesystem;

namespace {
constexpr char kMagic[4] = {'T', 'B', 'V', '1'};
constexpr std::uint32_t kDtypeF32 = 1;
}  // namespace

void write_tbv(const fs::path& path, const Video& video) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path.string());
  os.write(kMagic, 4);
  write_u32le(os, static_cast<std::uint32_t>(video.frames));
  write_u32le(os, static_cast<std::uint32_t>(video.height));
  write_u32le(os, static_cast<std::uint32_t>(video.width));
  write_u32le(os, static_cast<std::uint32_t>(video.channels));
  write_u32le(os, kDtypeF32);
  write_u64le(os, 0);  // reserved, pads the header to 32 bytes
  write_f32le_array(os, video.data.data(), video.data.size());
  if (!os) throw DataError("write failed: " + path.string());
}

Video read_tbv(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open video container: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("bad container magic in " + path.string());
  std::uint32_t t = 0, h = 0, w = 0, c = 0, dtype = 0;
  std::uint64_t reserved = 0;
  if (!read_u32le(is, t) || !read_u32le(is, h) || !read_u32le(is, w) || !read_u32le(is, c) ||
      !read_u32le(is, dtype) || !read_u64le(is, reserved))
    throw DataError("truncated container header in " + path.string());
  if (dtype != kDtypeF32) throw DataError("unsupported dtype code in " + path.string());
  if (t == 0 || h == 0 || w == 0 || c == 0)
    throw DataError("degenerate dimensions in " + path.string());
  Video v(static_cast<int>(t), static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
  if (!read_f32le_array(is, v.data.data(), v.data.size()))
    throw DataError("truncated frame payload in " + path.string());
  for (float x : v.data) {
    if (!std::isfinite(x) || x < 0.0f || x > 1.0f)
      throw DataError("frame value outside [0,1] in " + path.string());
  }
  return v;
}

namespace {

std::optional<VideoKind> parse_kind(const std::string& s) {
  if (s == "atomic") return VideoKind::Atomic;
  if (s == "composite") return VideoKind::Composite;
  return std::nullopt;
}

// Reads `video_id,class_name,kind` lines if the corpus carries a manifest.
std::map<std::string, VideoKind> read_kind_manifest(const fs::path& root) {
  std::map<std::string, VideoKind> kinds;
  std::ifstream is(root / "manifest.txt");
  if (!is) return kinds;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto c1 = line.find(',');
    const auto c2 = line.rfind(',');
    if (c1 == std::string::npos || c2 == c1) continue;
    const std::string id = line.substr(0, c1);
    if (auto k = parse_kind(line.substr(c2 + 1))) kinds.emplace(id, *k);
  }
  return kinds;
}

}  // namespace

DatasetSplit load_dataset(const fs::path& root, const SplitOptions& options) {
  if (!(options.labeled_fraction > 0.0 && options.labeled_fraction <= 1.0))
    throw ContractError("labeled_fraction must be in (0,1]");
  if (!fs::is_directory(root)) throw DataError("dataset root not found: " + root.string());

  DatasetSplit split;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) split.class_names.push_back(entry.path().filename().string());
  }
  std::sort(split.class_names.begin(), split.class_names.end());
  if (split.class_names.empty()) throw DataError("no class directories under " + root.string());

  const auto kinds = read_kind_manifest(root);

  // Per-class instance lists, sorted by id so the split does not depend on
  // directory iteration order.
  std::vector<std::vector<VideoInstance>> by_class(split.class_names.size());
  std::size_t total = 0;
  for (std::size_t ci = 0; ci < split.class_names.size(); ++ci) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(root / split.class_names[ci])) {
      if (entry.path().extension() == ".tbv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      VideoInstance inst;
      inst.id = f.stem().string();
      inst.video = read_tbv(f);
      if (inst.video.frames < options.min_frames)
        throw DataError("video too short (" + std::to_string(inst.video.frames) + " < " +
                        std::to_string(options.min_frames) + " frames): " + f.string());
      inst.label = static_cast<int>(ci);
      if (auto it = kinds.find(inst.id); it != kinds.end()) inst.kind = it->second;
      by_class[ci].push_back(std::move(inst));
      ++total;
    }
  }
  if (total == 0) throw DataError("no .tbv videos under " + root.string());

  // Class-stratified labeled quota by largest remainder, so per-class counts
  // deviate from the exact fraction by at most one.
  const auto target = static_cast<std::size_t>(
      std::llround(options.labeled_fraction * static_cast<double>(total)));
  std::vector<std::size_t> quota(by_class.size(), 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t ci = 0; ci < by_class.size(); ++ci) {
    const double exact = options.labeled_fraction * static_cast<double>(by_class[ci].size());
    quota[ci] = static_cast<std::size_t>(std::floor(exact));
    quota[ci] = std::min(quota[ci], by_class[ci].size());
    assigned += quota[ci];
    remainders.emplace_back(exact - static_cast<double>(quota[ci]), ci);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (const auto& [rem, ci] : remainders) {
    if (assigned >= target) break;
    if (quota[ci] < by_class[ci].size()) {
      ++quota[ci];
      ++assigned;
    }
  }

  Rng rng(derive_seed({0x517b1ed5u, options.seed}));
  for (std::size_t ci = 0; ci < by_class.size(); ++ci) {
    std::vector<std::size_t> order(by_class[ci].size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t i = 0; i < order.size(); ++i) {
      VideoInstance& inst = by_class[ci][order[i]];
      if (i < quota[ci]) {
        split.labeled.push_back(std::move(inst));
      } else {
        inst.label.reset();
        split.unlabeled.push_back(std::move(inst));
      }
    }
  }
  auto by_id = [](const VideoInstance& a, const VideoInstance& b) { return a.id < b.id; };
  std::sort(split.labeled.begin(), split.labeled.end(), by_id);
  std::sort(split.unlabeled.begin(), split.unlabeled.end(), by_id);
  return split;
}

void write_split_manifest(const fs::path& path, const DatasetSplit& split) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write split manifest: " + path.string());
  for (const auto& v : split.labeled) os << v.id << ",labeled\n";
  for (const auto& v : split.unlabeled) os << v.id << ",unlabeled\n";
}

ClipSet sample_consecutive_clips(const VideoInstance& video, int n, int clip_len,
                                 const StartPolicy& policy) {
  check_contract(n >= 1 && clip_len >= 1, "clip count and length must be positive");
  const Video& v = video.video;
  const int span = n * clip_len;
  if (v.frames < span)
    throw DataError("cannot sample " + std::to_string(n) + " clips of " +
                    std::to_string(clip_len) + " frames from video '" + video.id + "' with " +
                    std::to_string(v.frames) + " frames");
  int start = 0;
  if (policy.mode == StartPolicy::Mode::UniformRandom) {
    Rng rng(policy.seed);
    start = static_cast<int>(rng.uniform_int(0, v.frames - span));
  } else {
    start = policy.start;
    check_contract(start >= 0 && start + span <= v.frames, "fixed start out of range");
  }

  ClipSet set;
  set.video_id = video.id;
  const std::size_t frame_elems =
      static_cast<std::size_t>(v.height) * v.width * v.channels;
  for (int t = 0; t < n; ++t) {
    Video clip(clip_len, v.height, v.width, v.channels);
    const int s = start + t * clip_len;
    std::copy_n(v.data.begin() + static_cast<std::ptrdiff_t>(s) * frame_elems,
                frame_elems * clip_len, clip.data.begin());
    set.clips.push_back(std::move(clip));
    set.timestamps.push_back(s);
  }
  return set;
}

namespace {

float sample_bilinear(const Video& v, int t, double y, double x, int c) {
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const int y1 = y0 + 1, x1 = x0 + 1;
  const double fy = y - y0, fx = x - x0;
  auto px = [&](int yy, int xx) {
    yy = std::clamp(yy, 0, v.height - 1);
    xx = std::clamp(xx, 0, v.width - 1);
    return static_cast<double>(v.at(t, yy, xx, c));
  };
  const double top = px(y0, x0) * (1.0 - fx) + px(y0, x1) * fx;
  const double bot = px(y1, x0) * (1.0 - fx) + px(y1, x1) * fx;
  return static_cast<float>(top * (1.0 - fy) + bot * fy);
}

Video crop_resize(const Video& v, int top, int left, int crop_h, int crop_w, int out_h,
                  int out_w) {
  Video out(v.frames, out_h, out_w, v.channels);
  const double sy = static_cast<double>(crop_h) / out_h;
  const double sx = static_cast<double>(crop_w) / out_w;
  for (int t = 0; t < v.frames; ++t) {
    for (int y = 0; y < out_h; ++y) {
      const double src_y = top + (y + 0.5) * sy - 0.5;
      for (int x = 0; x < out_w; ++x) {
        const double src_x = left + (x + 0.5) * sx - 0.5;
        for (int c = 0; c < v.channels; ++c) {
          out.at(t, y, x, c) =
              std::clamp(sample_bilinear(v, t, src_y, src_x, c), 0.0f, 1.0f);
        }
      }
    }
  }
  return out;
}

// Rec.601 luma; assumes 3 channels, otherwise a plain mean.
double pixel_luma(const Video& v, int t, int y, int x) {
  if (v.channels == 3) {
    return 0.299 * v.at(t, y, x, 0) + 0.587 * v.at(t, y, x, 1) + 0.114 * v.at(t, y, x, 2);
  }
  double s = 0.0;
  for (int c = 0; c < v.channels; ++c) s += v.at(t, y, x, c);
  return s / v.channels;
}

}  // namespace

Video resize_bilinear(const Video& clip, int out_h, int out_w) {
  if (clip.height == out_h && clip.width == out_w) return clip;
  return crop_resize(clip, 0, 0, clip.height, clip.width, out_h, out_w);
}

Video center_crop_resize(const Video& clip, double scale, int out_h, int out_w) {
  check_contract(scale > 0.0 && scale <= 1.0, "crop scale must be in (0,1]");
  const int side = std::max(
      1, static_cast<int>(std::lround(scale * std::min(clip.height, clip.width))));
  const int top = (clip.height - side) / 2;
  const int left = (clip.width - side) / 2;
  if (side == clip.height && side == clip.width && side == out_h && side == out_w) return clip;
  return crop_resize(clip, top, left, side, side, out_h, out_w);
}

Video augment(const Video& clip, const AugmentSpec& spec) {
  Rng rng(spec.seed);
  Video out = clip;

  if (spec.crop_enabled) {
    check_contract(spec.crop_height > 0 && spec.crop_width > 0,
                   "crop output dimensions must be positive");
    const double scale = rng.uniform(spec.crop_scale_min, spec.crop_scale_max);
    const int side = std::max(
        1, static_cast<int>(std::lround(scale * std::min(clip.height, clip.width))));
    const int top = static_cast<int>(rng.uniform_int(0, clip.height - side));
    const int left = static_cast<int>(rng.uniform_int(0, clip.width - side));
    out = crop_resize(out, top, left, side, side, spec.crop_height, spec.crop_width);
  }

  if (spec.flip_prob > 0.0 && rng.bernoulli(spec.flip_prob)) {
    for (int t = 0; t < out.frames; ++t)
      for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width / 2; ++x)
          for (int c = 0; c < out.channels; ++c)
            std::swap(out.at(t, y, x, c), out.at(t, y, out.width - 1 - x, c));
  }

  const bool any_jitter = spec.jitter_brightness > 0.0 || spec.jitter_contrast > 0.0 ||
                          spec.jitter_saturation > 0.0;
  if (any_jitter) {
    const double fb =
        rng.uniform(std::max(0.0, 1.0 - spec.jitter_brightness), 1.0 + spec.jitter_brightness);
    const double fc =
        rng.uniform(std::max(0.0, 1.0 - spec.jitter_contrast), 1.0 + spec.jitter_contrast);
    const double fs =
        rng.uniform(std::max(0.0, 1.0 - spec.jitter_saturation), 1.0 + spec.jitter_saturation);
    // Contrast pivots on the clip-level mean luma so all frames of the clip
    // get one consistent photometric transform.
    double mean_luma = 0.0;
    for (int t = 0; t < out.frames; ++t)
      for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) mean_luma += pixel_luma(out, t, y, x);
    mean_luma /= static_cast<double>(out.frames) * out.height * out.width;
    for (int t = 0; t < out.frames; ++t) {
      for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
          const double luma = pixel_luma(out, t, y, x);
          for (int c = 0; c < out.channels; ++c) {
            double v = out.at(t, y, x, c);
            v *= fb;
            v = (v - mean_luma * fb) * fc + mean_luma * fb;
            v = (v - luma * fb * fc) * fs + luma * fb * fc;
            out.at(t, y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
          }
        }
      }
    }
  }

  if (spec.grayscale_prob > 0.0 && rng.bernoulli(spec.grayscale_prob)) {
    for (int t = 0; t < out.frames; ++t)
      for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
          const auto luma = static_cast<float>(pixel_luma(out, t, y, x));
          for (int c = 0; c < out.channels; ++c) out.at(t, y, x, c) = luma;
        }
  }

  return out;
}

}  // namespace tb
