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

#include <fstream>
#include <set>

#include "timebalance/common.hpp"
#include "timebalance/datamodel.hpp"
#include "timebalance/rng.hpp"

namespace fs = std::filesystem;

namespace {

tb::Video random_video(tb::Rng& rng, int t, int h, int w, int c = 3) {
  tb::Video v(t, h, w, c);
  for (auto& x : v.data) x = static_cast<float>(rng.uniform());
  return v;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("tb_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// 20-class corpus with `per_class` videos each, T frames.
void write_corpus(const fs::path& root, int classes, int per_class, int frames,
                  std::uint64_t seed) {
  tb::Rng rng(seed);
  for (int c = 0; c < classes; ++c) {
    char cls[16];
    std::snprintf(cls, sizeof(cls), "class_%02d", c);
    fs::create_directories(root / cls);
    for (int i = 0; i < per_class; ++i) {
      char id[32];
      std::snprintf(id, sizeof(id), "%s_v%03d.tbv", cls, i);
      tb::write_tbv(root / cls / id, random_video(rng, frames, 8, 8));
    }
  }
}

std::set<std::string> ids(const std::vector<tb::VideoInstance>& v) {
  std::set<std::string> out;
  for (const auto& x : v) out.insert(x.id);
  return out;
}

}  // namespace

TEST_CASE("tbv container round trip is lossless") {
  TempDir dir("tbv");
  tb::Rng rng(1);
  const tb::Video v = random_video(rng, 6, 5, 4, 3);
  tb::write_tbv(dir.path / "a.tbv", v);
  const tb::Video r = tb::read_tbv(dir.path / "a.tbv");
  CHECK(r.frames == v.frames);
  CHECK(r.height == v.height);
  CHECK(r.width == v.width);
  CHECK(r.channels == v.channels);
  CHECK(r.data == v.data);
}

TEST_CASE("tbv loader rejects corrupt and truncated containers") {
  TempDir dir("tbv_bad");
  {
    std::ofstream os(dir.path / "bad_magic.tbv", std::ios::binary);
    os << "NOPE" << std::string(64, '\0');
  }
  CHECK_THROWS_AS(tb::read_tbv(dir.path / "bad_magic.tbv"), tb::DataError);

  tb::Rng rng(2);
  tb::write_tbv(dir.path / "ok.tbv", random_video(rng, 4, 4, 4));
  {
    // Truncate the payload.
    const auto size = fs::file_size(dir.path / "ok.tbv");
    fs::resize_file(dir.path / "ok.tbv", size - 10);
  }
  CHECK_THROWS_AS(tb::read_tbv(dir.path / "ok.tbv"), tb::DataError);

  CHECK_THROWS_AS(tb::read_tbv(dir.path / "missing.tbv"), tb::DataError);

  // Out-of-range frame values are rejected.
  tb::Video bad(2, 2, 2, 1);
  bad.data[3] = 1.5f;
  std::ofstream os(dir.path / "range.tbv", std::ios::binary);
  os.write("TBV1", 4);
  tb::write_u32le(os, 2);
  tb::write_u32le(os, 2);
  tb::write_u32le(os, 2);
  tb::write_u32le(os, 1);
  tb::write_u32le(os, 1);
  tb::write_u64le(os, 0);
  tb::write_f32le_array(os, bad.data.data(), bad.data.size());
  os.close();
  CHECK_THROWS_AS(tb::read_tbv(dir.path / "range.tbv"), tb::DataError);
}

TEST_CASE("split is deterministic, stratified, and covers every video once") {
  TempDir dir("split");
  write_corpus(dir.path, 20, 5, 16, 7);

  const tb::SplitOptions opts{0.1, 7, 1};
  const auto a = tb::load_dataset(dir.path, opts);
  const auto b = tb::load_dataset(dir.path, opts);
  CHECK(a.labeled.size() == 10);
  CHECK(a.unlabeled.size() == 90);
  CHECK(ids(a.labeled) == ids(b.labeled));
  CHECK(ids(a.unlabeled) == ids(b.unlabeled));

  // Union covers all videos exactly once.
  std::set<std::string> all = ids(a.labeled);
  for (const auto& id : ids(a.unlabeled)) CHECK(all.insert(id).second);
  CHECK(all.size() == 100);

  // Unlabeled instances carry no label; labeled ones do.
  for (const auto& v : a.unlabeled) CHECK_FALSE(v.label.has_value());
  for (const auto& v : a.labeled) CHECK(v.label.has_value());

  // Per-class labeled counts deviate from the exact quota by at most 1
  // (exact quota here is 0.5 per class).
  std::map<int, int> per_class;
  for (const auto& v : a.labeled) per_class[*v.label] += 1;
  for (const auto& [cls, count] : per_class) CHECK(count <= 1);

  // A different seed moves the choice of labeled videos.
  const auto c = tb::load_dataset(dir.path, {0.1, 8, 1});
  CHECK(ids(c.labeled) != ids(a.labeled));
}

TEST_CASE("stratified quota is balanced with equal class sizes") {
  TempDir dir("split_eq");
  write_corpus(dir.path, 10, 20, 16, 3);
  const auto split = tb::load_dataset(dir.path, {0.1, 5, 1});
  CHECK(split.labeled.size() == 20);
  std::map<int, int> per_class;
  for (const auto& v : split.labeled) per_class[*v.label] += 1;
  CHECK(per_class.size() == 10);
  for (const auto& [cls, count] : per_class) CHECK(count == 2);
}

TEST_CASE("labeled_fraction 1.0 leaves the unlabeled set empty") {
  TempDir dir("split_full");
  write_corpus(dir.path, 3, 4, 16, 1);
  const auto split = tb::load_dataset(dir.path, {1.0, 0, 1});
  CHECK(split.labeled.size() == 12);
  CHECK(split.unlabeled.empty());
}

TEST_CASE("invalid fraction and short videos are rejected at load") {
  TempDir dir("split_err");
  write_corpus(dir.path, 2, 2, 16, 1);
  CHECK_THROWS_AS(tb::load_dataset(dir.path, {0.0, 0, 1}), tb::ContractError);
  CHECK_THROWS_AS(tb::load_dataset(dir.path, {1.5, 0, 1}), tb::ContractError);
  CHECK_THROWS_AS(tb::load_dataset(dir.path, {0.5, 0, 32}), tb::DataError);
  CHECK_THROWS_AS(tb::load_dataset(dir.path / "nope", {0.5, 0, 1}), tb::DataError);
}

TEST_CASE("split manifest lists every video with its split") {
  TempDir dir("manifest");
  write_corpus(dir.path, 2, 3, 16, 1);
  const auto split = tb::load_dataset(dir.path, {0.5, 1, 1});
  tb::write_split_manifest(dir.path / "m.txt", split);
  std::ifstream is(dir.path / "m.txt");
  std::string line;
  int labeled = 0, unlabeled = 0;
  while (std::getline(is, line)) {
    if (line.find(",labeled") != std::string::npos) ++labeled;
    if (line.find(",unlabeled") != std::string::npos) ++unlabeled;
  }
  CHECK(labeled == static_cast<int>(split.labeled.size()));
  CHECK(unlabeled == static_cast<int>(split.unlabeled.size()));
}

TEST_CASE("consecutive clip sampling covers disjoint windows") {
  tb::Rng rng(4);
  tb::VideoInstance inst;
  inst.id = "v";
  inst.video = random_video(rng, 32, 8, 8);

  const auto set = tb::sample_consecutive_clips(inst, 4, 8, tb::StartPolicy::fixed(0));
  CHECK(set.timestamps == std::vector<int>{0, 8, 16, 24});
  CHECK(set.clips.size() == 4);
  for (int t = 0; t < 4; ++t) {
    CHECK(set.clips[t].frames == 8);
    // Every clip frame matches the source frames without reuse.
    for (int f = 0; f < 8; ++f)
      CHECK(set.clips[t].at(f, 3, 3, 0) == inst.video.at(t * 8 + f, 3, 3, 0));
  }

  // Random start policy keeps windows inside the video and disjoint.
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto s = tb::sample_consecutive_clips(inst, 3, 5,
                                                tb::StartPolicy::uniform_random(seed));
    CHECK(s.timestamps.front() >= 0);
    CHECK(s.timestamps.back() + 5 <= 32);
    for (std::size_t i = 1; i < s.timestamps.size(); ++i)
      CHECK(s.timestamps[i] == s.timestamps[i - 1] + 5);
  }

  tb::VideoInstance short_inst;
  short_inst.id = "short";
  short_inst.video = random_video(rng, 31, 8, 8);
  CHECK_THROWS_AS(tb::sample_consecutive_clips(short_inst, 4, 8, tb::StartPolicy::fixed(0)),
                  tb::DataError);
}

TEST_CASE("augmentation identity, involution, and grayscale contracts") {
  tb::Rng rng(5);
  const tb::Video clip = random_video(rng, 4, 10, 10);

  tb::AugmentSpec identity;  // all probabilities 0, crop disabled
  identity.seed = 99;
  const tb::Video same = tb::augment(clip, identity);
  CHECK(same.data == clip.data);

  tb::AugmentSpec flip;
  flip.flip_prob = 1.0;
  flip.seed = 3;
  const tb::Video once = tb::augment(clip, flip);
  CHECK(once.data != clip.data);
  const tb::Video twice = tb::augment(once, flip);
  CHECK(twice.data == clip.data);

  tb::AugmentSpec gray;
  gray.grayscale_prob = 1.0;
  gray.seed = 4;
  const tb::Video g = tb::augment(clip, gray);
  for (int t = 0; t < g.frames; ++t)
    for (int y = 0; y < g.height; ++y)
      for (int x = 0; x < g.width; ++x) {
        CHECK(g.at(t, y, x, 0) == g.at(t, y, x, 1));
        CHECK(g.at(t, y, x, 1) == g.at(t, y, x, 2));
      }
}

TEST_CASE("augmentation preserves shape and range and is seed-deterministic") {
  tb::Rng rng(6);
  const tb::Video clip = random_video(rng, 4, 12, 12);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    tb::AugmentSpec spec;
    spec.crop_enabled = true;
    spec.crop_height = 8;
    spec.crop_width = 8;
    spec.crop_scale_min = 0.5;
    spec.crop_scale_max = 1.0;
    spec.flip_prob = 0.5;
    spec.grayscale_prob = 0.3;
    spec.jitter_brightness = 0.4;
    spec.jitter_contrast = 0.4;
    spec.jitter_saturation = 0.4;
    spec.seed = seed;
    const tb::Video a = tb::augment(clip, spec);
    CHECK(a.frames == 4);
    CHECK(a.height == 8);
    CHECK(a.width == 8);
    CHECK(a.channels == 3);
    for (float x : a.data) {
      CHECK(x >= 0.0f);
      CHECK(x <= 1.0f);
    }
    const tb::Video b = tb::augment(clip, spec);
    CHECK(a.data == b.data);  // same seed, bitwise identical
  }
}

TEST_CASE("center crop resize keeps values in range and full scale is identity-sized") {
  tb::Rng rng(8);
  const tb::Video clip = random_video(rng, 2, 32, 32);
  const tb::Video full = tb::center_crop_resize(clip, 1.0, 16, 16);
  CHECK(full.height == 16);
  CHECK(full.width == 16);
  const tb::Video same = tb::center_crop_resize(clip, 1.0, 32, 32);
  CHECK(same.data == clip.data);
  for (double scale : {0.875, 0.75}) {
    const tb::Video c = tb::center_crop_resize(clip, scale, 16, 16);
    CHECK(c.height == 16);
    for (float x : c.data) {
      CHECK(x >= 0.0f);
      CHECK(x <= 1.0f);
    }
  }
}
