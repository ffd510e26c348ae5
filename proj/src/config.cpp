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

#include "timebalance/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "timebalance/common.hpp"

namespace tb {

namespace {

struct KeyDef {
  std::string name;
  std::function<std::string(const Config&)> get;
  std::function<void(Config&, const std::string&, int line)> set;
};

[[noreturn]] void fail(const std::string& key, int line, const std::string& why) {
  throw ConfigError("config line " + std::to_string(line) + ": key '" + key + "': " + why);
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw, int line) {
  T value{};
  if constexpr (std::is_floating_point_v<T>) {
    // gcc 11 lacks from_chars for double in some configurations; strtod is
    // exact and locale-independent for the "C" locale used here.
    char* end = nullptr;
    value = static_cast<T>(std::strtod(raw.c_str(), &end));
    if (end != raw.c_str() + raw.size() || raw.empty()) fail(key, line, "expected a real number");
  } else {
    auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
    if (ec != std::errc() || p != raw.data() + raw.size())
      fail(key, line, "expected an integer");
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

using Check = std::function<void(const Config&, const std::string&, int)>;

KeyDef int_key(const std::string& name, int Config::*field, int min_value, int max_value) {
  return {name,
          [field](const Config& c) { return std::to_string(c.*field); },
          [name, field, min_value, max_value](Config& c, const std::string& raw, int line) {
            const int v = parse_number<int>(name, raw, line);
            if (v < min_value || v > max_value)
              fail(name, line,
                   "must be in [" + std::to_string(min_value) + ", " +
                       std::to_string(max_value) + "]");
            c.*field = v;
          }};
}

KeyDef u64_key(const std::string& name, std::uint64_t Config::*field) {
  return {name,
          [field](const Config& c) { return std::to_string(c.*field); },
          [name, field](Config& c, const std::string& raw, int line) {
            c.*field = parse_number<std::uint64_t>(name, raw, line);
          }};
}

KeyDef real_key(const std::string& name, double Config::*field, double min_value,
                double max_value, bool min_exclusive = false) {
  return {name,
          [field](const Config& c) { return format_double(c.*field); },
          [name, field, min_value, max_value, min_exclusive](Config& c, const std::string& raw,
                                                             int line) {
            const double v = parse_number<double>(name, raw, line);
            const bool below = min_exclusive ? !(v > min_value) : v < min_value;
            if (below || v > max_value) fail(name, line, "value out of range");
            c.*field = v;
          }};
}

KeyDef bool_key(const std::string& name, bool Config::*field) {
  return {name,
          [field](const Config& c) { return (c.*field) ? "true" : "false"; },
          [name, field](Config& c, const std::string& raw, int line) {
            if (raw == "true")
              c.*field = true;
            else if (raw == "false")
              c.*field = false;
            else
              fail(name, line, "expected true or false");
          }};
}

KeyDef enum_key(const std::string& name, std::string Config::*field,
                std::vector<std::string> allowed) {
  return {name,
          [field](const Config& c) { return c.*field; },
          [name, field, allowed](Config& c, const std::string& raw, int line) {
            for (const auto& a : allowed)
              if (raw == a) {
                c.*field = raw;
                return;
              }
            std::string opts;
            for (const auto& a : allowed) opts += (opts.empty() ? "" : " | ") + a;
            fail(name, line, "expected one of: " + opts);
          }};
}

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = {
      u64_key("seed", &Config::seed),
      int_key("n", &Config::n, 2, 64),
      int_key("f_pretrain", &Config::f_pretrain, 4, 1024),
      int_key("f_student", &Config::f_student, 4, 1024),
      real_key("tau", &Config::tau, 0.0, 100.0, /*min_exclusive=*/true),
      real_key("omega", &Config::omega, 0.0, 1e6),
      real_key("base_lr", &Config::base_lr, 0.0, 10.0, /*min_exclusive=*/true),
      int_key("warmup_epochs", &Config::warmup_epochs, 0, 100000),
      int_key("patience", &Config::patience, 1, 100000),
      int_key("batch_size", &Config::batch_size, 2, 4096),
      int_key("epochs_pretrain", &Config::epochs_pretrain, 1, 100000),
      int_key("epochs_finetune", &Config::epochs_finetune, 1, 100000),
      int_key("epochs_student", &Config::epochs_student, 1, 100000),
      real_key("labeled_fraction", &Config::labeled_fraction, 0.0, 1.0,
               /*min_exclusive=*/true),
      real_key("batch_labeled_fraction", &Config::batch_labeled_fraction, 0.0, 1.0),
      enum_key("distill", &Config::distill, {"l2", "kl", "js"}),
      enum_key("student_init", &Config::student_init, {"ssl", "random"}),
      int_key("proj_dim", &Config::proj_dim, 2, 4096),
      int_key("finetune_clips_per_video", &Config::finetune_clips_per_video, 1, 1024),
      int_key("crop_size", &Config::crop_size, 8, 4096),
      bool_key("crop_enabled", &Config::crop_enabled),
      real_key("crop_scale_min", &Config::crop_scale_min, 0.0, 1.0, /*min_exclusive=*/true),
      real_key("crop_scale_max", &Config::crop_scale_max, 0.0, 1.0, /*min_exclusive=*/true),
      real_key("flip_prob", &Config::flip_prob, 0.0, 1.0),
      real_key("grayscale_prob", &Config::grayscale_prob, 0.0, 1.0),
      real_key("jitter_brightness", &Config::jitter_brightness, 0.0, 1.0),
      real_key("jitter_contrast", &Config::jitter_contrast, 0.0, 1.0),
      real_key("jitter_saturation", &Config::jitter_saturation, 0.0, 1.0),
      int_key("synth_atomic", &Config::synth_atomic, 0, 64),
      int_key("synth_composite", &Config::synth_composite, 0, 64),
      int_key("synth_videos_per_class", &Config::synth_videos_per_class, 1, 100000),
      int_key("synth_frames", &Config::synth_frames, 4, 100000),
      int_key("synth_size", &Config::synth_size, 8, 4096),
      real_key("synth_noise_std", &Config::synth_noise_std, 0.0, 1.0),
      int_key("eval_num_clips", &Config::eval_num_clips, 1, 10000),
      int_key("eval_num_scales", &Config::eval_num_scales, 1, 3),
  };
  return table;
}

void validate(const Config& c) {
  auto require = [](bool ok, const std::string& why) {
    if (!ok) throw ConfigError("config: " + why);
  };
  require(c.f_pretrain % 4 == 0 && c.f_student % 4 == 0,
          "clip lengths must be divisible by the temporal stride (4)");
  require(c.crop_size % 8 == 0, "crop_size must be divisible by 8");
  require(c.crop_scale_min <= c.crop_scale_max, "crop_scale_min must be <= crop_scale_max");
  require(c.synth_atomic + c.synth_composite >= 2, "need at least 2 synthetic classes");
  require(c.synth_frames % 4 == 0, "synth_frames must be divisible by 4");
}

}  // namespace

DistillKind Config::distill_kind() const {
  if (distill == "l2") return DistillKind::L2;
  if (distill == "kl") return DistillKind::KL;
  return DistillKind::JS;
}

SynthSpec Config::synth_spec() const {
  SynthSpec s;
  s.num_classes_atomic = synth_atomic;
  s.num_classes_composite = synth_composite;
  s.videos_per_class = synth_videos_per_class;
  s.frames = synth_frames;
  s.height = synth_size;
  s.width = synth_size;
  s.noise_std = synth_noise_std;
  s.seed = seed;
  return s;
}

AugmentSpec Config::augment_spec(std::uint64_t stream_seed) const {
  AugmentSpec a;
  a.crop_enabled = crop_enabled;
  a.crop_height = crop_size;
  a.crop_width = crop_size;
  a.crop_scale_min = crop_scale_min;
  a.crop_scale_max = crop_scale_max;
  a.flip_prob = flip_prob;
  a.grayscale_prob = grayscale_prob;
  a.jitter_brightness = jitter_brightness;
  a.jitter_contrast = jitter_contrast;
  a.jitter_saturation = jitter_saturation;
  a.seed = stream_seed;
  return a;
}

Config parse_config_text(const std::string& text) {
  Config config;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    bool found = false;
    for (const auto& def : key_table()) {
      if (def.name == key) {
        def.set(config, value, line_no);
        found = true;
        break;
      }
    }
    if (!found)
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key +
                        "'");
  }
  validate(config);
  return config;
}

Config parse_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

std::string dump_config(const Config& config) {
  std::ostringstream os;
  for (const auto& def : key_table()) os << def.name << " = " << def.get(config) << "\n";
  return os.str();
}

void apply_env_seed(Config& config) {
  if (const char* env = std::getenv("TIMEBALANCE_SEED")) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(env, env + std::strlen(env), v);
    if (ec != std::errc() || p != env + std::strlen(env))
      throw ConfigError("TIMEBALANCE_SEED must be a non-negative integer");
    config.seed = v;
  }
}

}  // namespace tb
