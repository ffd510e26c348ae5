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

#include "timebalance/synthgen.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "timebalance/common.hpp"
#include "timebalance/rng.hpp"

namespace tb {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

enum class Shape { Disk, Square, Ring, Diamond, Cross, Bar };

struct Rgb {
  double r, g, b;
};

// Signed distances, negative inside. Points are rotated into the shape frame
// before evaluation; a ~1px smooth edge turns distance into coverage.
double shape_distance(Shape shape, double dx, double dy, double size, double angle,
                      double aspect) {
  const double ca = std::cos(-angle), sa = std::sin(-angle);
  const double x = dx * ca - dy * sa;
  const double y = dx * sa + dy * ca;
  switch (shape) {
    case Shape::Disk:
      return std::hypot(x, y) - size;
    case Shape::Square:
      return std::max(std::abs(x), std::abs(y)) - size;
    case Shape::Ring: {
      const double d = std::abs(std::hypot(x, y) - size);
      return d - std::max(1.2, 0.35 * size);
    }
    case Shape::Diamond:
      return (std::abs(x) + std::abs(y)) * 0.7071067811865476 - size;
    case Shape::Cross: {
      const double w = std::max(1.0, 0.4 * size);
      const double horizontal = std::max(std::abs(x) - size, std::abs(y) - w);
      const double vertical = std::max(std::abs(y) - size, std::abs(x) - w);
      return std::min(horizontal, vertical);
    }
    case Shape::Bar:
      return std::max(std::abs(x) - size, std::abs(y) - size * aspect);
  }
  return 1e9;
}

struct ShapeState {
  double cx, cy;       // center, pixels
  double size;         // half extent, pixels
  double angle;        // radians
  double brightness;   // multiplies the base color
};

void render_frame(Video& v, int t, const ShapeState& st, Shape shape, const Rgb& color,
                  double aspect) {
  for (int y = 0; y < v.height; ++y) {
    for (int x = 0; x < v.width; ++x) {
      const double d = shape_distance(shape, x + 0.5 - st.cx, y + 0.5 - st.cy, st.size,
                                      st.angle, aspect);
      const double alpha = std::clamp(0.5 - d, 0.0, 1.0);
      if (alpha <= 0.0) continue;
      const double k = alpha * st.brightness;
      v.at(t, y, x, 0) = static_cast<float>(std::clamp(color.r * k, 0.0, 1.0));
      v.at(t, y, x, 1) = static_cast<float>(std::clamp(color.g * k, 0.0, 1.0));
      v.at(t, y, x, 2) = static_cast<float>(std::clamp(color.b * k, 0.0, 1.0));
    }
  }
}

void add_noise(Video& v, double noise_std, std::uint64_t seed) {
  if (noise_std <= 0.0) return;
  Rng rng(seed);
  for (auto& x : v.data) {
    x = static_cast<float>(
        std::clamp(static_cast<double>(x) + rng.normal(0.0, noise_std), 0.0, 1.0));
  }
}

// --- Atomic classes ---------------------------------------------------------

enum class AtomicMotion { SwayH, SwayV, Pulse, Spin, SwayDiag };

struct AtomicClassDef {
  Shape shape;
  AtomicMotion motion;
  int period;  // frames; divides the default T
  Rgb color;
  double base_cx_frac, base_cy_frac;
};

// Distinct appearance per class (shape, color, home position, period), so a
// representation that captures appearance separates atomic classes well.
const std::array<AtomicClassDef, 8> kAtomicDefs = {{
    {Shape::Disk, AtomicMotion::SwayH, 8, {0.95, 0.25, 0.20}, 0.30, 0.30},
    {Shape::Square, AtomicMotion::SwayV, 8, {0.20, 0.90, 0.30}, 0.70, 0.30},
    {Shape::Ring, AtomicMotion::Pulse, 4, {0.25, 0.45, 0.95}, 0.30, 0.70},
    {Shape::Diamond, AtomicMotion::SwayDiag, 8, {0.95, 0.85, 0.20}, 0.70, 0.70},
    {Shape::Cross, AtomicMotion::Spin, 4, {0.90, 0.25, 0.90}, 0.50, 0.50},
    {Shape::Square, AtomicMotion::SwayH, 4, {0.25, 0.90, 0.90}, 0.50, 0.25},
    {Shape::Disk, AtomicMotion::Pulse, 8, {0.95, 0.55, 0.20}, 0.25, 0.50},
    {Shape::Diamond, AtomicMotion::Spin, 8, {0.80, 0.80, 0.85}, 0.75, 0.50},
}};

// --- Composite classes -------------------------------------------------------

enum class PhaseKind { SweepH, SweepV, Grow, Spin };

// Each composite class is a permutation of the same four phases; the ordered
// sequence is the only class-identifying signal.
const std::array<std::array<int, 4>, 8> kPhaseOrders = {{
    {0, 1, 2, 3},
    {3, 2, 1, 0},
    {1, 3, 0, 2},
    {2, 0, 3, 1},
    {0, 2, 1, 3},
    {1, 0, 3, 2},
    {2, 3, 0, 1},
    {3, 1, 2, 0},
}};

struct VideoJitter {
  double dx, dy;         // whole-video position offset, pixels
  double size_scale;     // multiplicative size jitter
  double brightness;     // multiplicative brightness jitter
  double phase;          // atomic motion phase offset in [0,1)
};

VideoJitter draw_jitter(Rng& rng) {
  VideoJitter j;
  j.dx = rng.uniform(-2.0, 2.0);
  j.dy = rng.uniform(-2.0, 2.0);
  j.size_scale = rng.uniform(0.9, 1.1);
  j.brightness = rng.uniform(0.85, 1.0);
  j.phase = rng.uniform();
  return j;
}

}  // namespace

void validate(const SynthSpec& spec) {
  if (spec.num_classes() < 2)
    throw ContractError("need at least 2 synthetic classes");
  if (spec.noise_std < 0.0) throw ContractError("noise_std must be >= 0");
  if (spec.num_classes_atomic < 0 || spec.num_classes_composite < 0 ||
      spec.videos_per_class < 1)
    throw ContractError("invalid synthetic class/video counts");
  if (spec.frames < 4 || spec.height < 8 || spec.width < 8)
    throw ContractError("synthetic dimensions too small");
}

std::string synth_class_name(const SynthSpec& spec, int class_id) {
  char buf[32];
  if (class_id < spec.num_classes_atomic) {
    std::snprintf(buf, sizeof(buf), "atomic_%02d", class_id);
  } else {
    std::snprintf(buf, sizeof(buf), "composite_%02d", class_id - spec.num_classes_atomic);
  }
  return buf;
}

VideoInstance gen_atomic(int class_id, std::uint64_t seed, const SynthSpec& spec) {
  validate(spec);
  check_contract(class_id >= 0 && class_id < spec.num_classes_atomic,
                 "class_id does not designate an atomic class");
  const AtomicClassDef& def = kAtomicDefs[class_id % kAtomicDefs.size()];

  Rng rng(derive_seed({0xa70317cu, seed}));
  const VideoJitter jit = draw_jitter(rng);

  const double amp = 0.18 * std::min(spec.height, spec.width);
  const double base_size = 0.14 * std::min(spec.height, spec.width) * jit.size_scale;
  const double cx0 = def.base_cx_frac * spec.width + jit.dx;
  const double cy0 = def.base_cy_frac * spec.height + jit.dy;

  Video v(spec.frames, spec.height, spec.width, 3);
  for (int t = 0; t < spec.frames; ++t) {
    // The motion phase depends on t only through t mod period, which makes
    // zero-noise frames bitwise periodic.
    const double u = (static_cast<double>(t % def.period) / def.period + jit.phase);
    const double w = std::sin(kTwoPi * (u - std::floor(u)));
    ShapeState st{cx0, cy0, base_size, 0.0, jit.brightness};
    switch (def.motion) {
      case AtomicMotion::SwayH:
        st.cx += amp * w;
        break;
      case AtomicMotion::SwayV:
        st.cy += amp * w;
        break;
      case AtomicMotion::Pulse:
        st.size = base_size * (1.0 + 0.40 * w);
        break;
      case AtomicMotion::Spin:
        st.angle = kTwoPi * (u - std::floor(u));
        break;
      case AtomicMotion::SwayDiag:
        st.cx += 0.7071 * amp * w;
        st.cy += 0.7071 * amp * w;
        break;
    }
    render_frame(v, t, st, def.shape, def.color, 0.45);
  }
  add_noise(v, spec.noise_std, derive_seed({0x4015eu, seed}));

  VideoInstance inst;
  inst.video = std::move(v);
  inst.label = class_id;
  inst.kind = VideoKind::Atomic;
  return inst;
}

VideoInstance gen_composite(int class_id, std::uint64_t seed, const SynthSpec& spec) {
  validate(spec);
  check_contract(class_id >= spec.num_classes_atomic && class_id < spec.num_classes(),
                 "class_id does not designate a composite class");
  const auto& order =
      kPhaseOrders[(class_id - spec.num_classes_atomic) % kPhaseOrders.size()];

  Rng rng(derive_seed({0xc03b051u, seed}));
  const VideoJitter jit = draw_jitter(rng);

  // All composite classes share one shape and color; only the phase order
  // differs between classes.
  const Shape shape = Shape::Bar;
  const Rgb color{0.88, 0.88, 0.88};
  const double base_size = 0.17 * std::min(spec.height, spec.width) * jit.size_scale;
  const double margin = 0.22 * std::min(spec.height, spec.width);
  const double cx0 = 0.5 * spec.width + jit.dx;
  const double cy0 = 0.5 * spec.height + jit.dy;

  const int phases = 4;
  const int phase_len = spec.frames / phases;  // boundaries at multiples of T/4

  Video v(spec.frames, spec.height, spec.width, 3);
  for (int t = 0; t < spec.frames; ++t) {
    const int phase_idx = std::min(t / phase_len, phases - 1);
    const auto kind = static_cast<PhaseKind>(order[phase_idx]);
    const double local = (t - phase_idx * phase_len) / static_cast<double>(phase_len);
    ShapeState st{cx0, cy0, base_size, 0.0, jit.brightness};
    switch (kind) {
      case PhaseKind::SweepH:
        st.cx = margin + local * (spec.width - 2.0 * margin) + jit.dx;
        break;
      case PhaseKind::SweepV:
        st.cy = margin + local * (spec.height - 2.0 * margin) + jit.dy;
        break;
      case PhaseKind::Grow:
        st.size = base_size * (0.55 + 0.9 * local);
        break;
      case PhaseKind::Spin:
        // Half turn per phase; the bar is 2-fold symmetric.
        st.angle = 3.14159265358979323846 * local;
        break;
    }
    render_frame(v, t, st, shape, color, 0.40);
  }
  add_noise(v, spec.noise_std, derive_seed({0x4015eu, seed}));

  VideoInstance inst;
  inst.video = std::move(v);
  inst.label = class_id;
  inst.kind = VideoKind::Composite;
  return inst;
}

void gen_benchmark(const SynthSpec& spec, const std::filesystem::path& out_root) {
  namespace fs = std::filesystem;
  validate(spec);
  std::error_code ec;
  fs::create_directories(out_root, ec);
  if (ec) throw DataError("cannot create output root: " + out_root.string());

  std::ofstream manifest(out_root / "manifest.txt");
  if (!manifest) throw DataError("cannot write manifest: " + (out_root / "manifest.txt").string());

  for (int class_id = 0; class_id < spec.num_classes(); ++class_id) {
    const std::string cls = synth_class_name(spec, class_id);
    const fs::path dir = out_root / cls;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create class directory: " + dir.string());
    for (int idx = 0; idx < spec.videos_per_class; ++idx) {
      const std::uint64_t vseed = derive_seed(
          {spec.seed, static_cast<std::uint64_t>(class_id), static_cast<std::uint64_t>(idx)});
      VideoInstance inst = class_id < spec.num_classes_atomic
                               ? gen_atomic(class_id, vseed, spec)
                               : gen_composite(class_id, vseed, spec);
      char idbuf[16];
      std::snprintf(idbuf, sizeof(idbuf), "_v%03d", idx);
      inst.id = cls + idbuf;
      write_tbv(dir / (inst.id + ".tbv"), inst.video);
      manifest << inst.id << ',' << cls << ','
               << (inst.kind == VideoKind::Atomic ? "atomic" : "composite") << '\n';
    }
  }
  if (!manifest) throw DataError("manifest write failed");
}

}  // namespace tb
