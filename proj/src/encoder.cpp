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

#include "timebalance/encoder.hpp"

#include <fstream>
#include <sstream>

#include "timebalance/optimizer.hpp"

namespace tb {

const char* role_name(Role role) {
  switch (role) {
    case Role::InvariantTeacher:
      return "invariant_teacher";
    case Role::DistinctiveTeacher:
      return "distinctive_teacher";
    case Role::Student:
      return "student";
  }
  return "unknown";
}

namespace {

constexpr char kMagic[4] = {'T', 'B', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_string(std::ostream& os, const std::string& s) {
  write_u32le(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is, const std::string& what) {
  std::uint32_t len = 0;
  if (!read_u32le(is, len) || len > 4096) throw DataError("corrupt checkpoint: " + what);
  std::string s(len, '\0');
  if (!is.read(s.data(), len)) throw DataError("truncated checkpoint: " + what);
  return s;
}

// Everything after the fixed header, serialized to memory so the content
// hash can be computed before writing.
std::string serialize_body(const EncoderWeights& net, const AdamState* optimizer) {
  std::ostringstream os(std::ios::binary);
  const auto params = net.params();
  for (const auto* p : params) {
    write_string(os, p->name);
    write_u64le(os, p->value.size());
  }
  for (const auto* p : params) write_f32le_array(os, p->value.data(), p->value.size());
  if (optimizer) {
    write_u64le(os, static_cast<std::uint64_t>(optimizer->step_count));
    write_f64le(os, optimizer->schedule.base_lr);
    write_u32le(os, static_cast<std::uint32_t>(optimizer->schedule.warmup_epochs));
    write_u32le(os, static_cast<std::uint32_t>(optimizer->schedule.patience));
    write_f64le(os, optimizer->schedule.plateau_threshold);
    write_f64le(os, optimizer->schedule.scale);
    write_f64le(os, optimizer->schedule.best_loss);
    write_u32le(os, static_cast<std::uint32_t>(optimizer->schedule.bad_epochs));
    write_u32le(os, static_cast<std::uint32_t>(optimizer->names.size()));
    for (std::size_t k = 0; k < optimizer->names.size(); ++k) {
      write_string(os, optimizer->names[k]);
      write_u64le(os, optimizer->m[k].size());
      write_f32le_array(os, optimizer->m[k].data(), optimizer->m[k].size());
      write_f32le_array(os, optimizer->v[k].data(), optimizer->v[k].size());
    }
  }
  return os.str();
}

}  // namespace

void save_checkpoint(const EncoderWeights& net, const AdamState* optimizer,
                     const std::filesystem::path& path) {
  const std::string body = serialize_body(net, optimizer);
  const std::uint64_t hash = fnv1a64(body.data(), body.size());

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, 4);
  write_u32le(os, kVersion);
  write_u32le(os, static_cast<std::uint32_t>(net.role()));
  write_u32le(os, static_cast<std::uint32_t>(net.num_classes()));
  write_u32le(os, static_cast<std::uint32_t>(net.proj_dim()));
  write_u32le(os, static_cast<std::uint32_t>(net.params().size()));
  write_u32le(os, optimizer ? 1u : 0u);
  write_u64le(os, hash);
  os.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!os) throw DataError("checkpoint write failed: " + path.string());
}

namespace {

struct Header {
  std::uint32_t version, role, num_classes, proj_dim, param_count, has_optimizer;
  std::uint64_t hash;
};

Header read_header(std::istream& is, const std::string& name) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("not a checkpoint file: " + name);
  Header h{};
  if (!read_u32le(is, h.version) || !read_u32le(is, h.role) || !read_u32le(is, h.num_classes) ||
      !read_u32le(is, h.proj_dim) || !read_u32le(is, h.param_count) ||
      !read_u32le(is, h.has_optimizer) || !read_u64le(is, h.hash))
    throw DataError("truncated checkpoint header: " + name);
  if (h.version != kVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(h.version) + ": " + name);
  if (h.role > 2) throw DataError("invalid role tag in checkpoint: " + name);
  return h;
}

}  // namespace

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path.string());
  const Header h = read_header(is, path.string());

  std::ostringstream rest(std::ios::binary);
  rest << is.rdbuf();
  const std::string body = rest.str();
  if (fnv1a64(body.data(), body.size()) != h.hash)
    throw DataError("checkpoint content hash mismatch (corrupt or truncated): " +
                    path.string());

  LoadedCheckpoint out;
  out.content_hash = h.hash;
  out.net = std::make_unique<EncoderWeights>(static_cast<int>(h.num_classes),
                                             static_cast<int>(h.proj_dim),
                                             static_cast<Role>(h.role), /*init_seed=*/0);
  auto params = out.net->params();
  if (params.size() != h.param_count)
    throw DataError("checkpoint parameter count mismatch: " + path.string());

  std::istringstream bs(body, std::ios::binary);
  for (auto* p : params) {
    const std::string name = read_string(bs, "shape table");
    std::uint64_t count = 0;
    if (!read_u64le(bs, count)) throw DataError("truncated shape table: " + path.string());
    if (name != p->name || count != p->value.size())
      throw DataError("checkpoint layout mismatch at '" + name + "': " + path.string());
  }
  for (auto* p : params) {
    if (!read_f32le_array(bs, p->value.data(), p->value.size()))
      throw DataError("truncated parameter payload: " + path.string());
  }
  if (h.has_optimizer) {
    auto opt = std::make_unique<AdamState>();
    std::uint64_t steps = 0;
    std::uint32_t warmup = 0, patience = 0, bad = 0, count = 0;
    if (!read_u64le(bs, steps) || !read_f64le(bs, opt->schedule.base_lr) ||
        !read_u32le(bs, warmup) || !read_u32le(bs, patience) ||
        !read_f64le(bs, opt->schedule.plateau_threshold) ||
        !read_f64le(bs, opt->schedule.scale) || !read_f64le(bs, opt->schedule.best_loss) ||
        !read_u32le(bs, bad) || !read_u32le(bs, count))
      throw DataError("truncated optimizer state: " + path.string());
    opt->step_count = static_cast<std::int64_t>(steps);
    opt->schedule.warmup_epochs = static_cast<int>(warmup);
    opt->schedule.patience = static_cast<int>(patience);
    opt->schedule.bad_epochs = static_cast<int>(bad);
    for (std::uint32_t k = 0; k < count; ++k) {
      opt->names.push_back(read_string(bs, "optimizer table"));
      std::uint64_t c = 0;
      if (!read_u64le(bs, c)) throw DataError("truncated optimizer state: " + path.string());
      std::vector<float> m(c), v(c);
      if (!read_f32le_array(bs, m.data(), c) || !read_f32le_array(bs, v.data(), c))
        throw DataError("truncated optimizer moments: " + path.string());
      opt->m.push_back(std::move(m));
      opt->v.push_back(std::move(v));
    }
    out.optimizer = std::move(opt);
  }
  return out;
}

std::uint64_t checkpoint_hash(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path.string());
  return read_header(is, path.string()).hash;
}

}  // namespace tb
