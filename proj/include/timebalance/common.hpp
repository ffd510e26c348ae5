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
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tb {

// Error taxonomy, mapped to CLI exit codes: ConfigError -> 1, DataError -> 2,
// NumericError -> 3. ContractError marks a violated call contract (wrong
// shapes, preconditions); the CLI treats it as a usage error.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void check_contract(bool ok, const std::string& what) {
  if (!ok) throw ContractError(what);
}

// FNV-1a 64-bit. Used for checkpoint content hashes and cache keys.
class Fnv1a64 {
 public:
  void update(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
  Fnv1a64 h;
  h.update(data, len);
  return h.digest();
}

// Little-endian binary IO. The host is little-endian x86, but going through
// explicit byte packing keeps the file formats well defined.
inline void write_u32le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64le(std::ostream& os, std::uint64_t v) {
  write_u32le(os, static_cast<std::uint32_t>(v));
  write_u32le(os, static_cast<std::uint32_t>(v >> 32));
}

inline bool read_u32le(std::istream& is, std::uint32_t& v) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

inline bool read_u64le(std::istream& is, std::uint64_t& v) {
  std::uint32_t lo = 0, hi = 0;
  if (!read_u32le(is, lo) || !read_u32le(is, hi)) return false;
  v = static_cast<std::uint64_t>(lo) | (static_cast<std::uint64_t>(hi) << 32);
  return true;
}

inline void write_f32le(std::ostream& os, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  write_u32le(os, v);
}

inline bool read_f32le(std::istream& is, float& f) {
  std::uint32_t v;
  if (!read_u32le(is, v)) return false;
  std::memcpy(&f, &v, 4);
  return true;
}

inline void write_f64le(std::ostream& os, double f) {
  std::uint64_t v;
  std::memcpy(&v, &f, 8);
  write_u64le(os, v);
}

inline bool read_f64le(std::istream& is, double& f) {
  std::uint64_t v;
  if (!read_u64le(is, v)) return false;
  std::memcpy(&f, &v, 8);
  return true;
}

inline void write_f32le_array(std::ostream& os, const float* p, std::size_t count) {
  // Bulk write; x86 is little-endian so the payload is already in file order.
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(count * 4));
}

inline bool read_f32le_array(std::istream& is, float* p, std::size_t count) {
  return static_cast<bool>(
      is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(count * 4)));
}

inline std::uint64_t hash_f32_array(const std::vector<float>& v) {
  return fnv1a64(v.data(), v.size() * sizeof(float));
}

}  // namespace tb
