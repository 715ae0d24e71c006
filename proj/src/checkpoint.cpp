/*
 * Copyright (c) 2026 The trans2seg Authors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "trans2seg/model.hpp"

namespace t2s {

namespace {

constexpr char kMagic[4] = {'T', '2', 'S', 'G'};
constexpr std::uint8_t kF32 = 0;
constexpr std::uint8_t kF64 = 1;
constexpr std::uint32_t kMaxNameLength = 1 << 16;
constexpr std::uint32_t kMaxRank = 8;

template <typename U>
void put_le(std::ostream& out, U v) {
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = char((v >> (8 * i)) & 0xff);
  out.write(bytes, sizeof(U));
}

// Returns false on clean EOF before the first byte.
template <typename U>
bool get_le(std::istream& in, U& v, const char* what) {
  unsigned char bytes[sizeof(U)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(U));
  if (in.gcount() == 0 && in.eof()) return false;
  if (std::size_t(in.gcount()) != sizeof(U)) {
    throw ConfigError(std::string("checkpoint truncated while reading ") + what);
  }
  v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= U(bytes[i]) << (8 * i);
  return true;
}

template <typename U>
U need_le(std::istream& in, const char* what) {
  U v;
  if (!get_le(in, v, what)) throw ConfigError(std::string("checkpoint truncated at ") + what);
  return v;
}

template <typename T>
constexpr std::uint8_t dtype_tag() {
  return sizeof(T) == 4 ? kF32 : kF64;
}

}  // namespace

template <typename T>
void save_checkpoint(const ParamStore<T>& params, std::ostream& out) {
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  for (const auto& [name, t] : params.entries()) {
    put_le<std::uint32_t>(out, std::uint32_t(name.size()));
    out.write(name.data(), std::streamsize(name.size()));
    put_le<std::uint8_t>(out, dtype_tag<T>());
    put_le<std::uint32_t>(out, std::uint32_t(t.rank()));
    for (auto d : t.shape()) put_le<std::uint64_t>(out, d);
    for (T v : t.data()) {
      if constexpr (sizeof(T) == 4) {
        put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
      } else {
        put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
      }
    }
  }
  if (!out) throw ConfigError("failed writing checkpoint");
}

template <typename T>
void save_checkpoint(const ParamStore<T>& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);
  save_checkpoint(params, out);
}

template <typename T>
void load_checkpoint(ParamStore<T>& params, std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    throw ConfigError("not a checkpoint file (bad magic)");
  }
  const auto version = need_le<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw ConfigError("unsupported checkpoint version " + std::to_string(version));
  }
  std::set<std::string> seen;
  std::uint32_t name_len;
  while (get_le(in, name_len, "name length")) {
    if (name_len == 0 || name_len > kMaxNameLength) throw ConfigError("corrupt checkpoint record");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (in.gcount() != std::streamsize(name_len)) throw ConfigError("checkpoint truncated");
    if (!params.contains(name)) {
      throw ConfigError("checkpoint parameter '" + name + "' does not exist in the model");
    }
    if (!seen.insert(name).second) {
      throw ConfigError("checkpoint repeats parameter '" + name + "'");
    }
    const auto dtype = need_le<std::uint8_t>(in, "dtype");
    if (dtype != kF32 && dtype != kF64) {
      throw ConfigError("parameter '" + name + "' has unknown dtype tag " + std::to_string(dtype));
    }
    const auto rank = need_le<std::uint32_t>(in, "rank");
    if (rank > kMaxRank) throw ConfigError("parameter '" + name + "' has implausible rank");
    Shape shape(rank);
    for (auto& d : shape) d = std::size_t(need_le<std::uint64_t>(in, "dims"));
    Tensor<T> target = params.get(name);
    if (shape != target.shape()) {
      throw ConfigError("parameter '" + name + "' has shape " + shape_str(shape) +
                        " in the checkpoint but " + shape_str(target.shape()) +
                        " in the model");
    }
    for (auto& v : target.data()) {
      if (dtype == kF32) {
        v = T(std::bit_cast<float>(need_le<std::uint32_t>(in, "values")));
      } else {
        v = T(std::bit_cast<double>(need_le<std::uint64_t>(in, "values")));
      }
    }
  }
  for (const auto& [name, _] : params.entries()) {
    if (!seen.count(name)) throw ConfigError("checkpoint is missing parameter '" + name + "'");
  }
}

template <typename T>
void load_checkpoint(ParamStore<T>& params, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  load_checkpoint(params, in);
}

template void save_checkpoint(const ParamStore<float>&, std::ostream&);
template void save_checkpoint(const ParamStore<double>&, std::ostream&);
template void save_checkpoint(const ParamStore<float>&, const std::string&);
template void save_checkpoint(const ParamStore<double>&, const std::string&);
template void load_checkpoint(ParamStore<float>&, std::istream&);
template void load_checkpoint(ParamStore<double>&, std::istream&);
template void load_checkpoint(ParamStore<float>&, const std::string&);
template void load_checkpoint(ParamStore<double>&, const std::string&);

}  // namespace t2s
