/* Copyright 2026 The Eqpan Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "eqpan/diffcore.hpp"
#include "eqpan/error.hpp"

namespace eqpan {

/// Versioned binary container of named shaped arrays, little-endian:
///
///   bytes 0-7   magic "EQ4DCKPT"
///   u32         version (currently 1)
///   u32         scalar size in bytes (4 = float, 8 = double)
///   u64         config hash of the run that wrote the file
///   u64         entry count
///   per entry:  u32 name length, name bytes, u64 rows, u64 cols,
///               rows * cols scalars (row-major)
struct CheckpointHeader {
  static constexpr char kMagic[8] = {'E', 'Q', '4', 'D',
                                     'C', 'K', 'P', 'T'};
  static constexpr std::uint32_t kVersion = 1;
};

template <typename Scalar>
struct Checkpoint {
  std::uint64_t config_hash = 0;
  std::vector<std::pair<std::string, MatrixX<Scalar>>> arrays;

  const MatrixX<Scalar>* find(const std::string& name) const {
    for (const auto& [n, m] : arrays) {
      if (n == name) return &m;
    }
    return nullptr;
  }
};

namespace detail {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw SchemaError("checkpoint: truncated file");
  return v;
}

}  // namespace detail

template <typename Scalar>
void save_checkpoint(
    const std::string& path,
    const std::vector<std::pair<std::string, MatrixX<Scalar>>>& arrays,
    std::uint64_t config_hash) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("checkpoint: cannot open '" + path + "' for write");
  os.write(CheckpointHeader::kMagic, 8);
  detail::write_pod(os, CheckpointHeader::kVersion);
  detail::write_pod(os, static_cast<std::uint32_t>(sizeof(Scalar)));
  detail::write_pod(os, config_hash);
  detail::write_pod(os, static_cast<std::uint64_t>(arrays.size()));
  for (const auto& [name, mat] : arrays) {
    detail::write_pod(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_pod(os, static_cast<std::uint64_t>(mat.rows()));
    detail::write_pod(os, static_cast<std::uint64_t>(mat.cols()));
    os.write(reinterpret_cast<const char*>(mat.data()),
             static_cast<std::streamsize>(sizeof(Scalar) * mat.size()));
  }
  if (!os) throw IoError("checkpoint: write to '" + path + "' failed");
}

template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint: cannot open '" + path + "'");
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, CheckpointHeader::kMagic, 8) != 0) {
    throw SchemaError("checkpoint: bad magic in '" + path + "'");
  }
  const auto version = detail::read_pod<std::uint32_t>(is);
  if (version != CheckpointHeader::kVersion) {
    throw SchemaError("checkpoint: unsupported version " +
                      std::to_string(version));
  }
  const auto scalar_size = detail::read_pod<std::uint32_t>(is);
  if (scalar_size != 4 && scalar_size != 8) {
    throw SchemaError("checkpoint: unsupported scalar size " +
                      std::to_string(scalar_size));
  }

  Checkpoint<Scalar> ckpt;
  ckpt.config_hash = detail::read_pod<std::uint64_t>(is);
  const auto count = detail::read_pod<std::uint64_t>(is);
  ckpt.arrays.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = detail::read_pod<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto rows = detail::read_pod<std::uint64_t>(is);
    const auto cols = detail::read_pod<std::uint64_t>(is);
    if (!is) throw SchemaError("checkpoint: truncated entry header");
    MatrixX<Scalar> mat(static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(cols));
    const std::uint64_t elems = rows * cols;
    if (scalar_size == sizeof(Scalar)) {
      is.read(reinterpret_cast<char*>(mat.data()),
              static_cast<std::streamsize>(scalar_size * elems));
    } else if (scalar_size == 4) {
      std::vector<float> buf(elems);
      is.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(4 * elems));
      for (std::uint64_t e = 0; e < elems; ++e) {
        mat.data()[e] = static_cast<Scalar>(buf[e]);
      }
    } else {
      std::vector<double> buf(elems);
      is.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(8 * elems));
      for (std::uint64_t e = 0; e < elems; ++e) {
        mat.data()[e] = static_cast<Scalar>(buf[e]);
      }
    }
    if (!is) throw SchemaError("checkpoint: truncated array data");
    ckpt.arrays.emplace_back(std::move(name), std::move(mat));
  }
  return ckpt;
}

}  // namespace eqpan
