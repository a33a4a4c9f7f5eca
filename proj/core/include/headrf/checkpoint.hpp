// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "headrf/tensor.hpp"

namespace headrf {

/// A named array as stored on disk.
struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

/// Binary container layout (all integers little-endian):
///
///   magic    8 bytes  "HEADRFCK"
///   version  u32      kCheckpointVersion
///   count    u32      number of entries
///   per entry:
///     name_len u32, name bytes (UTF-8, no terminator)
///     rank     u32, extents u64 x rank
///     values   f64 little-endian x product(extents)
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes to `<path>.tmp` then renames over `path`.
void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path);

const NamedArray* find_array(const std::vector<NamedArray>& arrays, const std::string& name);
NamedArray to_named_array(const std::string& name, const Tensor& tensor);

}  // namespace headrf
