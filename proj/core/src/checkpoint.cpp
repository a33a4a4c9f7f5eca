// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#include "headrf/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace headrf {
namespace {

constexpr std::array<char, 8> kMagic = {'H', 'E', 'A', 'D', 'R', 'F', 'C', 'K'};

template <typename T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_unsigned_v<T>);
  std::array<char, sizeof(T)> bytes;
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  os.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& is, const std::filesystem::path& path) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!is.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    throw CheckpointError("truncated checkpoint: " + path.string());
  }
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot open for writing: " + tmp.string());
    os.write(kMagic.data(), kMagic.size());
    put_le<std::uint32_t>(os, kCheckpointVersion);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(arrays.size()));
    for (const auto& a : arrays) {
      if (shape_numel(a.shape) != a.values.size()) {
        throw ContractViolation("checkpoint entry '" + a.name + "' has inconsistent shape");
      }
      put_le<std::uint32_t>(os, static_cast<std::uint32_t>(a.name.size()));
      os.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
      put_le<std::uint32_t>(os, static_cast<std::uint32_t>(a.shape.size()));
      for (std::size_t e : a.shape) put_le<std::uint64_t>(os, e);
      for (double v : a.values) put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
    }
    if (!os) throw CheckpointError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint: " + path.string());
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw CheckpointError("not a checkpoint file: " + path.string());
  }
  const auto version = get_le<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  }
  const auto count = get_le<std::uint32_t>(is, path);
  std::vector<NamedArray> arrays;
  arrays.reserve(count);
  for (std::uint32_t n = 0; n < count; ++n) {
    NamedArray a;
    const auto name_len = get_le<std::uint32_t>(is, path);
    a.name.resize(name_len);
    if (!is.read(a.name.data(), name_len)) throw CheckpointError("truncated checkpoint: " + path.string());
    const auto rank = get_le<std::uint32_t>(is, path);
    for (std::uint32_t d = 0; d < rank; ++d) a.shape.push_back(get_le<std::uint64_t>(is, path));
    a.values.resize(shape_numel(a.shape));
    for (double& v : a.values) v = std::bit_cast<double>(get_le<std::uint64_t>(is, path));
    arrays.push_back(std::move(a));
  }
  return arrays;
}

const NamedArray* find_array(const std::vector<NamedArray>& arrays, const std::string& name) {
  for (const auto& a : arrays) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

NamedArray to_named_array(const std::string& name, const Tensor& tensor) {
  return {name, tensor.shape(), tensor.values()};
}

}  // namespace headrf
