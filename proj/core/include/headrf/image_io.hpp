// Copyright 2026 The headrf Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "headrf/renderer.hpp"

namespace headrf {

/// 8-bit level of a [0, 1] value: round(clamp(v) * 255).
std::uint8_t quantize_channel(double v);

/// 8-bit RGB PNG of `image.rgb`. Throws std::runtime_error on I/O failure.
void write_png(const std::filesystem::path& path, const Image& image);
/// Reads an 8-bit RGB or RGBA PNG into [0, 1] colors; alpha is set to 1.
Image read_png(const std::filesystem::path& path);

/// Exact dump in the checkpoint container: "rgb" [H, W, 3] and "alpha" [H, W].
void write_raw_image(const std::filesystem::path& path, const Image& image);
Image read_raw_image(const std::filesystem::path& path);

}  // namespace headrf
