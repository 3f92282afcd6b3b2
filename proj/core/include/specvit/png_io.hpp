#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include "specvit/imaging.hpp"

namespace specvit {

/// 8-bit RGB PNG, channel value = round(255 * clamp(pixel, 0, 1)).
void write_png(const std::filesystem::path& path, const Image& img);

/// Raw 8-bit interleaved RGB buffer of height x width x 3 bytes.
void write_png_rgb8(const std::filesystem::path& path, std::size_t height, std::size_t width,
                    std::span<const std::uint8_t> rgb);

/// Reads an 8-bit RGB PNG back into [0, 1] pixels.
Image read_png(const std::filesystem::path& path);

}  // namespace specvit
