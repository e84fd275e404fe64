#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sst/io/formats.hpp"

namespace sst::io {

struct GrayImage {
  std::size_t height = 0, width = 0;
  std::vector<double> pixels;  // raw sample values, not rescaled
  std::uint32_t max_code = 255;   // 255 or 65535
};

/// Reads 8- or 16-bit PNGs; colour is reduced to luminance and alpha dropped.
GrayImage read_png_gray(const fs::path& path);
void write_png_gray8(const fs::path& path, std::size_t height, std::size_t width,
                     const std::vector<std::uint8_t>& pixels);

struct ImportedCube {
  ad::Tensor<float> cube;  // [C,H,W], values in [0, 1]
  double peak = 0;         // raw/max_code value mapped to 1
  std::vector<fs::path> sources;
};

/// One grayscale image per channel, ordered by filename. All images must
/// share a size. The cube is divided by its global maximum.
ImportedCube import_raster_cube(const fs::path& directory);

/// Writes `<stem>_ch<m>.png` per channel with per-channel min-max scaling
/// and returns each channel's (min, max).
std::vector<std::pair<double, double>> write_channel_previews(const ad::Tensor<float>& cube, const fs::path& directory,
                                                              const std::string& stem);

/// Line chart of `values` against their index. Log scale when all values
/// are positive.
void write_curve_png(const fs::path& path, const std::vector<double>& values, std::size_t width = 480,
                     std::size_t height = 320);

}  // namespace sst::io
