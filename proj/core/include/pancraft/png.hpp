#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "pancraft/tensor.hpp"

namespace pancraft {

/// Writes interleaved 8-bit RGB rows.
void write_png_rgb8(const std::filesystem::path& path, int64_t width, int64_t height, const std::vector<uint8_t>& rgb);

/// Maps three bands of a [C,H,W] image to RGB, stretching each band linearly
/// between its 1st and 99th percentiles. Visualization only.
std::vector<uint8_t> stretch_rgb8(const Tensor<float>& image, std::array<int, 3> bands);

void export_png(const std::filesystem::path& path, const Tensor<float>& image, std::array<int, 3> bands);

/// Default band triple: (2, 1, 0) for three or more bands, else band 0 repeated.
std::array<int, 3> default_rgb_bands(int64_t bands);

}  // namespace pancraft
