// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ccub {

/// 8-bit grayscale raster, row-major.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    bool operator==(const GrayImage&) const = default;
};

std::vector<std::uint8_t> encode_png(const GrayImage& image);
void write_png(const GrayImage& image, const std::filesystem::path& path);
/// Reads any PNG and converts it to 8-bit grayscale.
GrayImage read_png(const std::filesystem::path& path);

/// Average-pools `image` to a (height x width) grid and rescales to [-1, 1].
std::vector<double> pool_to_grid(const GrayImage& image, int height, int width);

}  // namespace ccub
