#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fcppn/tensor.hpp"

namespace fcppn {

// Reads any PNG libpng understands and returns [H,W,3] floats in [0,1].
// Alpha is dropped, grey is replicated, 16-bit samples are reduced to 8.
Tensor<float> read_png(const std::filesystem::path& path);

// Writes an 8-bit RGB PNG. Values are clamped to [0,1], scaled by 255 and
// rounded half-to-even.
void write_png(const std::filesystem::path& path, const Tensor<float>& image);

// The 8-bit samples write_png would store, row-major RGB.
std::vector<std::uint8_t> quantize(const Tensor<float>& image);

}  // namespace fcppn
