#pragma once

#include <filesystem>

#include "xopgan/numerics/tensor.hpp"

namespace xopgan {

/// Reads an 8-bit RGB PNG into [3,H,W] with raw values 0..255.
Tensor load_image(const std::filesystem::path& path);
/// Writes [3,H,W] as 8-bit RGB PNG; values are rounded and clamped to 0..255.
void save_image(const Tensor& image, const std::filesystem::path& path);

/// x / 127.5 - 1, mapping 0..255 onto [-1, 1].
Tensor normalize(const Tensor& image);
/// Inverse of normalize, clamped to 0..255 and rounded to integers.
Tensor denormalize(const Tensor& normalized);

}  // namespace xopgan
