#pragma once

#include <cstdint>

#include "xopgan/numerics/tensor.hpp"

namespace xopgan {

/// Underwater-style corruption of a 0..255 RGB image, every stage scaled by
/// severity in [0, 1]: red attenuation with a blue-green cast, 3x3 box blur,
/// contrast compression toward the channel mean, additive Gaussian noise.
/// The result is rounded to 8-bit values. Severity 0 returns the input.
Tensor degrade(const Tensor& image, double severity, std::uint64_t seed);

}  // namespace xopgan
