#pragma once

#include <cmath>
#include <limits>
#include <span>

#include "xopgan/numerics/tensor.hpp"

namespace xopgan {

/// PSNR of identical images.
inline constexpr double kPsnrInfinity = std::numeric_limits<double>::infinity();
/// Value the infinity sentinel contributes to means and aggregates.
inline constexpr double kPsnrCapDb = 60.0;

/// 10 log10(255^2 / MSE) over all channels jointly, on the 0..255 scale.
/// Returns kPsnrInfinity when the images are identical.
double psnr(const Tensor& a, const Tensor& b);

inline double psnr_capped(double db) { return std::isinf(db) ? kPsnrCapDb : db; }

/// Arithmetic mean with the infinity sentinel capped.
double mean_psnr(std::span<const double> values);

}  // namespace xopgan
