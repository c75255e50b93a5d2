#pragma once

#include <cstdint>

#include "xopgan/numerics/tensor.hpp"

namespace xopgan {

struct AdamState {
    Tensor m;
    Tensor v;
    std::uint64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState fresh(const Shape& shape) { return {Tensor(shape), Tensor(shape)}; }
};

/// One bias-corrected Adam update of param in place.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr);

}  // namespace xopgan
