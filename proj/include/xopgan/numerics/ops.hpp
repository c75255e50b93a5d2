#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "xopgan/numerics/simd.hpp"
#include "xopgan/numerics/tensor.hpp"

// Differentiable primitives. Each forward op has an explicit gradient op that
// takes the forward operands plus the upstream gradient.

namespace xopgan {

/// Stride and zero padding of a square convolution. Padding may be
/// asymmetric (pad_lo before, pad_hi after) on both spatial axes.
struct ConvGeometry {
    std::size_t stride = 1;
    std::size_t pad_lo = 0;
    std::size_t pad_hi = 0;

    static ConvGeometry symmetric(std::size_t stride, std::size_t pad) { return {stride, pad, pad}; }
    /// Padding for which the output extent is ceil(in / stride).
    static ConvGeometry same(std::size_t in, std::size_t kernel, std::size_t stride);

    /// floor((in + pad_lo + pad_hi - kernel) / stride) + 1; throws when the
    /// padded input is smaller than the kernel.
    std::size_t output_extent(std::size_t in, std::size_t kernel) const;

    friend bool operator==(const ConvGeometry&, const ConvGeometry&) = default;
};

/// Cross-correlation (no kernel flip) of input [C_in,H,W] with weights
/// [C_out,C_in,kH,kW]. An empty bias tensor means no bias.
Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias, std::size_t stride,
              std::size_t padding);
Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias, const ConvGeometry& geom);

/// Direct nested-loop convolution; the reference every faster path is held to.
Tensor conv2d_reference(const Tensor& input, const Tensor& weights, const Tensor& bias,
                        const ConvGeometry& geom);
/// im2col lowering evaluated with an explicit kernel table.
Tensor conv2d_lowered(const Tensor& input, const Tensor& weights, const Tensor& bias,
                      const ConvGeometry& geom, const simd::KernelTable& kernels);

struct Conv2dGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

Conv2dGrads conv2d_grad(const Tensor& input, const Tensor& weights, const Tensor& upstream,
                        std::size_t stride, std::size_t padding);
Conv2dGrads conv2d_grad(const Tensor& input, const Tensor& weights, const Tensor& upstream,
                        const ConvGeometry& geom);
Conv2dGrads conv2d_grad_reference(const Tensor& input, const Tensor& weights, const Tensor& upstream,
                                  const ConvGeometry& geom);
Conv2dGrads conv2d_grad_lowered(const Tensor& input, const Tensor& weights, const Tensor& upstream,
                                const ConvGeometry& geom, const simd::KernelTable& kernels);

/// Operational convolution: sum over q of conv2d(input^q, banks[q-1]) plus
/// bias, evaluated with one shared lowering of the input.
Tensor polyconv2d(const Tensor& input, std::span<const Tensor> banks, const Tensor& bias,
                  const ConvGeometry& geom, const simd::KernelTable& kernels = simd::active());

struct PolyConvGrads {
    Tensor input;
    std::vector<Tensor> weights;  // one per bank
    Tensor bias;
};

PolyConvGrads polyconv2d_grad(const Tensor& input, std::span<const Tensor> banks, const Tensor& upstream,
                              const ConvGeometry& geom, const simd::KernelTable& kernels = simd::active());

enum class ActivationKind { Tanh, Sigmoid, Power };

struct Activation {
    ActivationKind kind = ActivationKind::Tanh;
    int exponent = 1;  // Power only

    static Activation tanh() { return {ActivationKind::Tanh, 1}; }
    static Activation sigmoid() { return {ActivationKind::Sigmoid, 1}; }
    static Activation power(int n) { return {ActivationKind::Power, n}; }
};

Tensor elementwise(const Tensor& input, Activation fn);
/// Gradient with respect to the input given the forward input and upstream.
Tensor elementwise_grad(const Tensor& input, Activation fn, const Tensor& upstream);

/// tanh' expressed through the forward output: (1 - y^2) * g.
Tensor tanh_grad_from_output(const Tensor& output, const Tensor& upstream);

Tensor upsample_nearest(const Tensor& input, std::size_t factor);
/// Sum-pools each factor x factor block of the upstream gradient.
Tensor upsample_nearest_grad(const Tensor& upstream, std::size_t factor);

/// out = W * input + b for input [N], W [M,N], b [M].
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct DenseGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

DenseGrads dense_grad(const Tensor& input, const Tensor& weights, const Tensor& upstream);

/// Worker count used by the data-parallel loops in conv2d. Results do not
/// depend on it: each output element is produced by exactly one worker with
/// a fixed summation order.
void set_num_threads(std::size_t n);
std::size_t num_threads();

}  // namespace xopgan
