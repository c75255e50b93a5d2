#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "xopgan/numerics/ops.hpp"
#include "xopgan/numerics/rng.hpp"
#include "xopgan/numerics/tensor.hpp"

namespace xopgan {

/// Channel-concatenation of y, y^2, ..., y^q in ascending order.
Tensor power_stack(const Tensor& y, std::size_t q);

/// Self-ONN convolution with a polynomial nodal operator:
///
///   out = w0 + sum_{q=1..Q} conv(x^q, W_q)
///
/// Each output channel carries its own Taylor coefficients per input
/// channel and tap, learned jointly with the bias w0 (one per output
/// channel). Q = 1 is an ordinary convolution.
class OperationalConv2D {
public:
    OperationalConv2D() = default;
    OperationalConv2D(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t q,
                      ConvGeometry geom);

    std::size_t in_channels() const { return weights_[0].dim(1); }
    std::size_t out_channels() const { return weights_[0].dim(0); }
    std::size_t kernel() const { return weights_[0].dim(2); }
    std::size_t order() const { return weights_.size(); }
    const ConvGeometry& geometry() const { return geom_; }
    void set_geometry(const ConvGeometry& g) { geom_ = g; }

    /// W_q for q = 1..Q at index q-1.
    std::vector<Tensor>& weights() { return weights_; }
    const std::vector<Tensor>& weights() const { return weights_; }
    Tensor& bias() { return bias_; }
    const Tensor& bias() const { return bias_; }

    /// Uniform in +-1/sqrt(fan_in * Q) per bank; bias zero.
    void init_uniform(RngStream rng);

    /// The banks concatenated along C_in, matching power_stack's channel order.
    Tensor stacked_weights() const;

    Tensor forward(const Tensor& input) const;

    struct Grads {
        Tensor input;
        std::vector<Tensor> weights;
        Tensor bias;
    };
    Grads backward(const Tensor& input, const Tensor& upstream) const;

    // Gradient accumulators used by the networks.
    std::vector<Tensor>& weight_grads() { return weight_grads_; }
    Tensor& bias_grad() { return bias_grad_; }
    void accumulate(const Grads& g);
    void zero_grad();

    template <typename Fn>
    void visit(const std::string& prefix, Fn&& fn) {
        for (std::size_t q = 0; q < weights_.size(); ++q)
            fn(prefix + ".w" + std::to_string(q + 1), weights_[q], weight_grads_[q]);
        fn(prefix + ".w0", bias_, bias_grad_);
    }

private:
    std::vector<Tensor> weights_;
    Tensor bias_;
    std::vector<Tensor> weight_grads_;
    Tensor bias_grad_;
    ConvGeometry geom_;
};

/// Fully connected layer with gradient accumulators.
struct DenseLayer {
    Tensor weights;  // [out, in]
    Tensor bias;     // [out]
    Tensor weight_grad;
    Tensor bias_grad;

    DenseLayer() = default;
    DenseLayer(std::size_t in, std::size_t out);
    void init_uniform(RngStream rng);
    void zero_grad();

    template <typename Fn>
    void visit(const std::string& prefix, Fn&& fn) {
        fn(prefix + ".weight", weights, weight_grad);
        fn(prefix + ".bias", bias, bias_grad);
    }
};

}  // namespace xopgan
