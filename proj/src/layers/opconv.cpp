#include "xopgan/layers/opconv.hpp"

#include <cmath>

#include "xopgan/numerics/errors.hpp"

namespace xopgan {

Tensor power_stack(const Tensor& y, std::size_t q) {
    if (q == 0) throw ConfigError("power_stack: Q must be >= 1");
    if (y.rank() != 3) throw DimensionError("power_stack: input must be [C,H,W]");
    std::vector<Tensor> parts;
    parts.reserve(q);
    parts.push_back(y);
    for (std::size_t n = 2; n <= q; ++n) {
        Tensor p = parts.back();
        for (std::size_t i = 0; i < p.size(); ++i) p[i] *= y[i];
        parts.push_back(std::move(p));
    }
    return concat_channels(parts);
}

OperationalConv2D::OperationalConv2D(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                                     std::size_t q, ConvGeometry geom)
    : geom_(geom) {
    if (q == 0) throw ConfigError("operational layer order Q must be >= 1");
    if (in_channels == 0 || out_channels == 0 || kernel == 0)
        throw ConfigError("operational layer dimensions must be positive");
    for (std::size_t i = 0; i < q; ++i) {
        weights_.emplace_back(Shape{out_channels, in_channels, kernel, kernel});
        weight_grads_.emplace_back(Shape{out_channels, in_channels, kernel, kernel});
    }
    bias_ = Tensor({out_channels});
    bias_grad_ = Tensor({out_channels});
}

void OperationalConv2D::init_uniform(RngStream rng) {
    const double fan_in = static_cast<double>(in_channels() * kernel() * kernel());
    const double bound = 1.0 / std::sqrt(fan_in * static_cast<double>(order()));
    for (auto& w : weights_)
        for (auto& v : w.values()) v = rng.uniform(-bound, bound);
    bias_.fill(0.0);
}

Tensor OperationalConv2D::stacked_weights() const {
    const auto cout = out_channels(), cin = in_channels(), k = kernel();
    const std::size_t bank = cin * k * k;
    Tensor out({cout, cin * order(), k, k});
    for (std::size_t oc = 0; oc < cout; ++oc)
        for (std::size_t q = 0; q < order(); ++q)
            std::copy_n(weights_[q].data() + oc * bank, bank, out.data() + (oc * order() + q) * bank);
    return out;
}

Tensor OperationalConv2D::forward(const Tensor& input) const {
    return polyconv2d(input, weights_, bias_, geom_);
}

OperationalConv2D::Grads OperationalConv2D::backward(const Tensor& input, const Tensor& upstream) const {
    auto g = polyconv2d_grad(input, weights_, upstream, geom_);
    return {std::move(g.input), std::move(g.weights), std::move(g.bias)};
}

void OperationalConv2D::accumulate(const Grads& g) {
    for (std::size_t q = 0; q < order(); ++q) weight_grads_[q] += g.weights[q];
    bias_grad_ += g.bias;
}

void OperationalConv2D::zero_grad() {
    for (auto& w : weight_grads_) w.fill(0.0);
    bias_grad_.fill(0.0);
}

DenseLayer::DenseLayer(std::size_t in, std::size_t out)
    : weights({out, in}), bias({out}), weight_grad({out, in}), bias_grad({out}) {}

void DenseLayer::init_uniform(RngStream rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(weights.dim(1)));
    for (auto& v : weights.values()) v = rng.uniform(-bound, bound);
    bias.fill(0.0);
}

void DenseLayer::zero_grad() {
    weight_grad.fill(0.0);
    bias_grad.fill(0.0);
}

}  // namespace xopgan
