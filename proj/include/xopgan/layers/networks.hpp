#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "xopgan/layers/opconv.hpp"

namespace xopgan {

/// Operational U-Net generator layout.
struct GeneratorConfig {
    std::size_t image_channels = 3;
    std::vector<std::size_t> encoder_channels{16, 32, 64, 64, 64};
    std::size_t q = 3;
    std::size_t encoder_kernel = 7;
    std::size_t encoder_stride = 2;
    std::size_t encoder_padding = 3;
    std::size_t decoder_kernel = 5;
    std::size_t decoder_padding = 2;
    /// Concatenate encoder level i into decoder level 5 - i.
    bool skip_connections = true;

    friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

/// Operational discriminator layout. The strided layers use "same" padding
/// so each layer maps an extent H to ceil(H / stride).
struct DiscriminatorConfig {
    std::size_t image_channels = 3;
    std::size_t input_size = 32;
    std::vector<std::size_t> channels{16, 32, 64, 128, 128};
    std::vector<std::size_t> strides{2, 2, 2, 2, 1};
    std::size_t kernel = 4;
    std::size_t q = 2;
    std::size_t dense_hidden = 64;

    /// Layout used in the original experiments at 256x256.
    static DiscriminatorConfig paper_scale();

    friend bool operator==(const DiscriminatorConfig&, const DiscriminatorConfig&) = default;
};

void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);
void to_json(nlohmann::json& j, const DiscriminatorConfig& c);
void from_json(const nlohmann::json& j, DiscriminatorConfig& c);

inline constexpr std::size_t kUNetLevels = 5;

/// Activations recorded by a generator forward pass for the backward pass.
struct GeneratorTape {
    Tensor input;
    std::vector<Tensor> encoder_out;  // e_1..e_5 (after tanh)
    std::vector<Tensor> decoder_in;   // z_j: upsampled previous level (+ skip)
    std::vector<Tensor> decoder_out;  // tanh(opconv(z_j) + residual(z_j))
};

class GeneratorNet {
public:
    GeneratorNet() = default;
    GeneratorNet(const GeneratorConfig& cfg, RngStream init);

    const GeneratorConfig& config() const { return cfg_; }
    std::size_t operational_layer_count() const { return encoder_.size() + decoder_.size(); }

    /// Output of the first encoder layer for a given input extent.
    std::size_t encoder_extent(std::size_t input_extent, std::size_t level) const;
    void check_input(const Tensor& x) const;

    Tensor forward(const Tensor& x) const;
    Tensor forward(const Tensor& x, GeneratorTape& tape) const;
    /// Accumulates parameter gradients; returns the input gradient.
    Tensor backward(const GeneratorTape& tape, const Tensor& grad_output);

    void zero_grad();

    /// fn(name, value, grad) over every parameter tensor in a fixed order.
    template <typename Fn>
    void visit(Fn&& fn) {
        for (std::size_t i = 0; i < encoder_.size(); ++i) encoder_[i].visit("enc" + std::to_string(i + 1), fn);
        for (std::size_t i = 0; i < decoder_.size(); ++i) {
            decoder_[i].visit("dec" + std::to_string(i + 1), fn);
            if (has_projection_[i]) projection_[i].visit("dec" + std::to_string(i + 1) + ".proj", fn);
        }
    }

    std::vector<OperationalConv2D>& encoder() { return encoder_; }
    std::vector<OperationalConv2D>& decoder() { return decoder_; }

private:
    GeneratorConfig cfg_;
    std::vector<OperationalConv2D> encoder_;
    std::vector<OperationalConv2D> decoder_;
    // 1x1 residual projection per decoder block when channel counts differ.
    std::vector<OperationalConv2D> projection_;
    std::vector<bool> has_projection_;
};

struct DiscriminatorTape {
    Tensor input;
    std::vector<Tensor> layer_out;  // after tanh
    Tensor hidden;                  // tanh(dense1)
    double output = 0.0;            // sigmoid(dense2)
};

class DiscriminatorNet {
public:
    DiscriminatorNet() = default;
    DiscriminatorNet(const DiscriminatorConfig& cfg, RngStream init);

    const DiscriminatorConfig& config() const { return cfg_; }
    /// Spatial extent of the last operational layer's output.
    std::size_t final_extent() const { return final_extent_; }

    double forward(const Tensor& x) const;
    double forward(const Tensor& x, DiscriminatorTape& tape) const;
    /// Input gradient for d(output) scaled by grad_output. Parameter
    /// gradients accumulate only when accumulate_params is set.
    Tensor backward(const DiscriminatorTape& tape, double grad_output, bool accumulate_params);

    void zero_grad();

    template <typename Fn>
    void visit(Fn&& fn) {
        for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].visit("op" + std::to_string(i + 1), fn);
        hidden_.visit("dense1", fn);
        head_.visit("dense2", fn);
    }

private:
    DiscriminatorConfig cfg_;
    std::vector<OperationalConv2D> layers_;
    DenseLayer hidden_;
    DenseLayer head_;
    std::size_t final_extent_ = 0;
};

GeneratorNet build_generator(const GeneratorConfig& cfg, RngStream init);
DiscriminatorNet build_discriminator(const DiscriminatorConfig& cfg, RngStream init);

}  // namespace xopgan
