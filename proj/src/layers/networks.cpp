#include "xopgan/layers/networks.hpp"

#include <cmath>

#include "xopgan/numerics/errors.hpp"

namespace xopgan {

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
    j = nlohmann::json{{"image_channels", c.image_channels},
                       {"encoder_channels", c.encoder_channels},
                       {"q", c.q},
                       {"encoder_kernel", c.encoder_kernel},
                       {"encoder_stride", c.encoder_stride},
                       {"encoder_padding", c.encoder_padding},
                       {"decoder_kernel", c.decoder_kernel},
                       {"decoder_padding", c.decoder_padding},
                       {"skip_connections", c.skip_connections}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
    GeneratorConfig d;
    c.image_channels = j.value("image_channels", d.image_channels);
    c.encoder_channels = j.value("encoder_channels", d.encoder_channels);
    c.q = j.value("q", d.q);
    c.encoder_kernel = j.value("encoder_kernel", d.encoder_kernel);
    c.encoder_stride = j.value("encoder_stride", d.encoder_stride);
    c.encoder_padding = j.value("encoder_padding", d.encoder_padding);
    c.decoder_kernel = j.value("decoder_kernel", d.decoder_kernel);
    c.decoder_padding = j.value("decoder_padding", d.decoder_padding);
    c.skip_connections = j.value("skip_connections", d.skip_connections);
}

void to_json(nlohmann::json& j, const DiscriminatorConfig& c) {
    j = nlohmann::json{{"image_channels", c.image_channels},
                       {"input_size", c.input_size},
                       {"channels", c.channels},
                       {"strides", c.strides},
                       {"kernel", c.kernel},
                       {"q", c.q},
                       {"dense_hidden", c.dense_hidden}};
}

void from_json(const nlohmann::json& j, DiscriminatorConfig& c) {
    DiscriminatorConfig d;
    c.image_channels = j.value("image_channels", d.image_channels);
    c.input_size = j.value("input_size", d.input_size);
    c.channels = j.value("channels", d.channels);
    c.strides = j.value("strides", d.strides);
    c.kernel = j.value("kernel", d.kernel);
    c.q = j.value("q", d.q);
    c.dense_hidden = j.value("dense_hidden", d.dense_hidden);
}

DiscriminatorConfig DiscriminatorConfig::paper_scale() {
    DiscriminatorConfig c;
    c.input_size = 256;
    c.strides = {4, 4, 4, 2, 2};
    return c;
}

// ---------------------------------------------------------------------------
// Generator

GeneratorNet::GeneratorNet(const GeneratorConfig& cfg, RngStream init) : cfg_(cfg) {
    const auto& enc = cfg.encoder_channels;
    if (enc.size() != kUNetLevels)
        throw ConfigError("generator needs " + std::to_string(kUNetLevels) + " encoder widths, got " +
                          std::to_string(enc.size()));
    if (cfg.encoder_stride < 2) throw ConfigError("generator encoder stride must be >= 2");

    const auto enc_geom = ConvGeometry::symmetric(cfg.encoder_stride, cfg.encoder_padding);
    const auto dec_geom = ConvGeometry::symmetric(1, cfg.decoder_padding);
    if (2 * cfg.decoder_padding + 1 != cfg.decoder_kernel)
        throw ConfigError("decoder padding must preserve spatial size (kernel = 2 * padding + 1)");

    std::size_t in = cfg.image_channels;
    for (std::size_t i = 0; i < kUNetLevels; ++i) {
        encoder_.emplace_back(in, enc[i], cfg.encoder_kernel, cfg.q, enc_geom);
        encoder_.back().init_uniform(init.split("enc" + std::to_string(i + 1)));
        in = enc[i];
    }

    std::size_t prev = enc[kUNetLevels - 1];
    for (std::size_t j = 0; j < kUNetLevels; ++j) {
        const bool last = j + 1 == kUNetLevels;
        const std::size_t out = last ? cfg.image_channels : enc[kUNetLevels - 2 - j];
        const std::size_t skip = cfg.skip_connections ? (last ? cfg.image_channels : enc[kUNetLevels - 2 - j]) : 0;
        const std::size_t z = prev + skip;
        decoder_.emplace_back(z, out, cfg.decoder_kernel, cfg.q, dec_geom);
        decoder_.back().init_uniform(init.split("dec" + std::to_string(j + 1)));
        const bool proj = z != out;
        has_projection_.push_back(proj);
        if (proj) {
            projection_.emplace_back(z, out, 1, 1, ConvGeometry{});
            projection_.back().init_uniform(init.split("proj" + std::to_string(j + 1)));
        } else {
            projection_.emplace_back();
        }
        prev = out;
    }
}

std::size_t GeneratorNet::encoder_extent(std::size_t input_extent, std::size_t level) const {
    std::size_t e = input_extent;
    for (std::size_t i = 0; i < level; ++i) e = encoder_[i].geometry().output_extent(e, encoder_[i].kernel());
    return e;
}

void GeneratorNet::check_input(const Tensor& x) const {
    if (x.rank() != 3 || x.dim(0) != cfg_.image_channels)
        throw DimensionError("generator input must be [" + std::to_string(cfg_.image_channels) + ",H,W], got " +
                             shape_string(x.shape()));
    std::size_t div = 1;
    for (std::size_t i = 0; i < kUNetLevels; ++i) div *= cfg_.encoder_stride;
    if (x.dim(1) % div || x.dim(2) % div)
        throw ConfigError("generator input extent " + std::to_string(x.dim(1)) + "x" + std::to_string(x.dim(2)) +
                          " is not divisible by " + std::to_string(div));
}

Tensor GeneratorNet::forward(const Tensor& x) const {
    GeneratorTape tape;
    return forward(x, tape);
}

Tensor GeneratorNet::forward(const Tensor& x, GeneratorTape& tape) const {
    check_input(x);
    tape = GeneratorTape{};
    tape.input = x;
    const Tensor* cur = &x;
    for (const auto& layer : encoder_) {
        tape.encoder_out.push_back(elementwise(layer.forward(*cur), Activation::tanh()));
        cur = &tape.encoder_out.back();
    }
    for (std::size_t j = 0; j < kUNetLevels; ++j) {
        Tensor z = upsample_nearest(*cur, cfg_.encoder_stride);
        if (cfg_.skip_connections) {
            const Tensor& skip = j + 1 == kUNetLevels ? x : tape.encoder_out[kUNetLevels - 2 - j];
            const Tensor parts[] = {std::move(z), skip};
            z = concat_channels(parts);
        }
        Tensor pre = decoder_[j].forward(z);
        if (has_projection_[j])
            pre += projection_[j].forward(z);
        else
            pre += z;
        tape.decoder_in.push_back(std::move(z));
        tape.decoder_out.push_back(elementwise(pre, Activation::tanh()));
        cur = &tape.decoder_out.back();
    }
    return tape.decoder_out.back();
}

Tensor GeneratorNet::backward(const GeneratorTape& tape, const Tensor& grad_output) {
    require_same_shape(tape.decoder_out.back(), grad_output, "generator backward");
    std::vector<Tensor> grad_enc;
    for (const auto& e : tape.encoder_out) grad_enc.push_back(Tensor::zeros_like(e));
    Tensor grad_x = Tensor::zeros_like(tape.input);

    Tensor g = grad_output;
    for (std::size_t jj = kUNetLevels; jj-- > 0;) {
        const Tensor& z = tape.decoder_in[jj];
        const Tensor gpre = tanh_grad_from_output(tape.decoder_out[jj], g);
        auto og = decoder_[jj].backward(z, gpre);
        decoder_[jj].accumulate(og);
        Tensor gz = std::move(og.input);
        if (has_projection_[jj]) {
            auto pg = projection_[jj].backward(z, gpre);
            projection_[jj].accumulate(pg);
            gz += pg.input;
        } else {
            gz += gpre;
        }
        Tensor gu;
        if (cfg_.skip_connections) {
            const bool last = jj + 1 == kUNetLevels;
            Tensor& skip_grad = last ? grad_x : grad_enc[kUNetLevels - 2 - jj];
            const std::size_t widths[] = {gz.dim(0) - skip_grad.dim(0), skip_grad.dim(0)};
            auto parts = split_channels(gz, widths);
            skip_grad += parts[1];
            gu = std::move(parts[0]);
        } else {
            gu = std::move(gz);
        }
        g = upsample_nearest_grad(gu, cfg_.encoder_stride);
    }
    grad_enc.back() += g;

    for (std::size_t ii = kUNetLevels; ii-- > 0;) {
        const Tensor gpre = tanh_grad_from_output(tape.encoder_out[ii], grad_enc[ii]);
        const Tensor& in = ii == 0 ? tape.input : tape.encoder_out[ii - 1];
        auto og = encoder_[ii].backward(in, gpre);
        encoder_[ii].accumulate(og);
        if (ii == 0)
            grad_x += og.input;
        else
            grad_enc[ii - 1] += og.input;
    }
    return grad_x;
}

void GeneratorNet::zero_grad() {
    for (auto& l : encoder_) l.zero_grad();
    for (std::size_t j = 0; j < decoder_.size(); ++j) {
        decoder_[j].zero_grad();
        if (has_projection_[j]) projection_[j].zero_grad();
    }
}

// ---------------------------------------------------------------------------
// Discriminator

DiscriminatorNet::DiscriminatorNet(const DiscriminatorConfig& cfg, RngStream init) : cfg_(cfg) {
    if (cfg.channels.empty() || cfg.channels.size() != cfg.strides.size())
        throw ConfigError("discriminator channel and stride schedules must be non-empty and equal length");
    std::size_t product = 1;
    for (auto s : cfg.strides) {
        if (s == 0) throw ConfigError("discriminator stride must be positive");
        product *= s;
    }
    if (product > cfg.input_size)
        throw ConfigError("discriminator strides collapse a " + std::to_string(cfg.input_size) +
                          " input below 1x1 (stride product " + std::to_string(product) + ")");

    std::size_t in = cfg.image_channels;
    std::size_t extent = cfg.input_size;
    for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
        const auto geom = ConvGeometry::same(extent, cfg.kernel, cfg.strides[i]);
        layers_.emplace_back(in, cfg.channels[i], cfg.kernel, cfg.q, geom);
        layers_.back().init_uniform(init.split("op" + std::to_string(i + 1)));
        extent = geom.output_extent(extent, cfg.kernel);
        in = cfg.channels[i];
    }
    final_extent_ = extent;
    hidden_ = DenseLayer(in * extent * extent, cfg.dense_hidden);
    hidden_.init_uniform(init.split("dense1"));
    head_ = DenseLayer(cfg.dense_hidden, 1);
    head_.init_uniform(init.split("dense2"));
}

double DiscriminatorNet::forward(const Tensor& x) const {
    DiscriminatorTape tape;
    return forward(x, tape);
}

double DiscriminatorNet::forward(const Tensor& x, DiscriminatorTape& tape) const {
    if (x.shape() != Shape{cfg_.image_channels, cfg_.input_size, cfg_.input_size})
        throw DimensionError("discriminator expects " +
                             shape_string({cfg_.image_channels, cfg_.input_size, cfg_.input_size}) + ", got " +
                             shape_string(x.shape()));
    tape = DiscriminatorTape{};
    tape.input = x;
    const Tensor* cur = &x;
    for (const auto& layer : layers_) {
        tape.layer_out.push_back(elementwise(layer.forward(*cur), Activation::tanh()));
        cur = &tape.layer_out.back();
    }
    const Tensor flat = cur->reshaped({cur->size()});
    tape.hidden = elementwise(dense(flat, hidden_.weights, hidden_.bias), Activation::tanh());
    const Tensor logit = dense(tape.hidden, head_.weights, head_.bias);
    tape.output = 1.0 / (1.0 + std::exp(-logit[0]));
    return tape.output;
}

Tensor DiscriminatorNet::backward(const DiscriminatorTape& tape, double grad_output, bool accumulate_params) {
    const double o = tape.output;
    const Tensor dlogit({1}, {grad_output * o * (1.0 - o)});
    auto hg = dense_grad(tape.hidden, head_.weights, dlogit);
    const Tensor dh = tanh_grad_from_output(tape.hidden, hg.input);
    const Tensor& last = tape.layer_out.back();
    auto fg = dense_grad(last.reshaped({last.size()}), hidden_.weights, dh);
    if (accumulate_params) {
        head_.weight_grad += hg.weights;
        head_.bias_grad += hg.bias;
        hidden_.weight_grad += fg.weights;
        hidden_.bias_grad += fg.bias;
    }
    Tensor g = fg.input.reshaped(last.shape());
    for (std::size_t ii = layers_.size(); ii-- > 0;) {
        const Tensor gpre = tanh_grad_from_output(tape.layer_out[ii], g);
        const Tensor& in = ii == 0 ? tape.input : tape.layer_out[ii - 1];
        auto lg = layers_[ii].backward(in, gpre);
        if (accumulate_params) layers_[ii].accumulate(lg);
        g = std::move(lg.input);
    }
    return g;
}

void DiscriminatorNet::zero_grad() {
    for (auto& l : layers_) l.zero_grad();
    hidden_.zero_grad();
    head_.zero_grad();
}

GeneratorNet build_generator(const GeneratorConfig& cfg, RngStream init) { return GeneratorNet(cfg, init); }

DiscriminatorNet build_discriminator(const DiscriminatorConfig& cfg, RngStream init) {
    return DiscriminatorNet(cfg, init);
}

}  // namespace xopgan
