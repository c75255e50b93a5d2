#include "xopgan/layers/verify.hpp"

#include "xopgan/layers/networks.hpp"
#include "xopgan/layers/opconv.hpp"

namespace xopgan {

namespace {

Tensor random_tensor(Shape shape, RngStream& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = rng.uniform(lo, hi);
    return t;
}

double mse(const Tensor& y, const Tensor& target) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - target[i]) * (y[i] - target[i]);
    return s / static_cast<double>(y.size());
}

Tensor mse_grad(const Tensor& y, const Tensor& target) {
    Tensor g = Tensor::zeros_like(y);
    const double scale = 2.0 / static_cast<double>(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) g[i] = scale * (y[i] - target[i]);
    return g;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, RngStream& rng) {
    std::vector<std::size_t> idx;
    if (count >= n) {
        for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
        return idx;
    }
    for (std::size_t i = 0; i < count; ++i) idx.push_back(rng.below(n));
    return idx;
}

}  // namespace

GradcheckReport gradcheck_conv2d(std::uint64_t seed, const GradcheckOptions& opt) {
    RngStream rng(seed, "gradcheck.conv2d");
    Tensor x = random_tensor({2, 6, 6}, rng);
    Tensor w = random_tensor({3, 2, 3, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    const auto geom = ConvGeometry::symmetric(1, 1);
    const Tensor target = random_tensor({3, 6, 6}, rng);

    const Tensor y = conv2d(x, w, b, geom);
    auto g = conv2d_grad(x, w, mse_grad(y, target), geom);
    std::vector<GradTarget> targets{{"input", &x, g.input, {}}, {"weights", &w, g.weights, {}}, {"bias", &b, g.bias, {}}};
    return gradcheck(targets, [&] { return mse(conv2d(x, w, b, geom), target); }, opt);
}

GradcheckReport gradcheck_opconv(std::uint64_t seed, const GradcheckOptions& opt) {
    RngStream rng(seed, "gradcheck.opconv");
    OperationalConv2D layer(2, 3, 3, 3, ConvGeometry::symmetric(1, 1));
    layer.init_uniform(rng.split("init"));
    for (auto& v : layer.bias().values()) v = rng.uniform(-0.5, 0.5);
    Tensor x = random_tensor({2, 6, 6}, rng);
    const Tensor target = random_tensor({3, 6, 6}, rng, -0.9, 0.9);

    auto run = [&] { return elementwise(layer.forward(x), Activation::tanh()); };
    const Tensor y = run();
    auto g = layer.backward(x, tanh_grad_from_output(y, mse_grad(y, target)));

    std::vector<GradTarget> targets{{"input", &x, g.input, {}}};
    for (std::size_t q = 0; q < layer.order(); ++q)
        targets.push_back({"w" + std::to_string(q + 1), &layer.weights()[q], g.weights[q], {}});
    targets.push_back({"w0", &layer.bias(), g.bias, {}});
    return gradcheck(targets, [&] { return mse(run(), target); }, opt);
}

GradcheckReport gradcheck_generator(std::uint64_t seed, std::size_t probes, const GradcheckOptions& opt) {
    RngStream rng(seed, "gradcheck.generator");
    GeneratorNet net(GeneratorConfig{}, rng.split("init"));
    Tensor x = random_tensor({3, 32, 32}, rng);
    const Tensor target = random_tensor({3, 32, 32}, rng, -0.9, 0.9);

    GeneratorTape tape;
    const Tensor y = net.forward(x, tape);
    net.zero_grad();
    const Tensor gx = net.backward(tape, mse_grad(y, target));

    RngStream pick = rng.split("probes");
    std::vector<GradTarget> targets{{"input", &x, gx, sample_indices(x.size(), probes, pick)}};
    net.visit([&](const std::string& name, Tensor& value, Tensor& grad) {
        targets.push_back({name, &value, grad, sample_indices(value.size(), probes, pick)});
    });
    return gradcheck(targets, [&] { return mse(net.forward(x), target); }, opt);
}

GradcheckReport gradcheck_discriminator(std::uint64_t seed, std::size_t probes, const GradcheckOptions& opt) {
    RngStream rng(seed, "gradcheck.discriminator");
    DiscriminatorNet net(DiscriminatorConfig{}, rng.split("init"));
    Tensor x = random_tensor({3, 32, 32}, rng);
    const double target = rng.uniform(0.0, 1.0);

    DiscriminatorTape tape;
    const double y = net.forward(x, tape);
    net.zero_grad();
    const Tensor gx = net.backward(tape, 2.0 * (y - target), true);

    RngStream pick = rng.split("probes");
    std::vector<GradTarget> targets{{"input", &x, gx, sample_indices(x.size(), probes, pick)}};
    net.visit([&](const std::string& name, Tensor& value, Tensor& grad) {
        targets.push_back({name, &value, grad, sample_indices(value.size(), probes, pick)});
    });
    return gradcheck(
        targets,
        [&] {
            const double o = net.forward(x);
            return (o - target) * (o - target);
        },
        opt);
}

std::vector<GradcheckCase> gradcheck_suite(std::uint64_t seed, std::size_t probes) {
    return {{"conv2d", gradcheck_conv2d(seed)},
            {"opconv_q3_tanh", gradcheck_opconv(seed)},
            {"generator", gradcheck_generator(seed, probes)},
            {"discriminator", gradcheck_discriminator(seed, probes)}};
}

}  // namespace xopgan
