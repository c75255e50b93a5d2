#include "xopgan/data/degrade.hpp"

#include <algorithm>
#include <cmath>

#include "xopgan/numerics/errors.hpp"
#include "xopgan/numerics/rng.hpp"

namespace xopgan {

namespace {

Tensor box_blur3(const Tensor& img) {
    const auto c = img.dim(0), h = img.dim(1), w = img.dim(2);
    Tensor out = Tensor::zeros_like(img);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                double s = 0.0;
                int n = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const auto yy = static_cast<std::ptrdiff_t>(y) + dy, xx = static_cast<std::ptrdiff_t>(x) + dx;
                        if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(h) || xx >= static_cast<std::ptrdiff_t>(w))
                            continue;
                        s += img.at(ch, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
                        ++n;
                    }
                out.at(ch, y, x) = s / n;
            }
    return out;
}

}  // namespace

Tensor degrade(const Tensor& image, double severity, std::uint64_t seed) {
    if (!(severity >= 0.0 && severity <= 1.0)) throw ValueError("degrade: severity must lie in [0, 1]");
    if (image.rank() != 3 || image.dim(0) != 3) throw DimensionError("degrade: expected [3,H,W] image");
    if (severity == 0.0) return image;

    const double s = severity;
    const auto plane = image.dim(1) * image.dim(2);
    Tensor out = image;

    // Colour cast: water absorbs red first; scattering lifts blue-green.
    const double gain[3] = {1.0 - 0.65 * s, 1.0 - 0.15 * s, 1.0 + 0.05 * s};
    const double lift[3] = {0.0, 18.0 * s, 30.0 * s};
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] = out[c * plane + i] * gain[c] + lift[c];

    const Tensor blurred = box_blur3(out);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - s) * out[i] + s * blurred[i];

    const double contrast = 1.0 - 0.6 * s;
    for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < plane; ++i) mean += out[c * plane + i];
        mean /= static_cast<double>(plane);
        for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] = mean + contrast * (out[c * plane + i] - mean);
    }

    RngStream noise(seed, "degrade.noise");
    const double sigma = 12.0 * s;
    for (auto& v : out.values()) v = std::clamp(std::round(v + sigma * noise.normal()), 0.0, 255.0);
    return out;
}

}  // namespace xopgan
