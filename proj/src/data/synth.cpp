#include "xopgan/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "xopgan/data/degrade.hpp"
#include "xopgan/data/image.hpp"
#include "xopgan/data/metrics.hpp"
#include "xopgan/numerics/errors.hpp"
#include "xopgan/numerics/rng.hpp"

namespace xopgan {

Tensor procedural_image(std::size_t size, std::uint64_t seed) {
    RngStream rng(seed, "synth.scene");
    Tensor img({3, size, size});
    double top[3], bottom[3];
    for (int c = 0; c < 3; ++c) {
        top[c] = rng.uniform(40.0, 230.0);
        bottom[c] = rng.uniform(20.0, 200.0);
    }
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double freq = rng.uniform(0.1, 0.5);
    const double ripple = rng.uniform(0.0, 12.0);
    const double n = static_cast<double>(size);
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
            const double t = static_cast<double>(y) / (n - 1.0);
            const double wave = ripple * std::sin(freq * (std::cos(angle) * x + std::sin(angle) * y));
            for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = (1.0 - t) * top[c] + t * bottom[c] + wave;
        }

    const auto shapes = 2 + rng.below(4);
    for (std::uint64_t s = 0; s < shapes; ++s) {
        const bool circle = rng.uniform() < 0.5;
        const double cx = rng.uniform(0.0, n), cy = rng.uniform(0.0, n);
        const double r = rng.uniform(n * 0.08, n * 0.3);
        const double hw = rng.uniform(n * 0.08, n * 0.3), hh = rng.uniform(n * 0.08, n * 0.3);
        double color[3];
        for (auto& c : color) c = rng.uniform(0.0, 255.0);
        for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x) {
                const double dx = x - cx, dy = y - cy;
                const bool inside = circle ? dx * dx + dy * dy <= r * r : std::abs(dx) <= hw && std::abs(dy) <= hh;
                if (!inside) continue;
                for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = 0.25 * img.at(c, y, x) + 0.75 * color[c];
            }
    }
    for (auto& v : img.values()) v = std::clamp(std::round(v), 0.0, 255.0);
    return img;
}

SynthResult synth_dataset(const SynthOptions& opt, const std::filesystem::path& out_dir) {
    if (opt.count < 3) throw ConfigError("synthetic dataset needs at least 3 pairs");
    if (opt.size == 0 || opt.size % 32 != 0) throw ConfigError("synthetic image size must be a positive multiple of 32");
    if (opt.bands.empty()) throw ConfigError("at least one severity band is required");
    for (const auto& b : opt.bands)
        if (!(0.0 <= b.lo && b.lo <= b.hi && b.hi <= 1.0)) throw ConfigError("severity bands must lie in [0, 1]");

    std::filesystem::create_directories(out_dir / "clean");
    std::filesystem::create_directories(out_dir / "degraded");

    SynthResult result;
    result.all.split = "all";
    result.all.seed = opt.seed;
    result.all.base_dir = out_dir;
    const RngStream root(opt.seed, "synth");
    for (std::size_t i = 0; i < opt.count; ++i) {
        RngStream rec = root.split(i);
        const auto& band = opt.bands[i % opt.bands.size()];
        const double severity = rec.split("severity").uniform(band.lo, band.hi);
        const Tensor clean = procedural_image(opt.size, rec.split("scene").next_u64());
        const Tensor degraded = degrade(clean, severity, rec.split("degrade").next_u64());

        char name[32];
        std::snprintf(name, sizeof name, "pair_%05zu.png", i);
        ImagePair pair{std::string("degraded/") + name, std::string("clean/") + name, psnr(degraded, clean),
                       Partition::Unassigned};
        save_image(clean, out_dir / pair.target);
        save_image(degraded, out_dir / pair.input);
        result.all.records.push_back(std::move(pair));
        result.severities.push_back(severity);
    }
    result.all.canonicalize();

    auto [train, test] = split_train_test(result.all, opt.test_fraction, opt.seed);
    result.train = std::move(train);
    result.test = std::move(test);
    write_manifest(result.all, out_dir / "manifest.jsonl");
    write_manifest(result.train, out_dir / "train.jsonl");
    write_manifest(result.test, out_dir / "test.jsonl");
    return result;
}

}  // namespace xopgan
