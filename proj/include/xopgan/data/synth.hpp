#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "xopgan/data/manifest.hpp"
#include "xopgan/numerics/tensor.hpp"

namespace xopgan {

struct SeverityBand {
    double lo = 0.0;
    double hi = 0.0;
};

struct SynthOptions {
    std::size_t count = 30;
    std::size_t size = 32;
    std::uint64_t seed = 0;
    /// Record i draws its severity uniformly from band i mod bands.size().
    std::vector<SeverityBand> bands{{0.05, 0.25}, {0.4, 0.6}, {0.75, 0.95}};
    double test_fraction = 0.1;
};

struct SynthResult {
    DatasetManifest all;
    DatasetManifest train;
    DatasetManifest test;
    std::vector<double> severities;  // per record, canonical order
};

/// Procedural clean scene (gradient backdrop, soft shapes, ripple texture).
Tensor procedural_image(std::size_t size, std::uint64_t seed);

/// Writes clean/ and degraded/ PNGs plus manifest.jsonl, train.jsonl and
/// test.jsonl under out_dir. Everything is a function of the options.
SynthResult synth_dataset(const SynthOptions& options, const std::filesystem::path& out_dir);

}  // namespace xopgan
