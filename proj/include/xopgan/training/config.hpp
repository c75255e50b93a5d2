#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "xopgan/layers/networks.hpp"

namespace xopgan {

struct TrainConfig {
    double lr = 1e-5;
    std::size_t batch_size = 1;
    std::size_t max_iterations = 5000;
    /// Half-width of the smoothed label intervals.
    double epsilon = 0.05;
    /// Weight of the L1 content term in the generator loss.
    double lambda_rec = 0.0;
    std::uint64_t seed = 0;
    GeneratorConfig generator;
    DiscriminatorConfig discriminator;

    /// Throws ConfigError when a field is out of range.
    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Hex FNV-1a digest of the architecture, used to reject checkpoints from a
/// different layout.
std::string config_digest(const GeneratorConfig& c);
std::string config_digest(const DiscriminatorConfig& c);

}  // namespace xopgan
