#include "xopgan/training/config.hpp"

#include <cstdio>

#include "xopgan/numerics/errors.hpp"
#include "xopgan/numerics/rng.hpp"

namespace xopgan {

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (batch_size != 1) throw ConfigError("only batch_size = 1 is supported");
    if (!(epsilon >= 0.0 && epsilon <= 0.25)) throw ConfigError("epsilon must lie in [0, 0.25]");
    if (!(lambda_rec >= 0.0)) throw ConfigError("lambda_rec must be non-negative");
    if (discriminator.image_channels != generator.image_channels)
        throw ConfigError("generator and discriminator disagree on image channels");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"lr", c.lr},
                       {"batch_size", c.batch_size},
                       {"max_iterations", c.max_iterations},
                       {"epsilon", c.epsilon},
                       {"lambda_rec", c.lambda_rec},
                       {"seed", c.seed},
                       {"generator", c.generator},
                       {"discriminator", c.discriminator}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    TrainConfig d;
    c.lr = j.value("lr", d.lr);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.max_iterations = j.value("max_iterations", d.max_iterations);
    c.epsilon = j.value("epsilon", d.epsilon);
    c.lambda_rec = j.value("lambda_rec", d.lambda_rec);
    c.seed = j.value("seed", d.seed);
    c.generator = j.value("generator", d.generator);
    c.discriminator = j.value("discriminator", d.discriminator);
}

static std::string hex_digest(const std::string& kind, const nlohmann::json& cfg) {
    const nlohmann::json j{{"kind", kind}, {"config", cfg}};
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
    return buf;
}

std::string config_digest(const GeneratorConfig& c) { return hex_digest("generator", c); }
std::string config_digest(const DiscriminatorConfig& c) { return hex_digest("discriminator", c); }

}  // namespace xopgan
