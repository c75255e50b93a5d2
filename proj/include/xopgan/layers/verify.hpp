#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xopgan/numerics/gradcheck.hpp"

// Finite-difference verification of the differentiable stack, each case
// closed by a mean-squared-error head against a random target.

namespace xopgan {

struct GradcheckCase {
    std::string name;
    GradcheckReport report;
};

/// 1x2x6x6 input, 3x2x3x3 kernel; every input, weight and bias element.
GradcheckReport gradcheck_conv2d(std::uint64_t seed, const GradcheckOptions& opt = {});
/// Q = 3 operational layer followed by tanh; every element.
GradcheckReport gradcheck_opconv(std::uint64_t seed, const GradcheckOptions& opt = {});
/// Desk-scale generator on a 3x32x32 input. probes_per_tensor random
/// elements of each parameter tensor and of the input are checked.
GradcheckReport gradcheck_generator(std::uint64_t seed, std::size_t probes_per_tensor,
                                    const GradcheckOptions& opt = {});
/// Desk-scale discriminator on a 3x32x32 input, sampled like the generator.
GradcheckReport gradcheck_discriminator(std::uint64_t seed, std::size_t probes_per_tensor,
                                        const GradcheckOptions& opt = {});

std::vector<GradcheckCase> gradcheck_suite(std::uint64_t seed, std::size_t probes_per_tensor = 4);

}  // namespace xopgan
