#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "xopgan/numerics/tensor.hpp"

namespace xopgan {

/// A tensor whose analytic gradient is checked. The loss closure must read
/// `value` so that perturbing it changes the loss.
struct GradTarget {
    std::string name;
    Tensor* value = nullptr;
    Tensor analytic;
    /// Flat indices to probe; empty probes every element.
    std::vector<std::size_t> indices;
};

struct GradcheckOptions {
    double step = 1e-5;
    /// Denominator floor of the relative error, so that gradients that are
    /// zero up to rounding compare on absolute terms.
    double floor = 1e-5;
};

struct GradcheckReport {
    double max_rel_error = 0.0;
    std::size_t probes = 0;
    std::string worst;  // "<target>[<index>]"
};

double relative_error(double analytic, double numeric, double floor);

/// Central finite differences of `loss` against each target's analytic
/// gradient. Restores every perturbed value. Throws NumericalError if the
/// loss is not finite.
GradcheckReport gradcheck(std::vector<GradTarget>& targets, const std::function<double()>& loss,
                          const GradcheckOptions& options = {});

}  // namespace xopgan
