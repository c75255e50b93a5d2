#include "xopgan/numerics/adam.hpp"

#include <cmath>

#include "xopgan/numerics/errors.hpp"

namespace xopgan {

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr) {
    require_same_shape(param, grad, "adam_step grad");
    if (state.m.empty()) state = AdamState::fresh(param.shape());
    require_same_shape(param, state.m, "adam_step first moment");
    require_same_shape(param, state.v, "adam_step second moment");
    if (!(lr > 0.0)) throw ConfigError("adam_step: learning rate must be positive");

    state.t += 1;
    const double b1 = state.beta1, b2 = state.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

}  // namespace xopgan
