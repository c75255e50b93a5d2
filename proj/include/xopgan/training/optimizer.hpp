#pragma once

#include <string>
#include <vector>

#include "xopgan/numerics/adam.hpp"
#include "xopgan/numerics/errors.hpp"

namespace xopgan {

/// Adam over every parameter tensor of a network, in the network's visit
/// order. States are created on the first step.
class Optimizer {
public:
    explicit Optimizer(double lr = 1e-5) : lr_(lr) {}

    double lr() const { return lr_; }
    std::vector<AdamState>& states() { return states_; }
    const std::vector<AdamState>& states() const { return states_; }

    template <typename Net>
    void step(Net& net) {
        std::size_t i = 0;
        net.visit([&](const std::string&, Tensor& value, Tensor& grad) {
            if (i == states_.size()) states_.push_back(AdamState::fresh(value.shape()));
            adam_step(value, grad, states_[i], lr_);
            ++i;
        });
        if (i != states_.size()) throw ConfigError("optimizer state does not match the network");
    }

private:
    double lr_;
    std::vector<AdamState> states_;
};

}  // namespace xopgan
