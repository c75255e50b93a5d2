#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "xopgan/layers/networks.hpp"

namespace xopgan {

struct SelectionResult {
    std::vector<Tensor> outputs;      // normalized restorations, one per expert
    std::vector<double> scores;       // discriminator confidence per output
    std::size_t chosen_index = 0;     // argmax of scores
    std::optional<std::size_t> oracle_index;
    std::vector<double> psnrs;        // per output vs. GT, when GT was given
};

/// Index of the largest value; ties go to the lowest index.
std::size_t argmax_lowest(std::span<const double> values);

/// Runs every expert on the normalized input x and picks the output the
/// discriminator is most confident in. The discriminator never sees x.
SelectionResult restore_select(const Tensor& x, std::span<const GeneratorNet* const> experts,
                               const DiscriminatorNet& od);

/// Per-output PSNR of denormalize(output) against an 0..255 ground truth,
/// and the index of the best one.
void attach_oracle(SelectionResult& result, const Tensor& gt);

/// Oracle choice over precomputed normalized outputs.
SelectionResult oracle_select(std::vector<Tensor> outputs, const Tensor& gt);

/// Runs the experts and chooses by PSNR against GT; no discriminator.
SelectionResult restore_oracle(const Tensor& x, std::span<const GeneratorNet* const> experts, const Tensor& gt);

}  // namespace xopgan
