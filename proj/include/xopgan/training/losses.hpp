#pragma once

#include <span>
#include <vector>

#include "xopgan/layers/networks.hpp"
#include "xopgan/numerics/rng.hpp"

namespace xopgan {

/// Centre of the real-label interval; also the generator's adversarial target.
inline constexpr double kRealLabelCenter = 0.9;

enum class LabelKind { Real, Fake };

/// Fake labels are uniform on [0, 2 eps]; real labels uniform on
/// [0.9 - eps, 0.9 + eps].
double sample_smoothed_label(LabelKind kind, double epsilon, RngStream& rng);

struct DiscriminatorLoss {
    double total = 0.0;
    std::vector<double> fake_scores;  // OD(OG_i(X_k)) per generator
    std::vector<double> fake_labels;
    std::vector<double> fake_terms;
    double real_score = 0.0;  // OD(GT_k)
    double real_label = 0.0;
    double real_term = 0.0;
};

/// Least-squares discriminator loss for one source image X_k:
///
///   sum_i (OD(OG_i(X_k)) - fake_i)^2 + (OD(GT_k) - real)^2
///
/// with fresh smoothed labels per term. Accumulates gradients into the
/// discriminator only; generators are evaluated forward.
DiscriminatorLoss discriminator_loss(DiscriminatorNet& od, std::span<const GeneratorNet* const> generators,
                                     const Tensor& x, const Tensor& gt, double epsilon, RngStream& labels);

struct GeneratorLoss {
    double total = 0.0;
    double adversarial = 0.0;     // (OD(OG(X)) - 0.9)^2
    double reconstruction = 0.0;  // mean |OG(X) - GT|, unweighted
    double score = 0.0;           // OD(OG(X))
};

/// (OD(OG(X)) - 0.9)^2 + lambda_rec * mean|OG(X) - GT|. Accumulates
/// gradients into the generator only.
GeneratorLoss generator_loss(GeneratorNet& og, DiscriminatorNet& od, const Tensor& x, const Tensor& gt,
                             double lambda_rec);

}  // namespace xopgan
