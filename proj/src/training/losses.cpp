#include "xopgan/training/losses.hpp"

#include <cmath>

#include "xopgan/numerics/errors.hpp"

namespace xopgan {

double sample_smoothed_label(LabelKind kind, double epsilon, RngStream& rng) {
    if (!(epsilon >= 0.0)) throw ConfigError("label smoothing epsilon must be non-negative");
    const double u = rng.uniform();
    if (kind == LabelKind::Fake) return 2.0 * epsilon * u;
    return kRealLabelCenter - epsilon + 2.0 * epsilon * u;
}

DiscriminatorLoss discriminator_loss(DiscriminatorNet& od, std::span<const GeneratorNet* const> generators,
                                     const Tensor& x, const Tensor& gt, double epsilon, RngStream& labels) {
    if (generators.empty()) throw ConfigError("discriminator_loss needs at least one generator");
    for (const auto* g : generators)
        if (!g) throw ConfigError("discriminator_loss: missing generator");

    DiscriminatorLoss out;
    DiscriminatorTape tape;
    for (const auto* g : generators) {
        const Tensor fake = g->forward(x);
        const double score = od.forward(fake, tape);
        const double label = sample_smoothed_label(LabelKind::Fake, epsilon, labels);
        const double diff = score - label;
        od.backward(tape, 2.0 * diff, true);
        out.fake_scores.push_back(score);
        out.fake_labels.push_back(label);
        out.fake_terms.push_back(diff * diff);
        out.total += diff * diff;
    }
    out.real_score = od.forward(gt, tape);
    out.real_label = sample_smoothed_label(LabelKind::Real, epsilon, labels);
    const double diff = out.real_score - out.real_label;
    od.backward(tape, 2.0 * diff, true);
    out.real_term = diff * diff;
    out.total += out.real_term;
    return out;
}

GeneratorLoss generator_loss(GeneratorNet& og, DiscriminatorNet& od, const Tensor& x, const Tensor& gt,
                             double lambda_rec) {
    GeneratorTape gtape;
    const Tensor y = og.forward(x, gtape);
    require_same_shape(y, gt, "generator_loss target");
    DiscriminatorTape dtape;

    GeneratorLoss out;
    out.score = od.forward(y, dtape);
    const double diff = out.score - kRealLabelCenter;
    out.adversarial = diff * diff;
    Tensor grad = od.backward(dtape, 2.0 * diff, false);

    double l1 = 0.0;
    const double n = static_cast<double>(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - gt[i];
        l1 += std::abs(d);
        if (lambda_rec > 0.0 && d != 0.0) grad[i] += lambda_rec * (d > 0.0 ? 1.0 : -1.0) / n;
    }
    out.reconstruction = l1 / n;
    out.total = out.adversarial + lambda_rec * out.reconstruction;
    og.backward(gtape, grad);
    return out;
}

}  // namespace xopgan
