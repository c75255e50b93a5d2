#include "xopgan/inference/select.hpp"

#include "xopgan/data/image.hpp"
#include "xopgan/data/metrics.hpp"
#include "xopgan/numerics/errors.hpp"
#include "xopgan/training/config.hpp"

namespace xopgan {

namespace {

void check_experts(std::span<const GeneratorNet* const> experts) {
    if (experts.empty()) throw ConfigError("no expert generators supplied");
    for (const auto* g : experts)
        if (!g) throw ConfigError("missing expert generator");
    const auto digest = config_digest(experts[0]->config());
    for (const auto* g : experts)
        if (config_digest(g->config()) != digest) throw ConfigError("expert generators have different architectures");
}

}  // namespace

std::size_t argmax_lowest(std::span<const double> values) {
    if (values.empty()) throw ValueError("argmax of an empty set");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

SelectionResult restore_select(const Tensor& x, std::span<const GeneratorNet* const> experts,
                               const DiscriminatorNet& od) {
    check_experts(experts);
    if (od.config().image_channels != experts[0]->config().image_channels)
        throw ConfigError("discriminator and generators disagree on image channels");
    SelectionResult r;
    for (const auto* g : experts) {
        r.outputs.push_back(g->forward(x));
        r.scores.push_back(od.forward(r.outputs.back()));
    }
    r.chosen_index = argmax_lowest(r.scores);
    return r;
}

void attach_oracle(SelectionResult& r, const Tensor& gt) {
    r.psnrs.clear();
    for (const auto& out : r.outputs) {
        require_same_shape(out, gt, "oracle ground truth");
        r.psnrs.push_back(psnr(denormalize(out), gt));
    }
    r.oracle_index = argmax_lowest(r.psnrs);
}

SelectionResult oracle_select(std::vector<Tensor> outputs, const Tensor& gt) {
    SelectionResult r;
    r.outputs = std::move(outputs);
    attach_oracle(r, gt);
    r.chosen_index = *r.oracle_index;
    return r;
}

SelectionResult restore_oracle(const Tensor& x, std::span<const GeneratorNet* const> experts, const Tensor& gt) {
    check_experts(experts);
    require_same_shape(x, gt, "restore_oracle");
    std::vector<Tensor> outputs;
    for (const auto* g : experts) outputs.push_back(g->forward(x));
    return oracle_select(std::move(outputs), gt);
}

}  // namespace xopgan
