#include "xopgan/inference/evaluate.hpp"

#include <cmath>

#include "xopgan/data/image.hpp"
#include "xopgan/data/metrics.hpp"
#include "xopgan/numerics/errors.hpp"
#include "xopgan/numerics/rng.hpp"
#include "xopgan/training/config.hpp"

namespace xopgan {

namespace {

nlohmann::ordered_json db(double v) {
    if (std::isinf(v)) return "inf";
    return v;
}

double db_from(const nlohmann::json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() != "inf") throw ValueError("PSNR string must be \"inf\"");
        return kPsnrInfinity;
    }
    return j.get<double>();
}

nlohmann::ordered_json means_json(const MethodMeans& m) {
    nlohmann::ordered_json j;
    j["count"] = m.count;
    j["input"] = m.input;
    j["expert_LQ"] = m.experts[0];
    j["expert_MQ"] = m.experts[1];
    j["expert_HQ"] = m.experts[2];
    j["selected"] = m.selected;
    j["oracle"] = m.oracle;
    j["base"] = m.base ? nlohmann::ordered_json(*m.base) : nlohmann::ordered_json(nullptr);
    j["agreement_rate"] = m.agreement_rate;
    return j;
}

MethodMeans means_from(const nlohmann::json& j) {
    MethodMeans m;
    m.count = j.at("count").get<std::size_t>();
    m.input = j.at("input").get<double>();
    m.experts = {j.at("expert_LQ").get<double>(), j.at("expert_MQ").get<double>(), j.at("expert_HQ").get<double>()};
    m.selected = j.at("selected").get<double>();
    m.oracle = j.at("oracle").get<double>();
    if (!j.at("base").is_null()) m.base = j.at("base").get<double>();
    m.agreement_rate = j.at("agreement_rate").get<double>();
    return m;
}

void draw_border(Tensor& img, std::size_t x0, std::size_t w, std::size_t h, std::size_t thickness) {
    const double red[3] = {255.0, 0.0, 0.0};
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = x0; x < x0 + w; ++x) {
            const bool edge = y < thickness || y >= h - thickness || x < x0 + thickness || x >= x0 + w - thickness;
            if (!edge) continue;
            for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = red[c];
        }
}

}  // namespace

nlohmann::ordered_json to_json(const EvaluationReport& r) {
    nlohmann::ordered_json j;
    j["config_digest"] = r.config_digest;
    auto per = nlohmann::ordered_json::array();
    for (const auto& e : r.per_image) {
        nlohmann::ordered_json p;
        p["input"] = e.input;
        p["target"] = e.target;
        p["partition"] = std::string(to_string(e.partition));
        p["psnr_input"] = db(e.psnr_input);
        p["psnr_experts"] = {db(e.psnr_experts[0]), db(e.psnr_experts[1]), db(e.psnr_experts[2])};
        p["scores"] = e.scores;
        p["chosen_index"] = e.chosen_index;
        p["oracle_index"] = e.oracle_index;
        p["psnr_selected"] = db(e.psnr_selected);
        p["psnr_oracle"] = db(e.psnr_oracle);
        p["psnr_base"] = e.psnr_base ? db(*e.psnr_base) : nlohmann::ordered_json(nullptr);
        per.push_back(std::move(p));
    }
    j["per_image"] = std::move(per);
    j["means"] = means_json(r.means);
    j["agreement_rate"] = r.agreement_rate;
    nlohmann::ordered_json parts = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.per_partition) parts[k] = means_json(v);
    j["per_partition"] = std::move(parts);
    return j;
}

EvaluationReport report_from_json(const nlohmann::json& j) {
    EvaluationReport r;
    r.config_digest = j.at("config_digest").get<std::string>();
    for (const auto& p : j.at("per_image")) {
        ImageEvaluation e;
        e.input = p.at("input").get<std::string>();
        e.target = p.at("target").get<std::string>();
        e.partition = partition_from_string(p.at("partition").get<std::string>());
        e.psnr_input = db_from(p.at("psnr_input"));
        for (std::size_t i = 0; i < 3; ++i) {
            e.psnr_experts[i] = db_from(p.at("psnr_experts").at(i));
            e.scores[i] = p.at("scores").at(i).get<double>();
        }
        e.chosen_index = p.at("chosen_index").get<std::size_t>();
        e.oracle_index = p.at("oracle_index").get<std::size_t>();
        e.psnr_selected = db_from(p.at("psnr_selected"));
        e.psnr_oracle = db_from(p.at("psnr_oracle"));
        if (!p.at("psnr_base").is_null()) e.psnr_base = db_from(p.at("psnr_base"));
        r.per_image.push_back(std::move(e));
    }
    r.means = means_from(j.at("means"));
    r.agreement_rate = j.at("agreement_rate").get<double>();
    for (const auto& [k, v] : j.at("per_partition").items()) r.per_partition[k] = means_from(v);
    return r;
}

MethodMeans summarize(std::span<const ImageEvaluation> images) {
    if (images.empty()) throw ValueError("cannot summarize an empty evaluation");
    MethodMeans m;
    m.count = images.size();
    std::vector<double> input, selected, oracle, base;
    std::array<std::vector<double>, 3> experts;
    std::size_t agree = 0;
    for (const auto& e : images) {
        input.push_back(e.psnr_input);
        selected.push_back(e.psnr_selected);
        oracle.push_back(e.psnr_oracle);
        for (std::size_t i = 0; i < 3; ++i) experts[i].push_back(e.psnr_experts[i]);
        if (e.psnr_base) base.push_back(*e.psnr_base);
        if (e.chosen_index == e.oracle_index) ++agree;
    }
    m.input = mean_psnr(input);
    m.selected = mean_psnr(selected);
    m.oracle = mean_psnr(oracle);
    for (std::size_t i = 0; i < 3; ++i) m.experts[i] = mean_psnr(experts[i]);
    if (base.size() == images.size()) m.base = mean_psnr(base);
    m.agreement_rate = static_cast<double>(agree) / static_cast<double>(images.size());
    return m;
}

Tensor comparison_grid(const Tensor& degraded, std::span<const Tensor> expert_outputs, std::size_t selected,
                       const Tensor& gt) {
    const auto h = degraded.dim(1), w = degraded.dim(2);
    constexpr std::size_t gap = 2;
    std::vector<const Tensor*> panels{&degraded};
    for (const auto& e : expert_outputs) panels.push_back(&e);
    panels.push_back(&gt);
    Tensor grid({3, h, panels.size() * w + (panels.size() - 1) * gap}, 255.0);
    for (std::size_t p = 0; p < panels.size(); ++p) {
        require_same_shape(*panels[p], degraded, "comparison grid panel");
        const std::size_t x0 = p * (w + gap);
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) grid.at(c, y, x0 + x) = panels[p]->at(c, y, x);
    }
    if (selected < expert_outputs.size()) draw_border(grid, (1 + selected) * (w + gap), w, h, 2);
    return grid;
}

EvaluationReport evaluate(const DatasetManifest& test, const std::array<const GeneratorNet*, 3>& experts,
                          const DiscriminatorNet& od, const GeneratorNet* base, const EvaluateOptions& options) {
    if (test.records.empty()) throw ValueError("evaluate: test manifest is empty");
    for (const auto* g : experts)
        if (!g) throw ConfigError("evaluate: missing expert generator");

    EvaluationReport report;
    {
        char buf[17];
        const auto combined = config_digest(experts[0]->config()) + config_digest(od.config());
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(combined)));
        report.config_digest = buf;
    }

    for (const auto& rec : test.records) {
        const Tensor degraded = load_image(test.resolve(rec.input));
        const Tensor gt = load_image(test.resolve(rec.target));
        const Tensor x = normalize(degraded);
        auto sel = restore_select(x, experts, od);
        attach_oracle(sel, gt);

        ImageEvaluation e;
        e.input = rec.input;
        e.target = rec.target;
        e.partition = rec.partition;
        e.psnr_input = psnr(degraded, gt);
        for (std::size_t i = 0; i < 3; ++i) {
            e.psnr_experts[i] = sel.psnrs[i];
            e.scores[i] = sel.scores[i];
        }
        e.chosen_index = sel.chosen_index;
        e.oracle_index = *sel.oracle_index;
        e.psnr_selected = sel.psnrs[sel.chosen_index];
        e.psnr_oracle = sel.psnrs[*sel.oracle_index];
        if (base) e.psnr_base = psnr(denormalize(base->forward(x)), gt);
        report.per_image.push_back(e);

        if (options.grid_dir) {
            std::vector<Tensor> outs;
            for (const auto& o : sel.outputs) outs.push_back(denormalize(o));
            const auto stem = std::filesystem::path(rec.input).stem().string();
            save_image(comparison_grid(degraded, outs, sel.chosen_index, gt), *options.grid_dir / (stem + "_grid.png"));
        }
    }

    report.means = summarize(report.per_image);
    report.agreement_rate = report.means.agreement_rate;
    std::map<std::string, std::vector<ImageEvaluation>> groups;
    for (const auto& e : report.per_image) groups[std::string(to_string(e.partition))].push_back(e);
    for (const auto& [k, v] : groups) report.per_partition[k] = summarize(v);
    return report;
}

}  // namespace xopgan
