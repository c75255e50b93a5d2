#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "xopgan/data/manifest.hpp"
#include "xopgan/inference/select.hpp"

namespace xopgan {

struct ImageEvaluation {
    std::string input;
    std::string target;
    Partition partition = Partition::Unassigned;
    double psnr_input = 0.0;
    std::array<double, 3> psnr_experts{};
    std::array<double, 3> scores{};
    std::size_t chosen_index = 0;
    std::size_t oracle_index = 0;
    double psnr_selected = 0.0;
    double psnr_oracle = 0.0;
    std::optional<double> psnr_base;

    friend bool operator==(const ImageEvaluation&, const ImageEvaluation&) = default;
};

/// Mean PSNR (infinity capped) per method.
struct MethodMeans {
    double input = 0.0;
    std::array<double, 3> experts{};
    double selected = 0.0;
    double oracle = 0.0;
    std::optional<double> base;
    double agreement_rate = 0.0;
    std::size_t count = 0;

    friend bool operator==(const MethodMeans&, const MethodMeans&) = default;
};

struct EvaluationReport {
    std::string config_digest;
    std::vector<ImageEvaluation> per_image;
    MethodMeans means;
    double agreement_rate = 0.0;
    std::map<std::string, MethodMeans> per_partition;

    friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

nlohmann::ordered_json to_json(const EvaluationReport& r);
EvaluationReport report_from_json(const nlohmann::json& j);

MethodMeans summarize(std::span<const ImageEvaluation> images);

struct EvaluateOptions {
    /// When set, a comparison grid per image is written under this directory.
    std::optional<std::filesystem::path> grid_dir;
};

/// Scores every test pair with discriminator-selected and oracle-selected
/// restoration. `base`, when given, is evaluated alongside as the single
/// generator reference. Throws on an empty manifest.
EvaluationReport evaluate(const DatasetManifest& test, const std::array<const GeneratorNet*, 3>& experts,
                          const DiscriminatorNet& od, const GeneratorNet* base = nullptr,
                          const EvaluateOptions& options = {});

/// degraded | expert LQ | expert MQ | expert HQ | GT, with a 2-pixel red
/// border on the discriminator-selected expert. All inputs are 0..255.
Tensor comparison_grid(const Tensor& degraded, std::span<const Tensor> expert_outputs, std::size_t selected,
                       const Tensor& gt);

}  // namespace xopgan
