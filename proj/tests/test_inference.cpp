#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "support.hpp"
#include "xopgan/data/image.hpp"
#include "xopgan/data/metrics.hpp"
#include "xopgan/data/synth.hpp"
#include "xopgan/inference/evaluate.hpp"
#include "xopgan/inference/select.hpp"
#include "xopgan/numerics/errors.hpp"

using namespace xopgan;
using xopgan::testing::random_image;
using xopgan::testing::random_tensor;
using xopgan::testing::TempDir;

namespace {

GeneratorConfig small_generator() {
    GeneratorConfig c;
    c.encoder_channels = {4, 4, 6, 6, 6};
    return c;
}

DiscriminatorConfig small_discriminator() {
    DiscriminatorConfig c;
    c.channels = {4, 4, 6, 6, 6};
    c.dense_hidden = 8;
    return c;
}

ImageEvaluation evaluation(double input, std::array<double, 3> experts, std::size_t chosen) {
    ImageEvaluation e;
    e.input = "in" + std::to_string(input);
    e.target = "gt";
    e.partition = Partition::MQ;
    e.psnr_input = input;
    e.psnr_experts = experts;
    e.scores = {0.1, 0.2, 0.3};
    e.chosen_index = chosen;
    e.oracle_index = argmax_lowest(experts);
    e.psnr_selected = experts[chosen];
    e.psnr_oracle = experts[e.oracle_index];
    return e;
}

}  // namespace

TEST_SUITE("selection") {
    TEST_CASE("argmax picks the highest score and the lowest index on ties") {
        CHECK(argmax_lowest(std::vector<double>{0.2, 0.7, 0.5}) == 1);
        CHECK(argmax_lowest(std::vector<double>{0.4, 0.4, 0.4}) == 0);
        CHECK(argmax_lowest(std::vector<double>{0.1, 0.6, 0.6}) == 1);
        CHECK_THROWS_AS(argmax_lowest(std::vector<double>{}), ValueError);
    }

    TEST_CASE("identical experts give identical outputs and choose index 0") {
        const GeneratorNet g(small_generator(), RngStream(1, "og"));
        const GeneratorNet a = g, b = g, c = g;
        const DiscriminatorNet od(small_discriminator(), RngStream(1, "od"));
        RngStream rng(2, "x");
        const Tensor x = random_tensor({3, 32, 32}, rng);
        const GeneratorNet* experts[] = {&a, &b, &c};
        const auto r = restore_select(x, experts, od);
        REQUIRE(r.outputs.size() == 3);
        CHECK(r.outputs[0] == r.outputs[1]);
        CHECK(r.outputs[1] == r.outputs[2]);
        CHECK(r.scores[0] == r.scores[2]);
        CHECK(r.chosen_index == 0);
        CHECK_FALSE(r.oracle_index.has_value());
    }

    TEST_CASE("repeated selection is bit-identical and leaves networks untouched") {
        const GeneratorNet a(small_generator(), RngStream(1, "a")), b(small_generator(), RngStream(1, "b")),
            c(small_generator(), RngStream(1, "c"));
        const DiscriminatorNet od(small_discriminator(), RngStream(1, "od"));
        RngStream rng(3, "x");
        const Tensor x = random_tensor({3, 32, 32}, rng);
        const GeneratorNet* experts[] = {&a, &b, &c};
        const Tensor before = a.forward(x);
        const auto r1 = restore_select(x, experts, od);
        const auto r2 = restore_select(x, experts, od);
        CHECK(r1.outputs == r2.outputs);
        CHECK(r1.scores == r2.scores);
        CHECK(r1.chosen_index == r2.chosen_index);
        CHECK(a.forward(x) == before);
    }

    TEST_CASE("oracle picks the best PSNR") {
        CHECK(argmax_lowest(std::vector<double>{18.2, 21.4, 19.9}) == 1);
        RngStream rng(4, "oracle");
        const Tensor gt = random_image(16, rng);
        const Tensor near = normalize(gt) + random_tensor(gt.shape(), rng, -0.05, 0.05);
        const Tensor far = normalize(gt) + random_tensor(gt.shape(), rng, -0.3, 0.3);
        const auto r = oracle_select({far, near, far}, gt);
        CHECK(r.oracle_index == 1u);
        CHECK(r.chosen_index == 1);
        CHECK(r.psnrs[1] > r.psnrs[0]);
    }

    TEST_CASE("an exact restoration wins with the infinity sentinel") {
        RngStream rng(5, "exact");
        const Tensor gt = random_image(16, rng);
        const Tensor noisy = normalize(gt) + random_tensor(gt.shape(), rng, -0.2, 0.2);
        const auto r = oracle_select({noisy, noisy, normalize(gt)}, gt);
        CHECK(r.oracle_index == 2u);
        CHECK(std::isinf(r.psnrs[2]));
    }

    TEST_CASE("oracle is the per-image max and bounds the discriminator choice") {
        const GeneratorNet a(small_generator(), RngStream(2, "a")), b(small_generator(), RngStream(2, "b")),
            c(small_generator(), RngStream(2, "c"));
        const DiscriminatorNet od(small_discriminator(), RngStream(2, "od"));
        const GeneratorNet* experts[] = {&a, &b, &c};
        RngStream rng(6, "x");
        for (int i = 0; i < 4; ++i) {
            const Tensor gt = random_image(32, rng);
            const Tensor x = normalize(gt) * 0.8;
            auto r = restore_select(x, experts, od);
            attach_oracle(r, gt);
            const double best = *std::max_element(r.psnrs.begin(), r.psnrs.end());
            CHECK(r.psnrs[*r.oracle_index] == best);
            CHECK(r.psnrs[*r.oracle_index] >= r.psnrs[r.chosen_index]);
            const auto o = restore_oracle(x, experts, gt);
            CHECK(o.oracle_index == r.oracle_index);
        }
    }

    TEST_CASE("mismatched experts are rejected") {
        GeneratorConfig other = small_generator();
        other.encoder_channels[0] = 5;
        const GeneratorNet a(small_generator(), RngStream(1, "a")), b(other, RngStream(1, "b"));
        const DiscriminatorNet od(small_discriminator(), RngStream(1, "od"));
        const GeneratorNet* experts[] = {&a, &b};
        CHECK_THROWS_AS(restore_select(Tensor({3, 32, 32}), experts, od), ConfigError);
        const GeneratorNet* missing[] = {&a, nullptr};
        CHECK_THROWS_AS(restore_select(Tensor({3, 32, 32}), missing, od), ConfigError);
    }
}

TEST_SUITE("report") {
    TEST_CASE("summary means and agreement") {
        const std::vector<ImageEvaluation> v{evaluation(10.0, {12, 14, 13}, 1), evaluation(20.0, {22, 21, 26}, 0)};
        const auto m = summarize(v);
        CHECK(m.count == 2);
        CHECK(m.input == 15.0);
        CHECK(m.experts[0] == 17.0);
        CHECK(m.selected == 18.0);
        CHECK(m.oracle == 20.0);
        CHECK(m.agreement_rate == 0.5);
        CHECK_FALSE(m.base.has_value());
        CHECK(m.oracle >= m.selected);
        CHECK_THROWS_AS(summarize(std::span<const ImageEvaluation>{}), ValueError);
    }

    TEST_CASE("json round trip is unchanged") {
        EvaluationReport r;
        r.config_digest = "00112233aabbccdd";
        r.per_image = {evaluation(10.0, {12, kPsnrInfinity, 13}, 1), evaluation(20.25, {22, 21, 26.5}, 2)};
        r.per_image[0].psnr_base = 11.5;
        r.per_image[1].psnr_base = 19.0;
        r.means = summarize(r.per_image);
        r.agreement_rate = r.means.agreement_rate;
        r.per_partition["MQ"] = r.means;
        const std::string text = to_json(r).dump();
        const auto back = report_from_json(nlohmann::json::parse(text));
        CHECK(back == r);
        CHECK(to_json(back).dump() == text);
        CHECK(text.find("\"inf\"") != std::string::npos);
    }

    TEST_CASE("comparison grid layout") {
        const Tensor deg({3, 8, 8}, 10.0), gt({3, 8, 8}, 20.0);
        const std::vector<Tensor> outs{Tensor({3, 8, 8}, 30.0), Tensor({3, 8, 8}, 40.0), Tensor({3, 8, 8}, 50.0)};
        const Tensor grid = comparison_grid(deg, outs, 1, gt);
        REQUIRE(grid.shape() == Shape{3, 8, 5 * 8 + 4 * 2});
        CHECK(grid.at(0, 4, 0) == 10.0);
        CHECK(grid.at(0, 4, 8) == 255.0);
        CHECK(grid.at(1, 0, 10) == 30.0);
        CHECK(grid.at(0, 0, 20) == 255.0);
        CHECK(grid.at(1, 0, 20) == 0.0);
        CHECK(grid.at(1, 6, 21) == 0.0);
        CHECK(grid.at(1, 4, 24) == 40.0);
        CHECK(grid.at(1, 0, 30) == 50.0);
        CHECK(grid.at(2, 7, 47) == 20.0);
    }
}

TEST_SUITE("evaluate") {
    TEST_CASE("empty manifest is an error") {
        const GeneratorNet g(small_generator(), RngStream(1, "og"));
        const DiscriminatorNet od(small_discriminator(), RngStream(1, "od"));
        CHECK_THROWS_AS(evaluate(DatasetManifest{}, {&g, &g, &g}, od), ValueError);
    }

    TEST_CASE("per-image plumbing on a synthetic test set") {
        TempDir dir("eval");
        SynthOptions opt;
        opt.count = 6;
        opt.seed = 8;
        opt.test_fraction = 0.0;
        const auto data = synth_dataset(opt, dir / "data");
        const GeneratorNet a(small_generator(), RngStream(3, "a")), b(small_generator(), RngStream(3, "b")),
            c(small_generator(), RngStream(3, "c"));
        const DiscriminatorNet od(small_discriminator(), RngStream(3, "od"));
        EvaluateOptions eo;
        eo.grid_dir = dir / "grids";
        std::filesystem::create_directories(*eo.grid_dir);
        const auto report = evaluate(data.all, {&a, &b, &c}, od, &a, eo);
        REQUIRE(report.per_image.size() == 6);
        for (const auto& e : report.per_image) {
            CHECK(e.psnr_oracle == *std::max_element(e.psnr_experts.begin(), e.psnr_experts.end()));
            CHECK(e.psnr_oracle >= e.psnr_selected);
            CHECK(e.psnr_base == e.psnr_experts[0]);
            CHECK(std::filesystem::exists(*eo.grid_dir / (std::filesystem::path(e.input).stem().string() + "_grid.png")));
        }
        CHECK(report.means.oracle >= report.means.selected);
        CHECK(report.means.base == report.means.experts[0]);
        CHECK(report.means.count == 6);
        CHECK(report.config_digest.size() == 16);
        CHECK(report_from_json(nlohmann::json::parse(to_json(report).dump())) == report);
        CHECK(evaluate(data.all, {&a, &b, &c}, od, &a).per_image == report.per_image);
    }
}
