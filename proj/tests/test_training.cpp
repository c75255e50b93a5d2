#include <cmath>
#include <fstream>
#include <set>

#include "doctest.h"
#include "support.hpp"
#include "xopgan/data/manifest.hpp"
#include "xopgan/data/synth.hpp"
#include "xopgan/numerics/errors.hpp"
#include "xopgan/training/checkpoint.hpp"
#include "xopgan/training/config.hpp"
#include "xopgan/training/losses.hpp"
#include "xopgan/training/trainer.hpp"

using namespace xopgan;
using xopgan::testing::random_tensor;
using xopgan::testing::TempDir;

namespace {

TrainConfig tiny_config(std::size_t iterations) {
    TrainConfig cfg;
    cfg.seed = 21;
    cfg.max_iterations = iterations;
    cfg.lr = 1e-4;
    cfg.lambda_rec = 10.0;
    cfg.generator.encoder_channels = {4, 4, 6, 6, 6};
    cfg.discriminator.channels = {4, 4, 6, 6, 6};
    cfg.discriminator.dense_hidden = 8;
    return cfg;
}

/// Zeroes every parameter so the sigmoid head sees a constant logit.
void make_constant(DiscriminatorNet& od, double score) {
    od.visit([](const std::string&, Tensor& v, Tensor&) { v.fill(0.0); });
    od.visit([&](const std::string& name, Tensor& v, Tensor&) {
        if (name == "dense2.bias") v.fill(std::log(score / (1.0 - score)));
    });
}

template <typename Net>
bool grads_all_zero(Net& net) {
    bool zero = true;
    net.visit([&](const std::string&, Tensor&, Tensor& g) {
        for (double v : g.values()) zero = zero && v == 0.0;
    });
    return zero;
}

template <typename Net>
std::vector<Tensor> params(Net& net) {
    std::vector<Tensor> out;
    net.visit([&](const std::string&, Tensor& v, Tensor&) { out.push_back(v); });
    return out;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

std::vector<nlohmann::json> read_log(const std::filesystem::path& p) {
    std::vector<nlohmann::json> lines;
    std::ifstream f(p);
    for (std::string line; std::getline(f, line);) lines.push_back(nlohmann::json::parse(line));
    return lines;
}

DatasetManifest tiny_dataset(const std::filesystem::path& dir, std::size_t count) {
    SynthOptions opt;
    opt.count = count;
    opt.seed = 4;
    opt.test_fraction = 0.0;
    return partition_by_psnr(synth_dataset(opt, dir).train).manifest;
}

}  // namespace

TEST_SUITE("labels") {
    TEST_CASE("zero epsilon is exact") {
        RngStream rng(1, "labels");
        CHECK(sample_smoothed_label(LabelKind::Fake, 0.0, rng) == 0.0);
        CHECK(sample_smoothed_label(LabelKind::Real, 0.0, rng) == 0.9);
    }

    TEST_CASE("smoothed ranges and fake mean") {
        RngStream rng(2, "labels");
        double fake_sum = 0.0;
        for (int i = 0; i < 10000; ++i) {
            const double f = sample_smoothed_label(LabelKind::Fake, 0.05, rng);
            const double r = sample_smoothed_label(LabelKind::Real, 0.05, rng);
            CHECK((f >= 0.0 && f <= 0.1));
            CHECK((r >= 0.85 && r <= 0.95));
            fake_sum += f;
        }
        CHECK(std::abs(fake_sum / 10000.0 - 0.05) <= 0.005);
    }

    TEST_CASE("deterministic given the stream and rejects negative epsilon") {
        RngStream a(3, "labels"), b(3, "labels");
        for (int i = 0; i < 10; ++i)
            CHECK(sample_smoothed_label(LabelKind::Real, 0.1, a) == sample_smoothed_label(LabelKind::Real, 0.1, b));
        CHECK_THROWS_AS(sample_smoothed_label(LabelKind::Fake, -0.1, a), ConfigError);
    }
}

TEST_SUITE("losses") {
    const auto cfg = tiny_config(0);

    TEST_CASE("constant 0.5 discriminator with exact labels") {
        DiscriminatorNet od(cfg.discriminator, RngStream(1, "od"));
        make_constant(od, 0.5);
        const GeneratorNet g(cfg.generator, RngStream(1, "og"));
        const GeneratorNet* gens[] = {&g, &g, &g};
        RngStream rng(5, "x"), labels(5, "labels");
        const Tensor x = random_tensor({3, 32, 32}, rng), gt = random_tensor({3, 32, 32}, rng);
        const auto l = discriminator_loss(od, gens, x, gt, 0.0, labels);
        REQUIRE(l.fake_terms.size() == 3);
        for (double t : l.fake_terms) CHECK(t == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(l.real_term == doctest::Approx(0.16).epsilon(1e-12));
        CHECK(l.total == doctest::Approx(0.91).epsilon(1e-12));
    }

    TEST_CASE("discriminator loss sums squared label errors") {
        DiscriminatorNet od(cfg.discriminator, RngStream(2, "od"));
        const GeneratorNet g(cfg.generator, RngStream(2, "og"));
        const GeneratorNet* gens[] = {&g};
        RngStream rng(6, "x"), labels(6, "labels");
        const Tensor x = random_tensor({3, 32, 32}, rng), gt = random_tensor({3, 32, 32}, rng);
        const auto l = discriminator_loss(od, gens, x, gt, 0.05, labels);
        const double f = l.fake_scores[0] - l.fake_labels[0], r = l.real_score - l.real_label;
        CHECK(l.total == doctest::Approx(f * f + r * r).epsilon(1e-14));
        CHECK(std::abs(l.real_score - l.real_label) < 1.0);
    }

    TEST_CASE("missing generator is a configuration error") {
        DiscriminatorNet od(cfg.discriminator, RngStream(1, "od"));
        RngStream labels(1, "labels");
        const GeneratorNet* gens[] = {nullptr};
        CHECK_THROWS_AS(discriminator_loss(od, gens, Tensor({3, 32, 32}), Tensor({3, 32, 32}), 0.0, labels),
                        ConfigError);
        CHECK_THROWS_AS(discriminator_loss(od, {}, Tensor({3, 32, 32}), Tensor({3, 32, 32}), 0.0, labels),
                        ConfigError);
    }

    TEST_CASE("generator loss examples") {
        DiscriminatorNet od(cfg.discriminator, RngStream(3, "od"));
        GeneratorNet g(cfg.generator, RngStream(3, "og"));
        RngStream rng(7, "x");
        const Tensor x = random_tensor({3, 32, 32}, rng), gt = random_tensor({3, 32, 32}, rng);

        make_constant(od, 0.4);
        CHECK(generator_loss(g, od, x, gt, 0.0).total == doctest::Approx(0.25).epsilon(1e-12));

        make_constant(od, 0.9);
        CHECK(std::abs(generator_loss(g, od, x, gt, 0.0).total) < 1e-24);
        CHECK(std::abs(generator_loss(g, od, x, g.forward(x), 1.0).total) < 1e-24);
        CHECK(generator_loss(g, od, x, g.forward(x), 1.0).reconstruction == 0.0);
    }

    TEST_CASE("gradient isolation between the two losses") {
        DiscriminatorNet od(cfg.discriminator, RngStream(4, "od"));
        GeneratorNet g(cfg.generator, RngStream(4, "og"));
        RngStream rng(8, "x"), labels(8, "labels");
        const Tensor x = random_tensor({3, 32, 32}, rng), gt = random_tensor({3, 32, 32}, rng);

        g.zero_grad();
        od.zero_grad();
        const auto g_before = params(g);
        const GeneratorNet* gens[] = {&g};
        discriminator_loss(od, gens, x, gt, 0.05, labels);
        CHECK(grads_all_zero(g));
        CHECK_FALSE(grads_all_zero(od));
        CHECK(params(g) == g_before);

        g.zero_grad();
        od.zero_grad();
        const auto od_before = params(od);
        generator_loss(g, od, x, gt, 1.0);
        CHECK(grads_all_zero(od));
        CHECK_FALSE(grads_all_zero(g));
        CHECK(params(od) == od_before);
    }
}

TEST_SUITE("optimizer") {
    TEST_CASE("one state per parameter tensor and mismatch detection") {
        const auto cfg = tiny_config(0);
        GeneratorNet g(cfg.generator, RngStream(1, "og"));
        DiscriminatorNet od(cfg.discriminator, RngStream(1, "od"));
        Optimizer opt(1e-3);
        g.zero_grad();
        opt.step(g);
        std::size_t n = 0;
        g.visit([&](const std::string&, Tensor&, Tensor&) { ++n; });
        CHECK(opt.states().size() == n);
        od.zero_grad();
        CHECK_THROWS_AS(opt.step(od), DimensionError);
    }
}

TEST_SUITE("checkpoint") {
    const auto cfg = tiny_config(0);

    TEST_CASE("round trip reproduces forward outputs bit-exactly") {
        TempDir dir("ckpt");
        GeneratorNet g(cfg.generator, RngStream(1, "og"));
        DiscriminatorNet od(cfg.discriminator, RngStream(1, "od"));
        Optimizer gopt(1e-4), dopt(1e-4);
        g.zero_grad();
        gopt.step(g);
        save_checkpoint(g, gopt, {7, 21}, dir / "g.ckpt");
        save_checkpoint(od, dopt, {7, 21}, dir / "d.ckpt");

        RngStream rng(2, "probe");
        const Tensor x = random_tensor({3, 32, 32}, rng);
        const auto lg = load_generator_checkpoint(dir / "g.ckpt", cfg.generator, 1e-4);
        const auto ld = load_discriminator_checkpoint(dir / "d.ckpt", cfg.discriminator, 1e-4);
        CHECK(lg.net.forward(x) == g.forward(x));
        CHECK(ld.net.forward(x) == od.forward(x));
        CHECK(lg.meta.iteration == 7);
        CHECK(lg.meta.seed == 21);
        REQUIRE(lg.optimizer.states().size() == gopt.states().size());
        CHECK(lg.optimizer.states()[0].m == gopt.states()[0].m);
        CHECK(lg.optimizer.states()[0].t == 1);

        save_checkpoint(lg.net, lg.optimizer, lg.meta, dir / "g2.ckpt");
        CHECK(slurp(dir / "g.ckpt") == slurp(dir / "g2.ckpt"));
    }

    TEST_CASE("corrupt, truncated and mismatched files are rejected") {
        TempDir dir("ckpt");
        const GeneratorNet g(cfg.generator, RngStream(1, "og"));
        save_checkpoint(g, Optimizer(), {}, dir / "g.ckpt");
        const std::string bytes = slurp(dir / "g.ckpt");
        auto kind_of = [&](const std::string& content, const GeneratorConfig& expected) {
            std::ofstream(dir / "bad.ckpt", std::ios::binary) << content;
            try {
                load_generator_checkpoint(dir / "bad.ckpt", expected);
            } catch (const CheckpointError& e) {
                return e.kind();
            }
            FAIL("checkpoint was accepted");
            return CheckpointError::Kind::Malformed;
        };
        using K = CheckpointError::Kind;
        CHECK(kind_of(bytes.substr(0, bytes.size() - 9), cfg.generator) == K::Truncation);
        CHECK(kind_of(bytes.substr(0, 6), cfg.generator) == K::Truncation);
        std::string magic = bytes;
        magic[0] = 'Z';
        CHECK(kind_of(magic, cfg.generator) == K::CorruptMagic);
        GeneratorConfig other = cfg.generator;
        other.encoder_channels[0] = 5;
        CHECK(kind_of(bytes, other) == K::DigestMismatch);

        const DiscriminatorNet od(cfg.discriminator, RngStream(1, "od"));
        save_checkpoint(od, Optimizer(), {}, dir / "d.ckpt");
        try {
            load_generator_checkpoint(dir / "d.ckpt");
            FAIL("discriminator file loaded as generator");
        } catch (const CheckpointError& e) {
            CHECK(e.kind() == K::KindMismatch);
        }
    }
}

TEST_SUITE("trainer") {
    TEST_CASE("zero iterations keep initialization and experts equal the base") {
        TempDir data("train_data"), pre("pre"), exp("exp");
        const auto manifest = tiny_dataset(data.path(), 6);
        const auto cfg = tiny_config(0);
        auto base = pretrain(manifest, cfg, pre.path());
        const GeneratorNet init(cfg.generator, RngStream(cfg.seed, "init.generator"));
        RngStream rng(3, "probe");
        const Tensor x = random_tensor({3, 32, 32}, rng);
        CHECK(base.generator.net.forward(x) == init.forward(x));

        const auto experts = train_experts(manifest, base.generator, base.discriminator, cfg, exp.path());
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(experts.experts[i].net.forward(x) == base.generator.net.forward(x));
            auto loaded = load_generator_checkpoint(exp / expert_file(kQualityPartitions[i]), cfg.generator);
            CHECK(loaded.net.forward(x) == base.generator.net.forward(x));
            CHECK(params(loaded.net) == params(base.generator.net));
        }
        CHECK(slurp(exp / kTrainLogFile).empty());
    }

    TEST_CASE("expert log proves exclusivity and full fake coverage") {
        TempDir data("train_data"), pre("pre"), exp("exp");
        const auto manifest = tiny_dataset(data.path(), 9);
        const auto base = pretrain(manifest, tiny_config(0), pre.path());
        const auto res = train_experts(manifest, base.generator, base.discriminator, tiny_config(9), exp.path());
        CHECK(res.discriminator_losses.size() == 9);

        std::map<std::string, Partition> tag_of;
        for (const auto& r : manifest.records) tag_of[r.input] = r.partition;
        const auto lines = read_log(exp / kTrainLogFile);
        REQUIRE(lines.size() == 9);
        for (std::size_t epoch = 0; epoch < 3; ++epoch) {
            std::set<std::pair<std::string, std::string>> combos;
            for (std::size_t it = epoch * 3; it < epoch * 3 + 3; ++it) {
                const auto& line = lines[it];
                CHECK(line.at("iteration").get<std::size_t>() == it);
                for (const auto& u : line.at("generator_updates")) {
                    const auto expert = u.at("expert").get<std::string>();
                    CHECK(u.at("partition").get<std::string>() == expert);
                    CHECK(std::string(to_string(tag_of.at(u.at("input").get<std::string>()))) == expert);
                }
                CHECK(line.at("discriminator_fakes").size() == 3);
                for (const auto& f : line.at("discriminator_fakes"))
                    combos.insert({f.at("generator").get<std::string>(), f.at("partition").get<std::string>()});
            }
            CHECK(combos.size() == 9);
        }
    }

    TEST_CASE("empty partition and architecture mismatch are configuration errors") {
        TempDir data("train_data"), pre("pre"), exp("exp");
        auto manifest = tiny_dataset(data.path(), 6);
        const auto base = pretrain(manifest, tiny_config(0), pre.path());
        auto no_hq = manifest;
        std::erase_if(no_hq.records, [](const ImagePair& r) { return r.partition == Partition::HQ; });
        CHECK_THROWS_AS(train_experts(no_hq, base.generator, base.discriminator, tiny_config(1), exp.path()),
                        ConfigError);
        auto other = tiny_config(1);
        other.generator.encoder_channels[4] = 8;
        CHECK_THROWS_AS(train_experts(manifest, base.generator, base.discriminator, other, exp.path()), ConfigError);
    }

    TEST_CASE("pretraining lowers the discriminator loss") {
        TempDir data("train_data"), pre("pre");
        const auto manifest = tiny_dataset(data.path(), 50);
        const auto res = pretrain(manifest, tiny_config(200), pre.path());
        const auto& d = res.discriminator_losses;
        REQUIRE(d.size() == 200);
        auto window_mean = [&](std::size_t lo) {
            double s = 0.0;
            for (std::size_t i = lo; i < lo + 20; ++i) s += d[i];
            return s / 20.0;
        };
        CHECK(window_mean(180) < window_mean(0));
        CHECK(read_log(pre / kTrainLogFile).size() == 200);
    }

    TEST_CASE("config validation") {
        auto cfg = tiny_config(1);
        cfg.batch_size = 2;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg = tiny_config(1);
        cfg.epsilon = 0.5;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg = tiny_config(1);
        CHECK_NOTHROW(nlohmann::json(cfg).get<TrainConfig>().validate());
        CHECK(config_digest(nlohmann::json(cfg).get<TrainConfig>().generator) == config_digest(cfg.generator));
    }
}
