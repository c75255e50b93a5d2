#include "xopgan/training/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "xopgan/data/image.hpp"
#include "xopgan/log.hpp"
#include "xopgan/numerics/errors.hpp"
#include "xopgan/training/losses.hpp"

namespace xopgan {

namespace {

using Clock = std::chrono::steady_clock;

/// Deterministic per-iteration log plus a separate wall-clock log, so the
/// former stays byte-reproducible.
class TrainLog {
public:
    explicit TrainLog(const std::filesystem::path& dir)
        : log_(dir / kTrainLogFile, std::ios::binary | std::ios::trunc),
          timing_(dir / kTimingLogFile, std::ios::binary | std::ios::trunc),
          start_(Clock::now()) {
        if (!log_ || !timing_) throw IoError("cannot write training logs in " + dir.string());
    }

    void write(std::size_t iteration, nlohmann::ordered_json line) {
        log_ << line.dump() << '\n';
        const double wall = std::chrono::duration<double>(Clock::now() - start_).count();
        timing_ << nlohmann::ordered_json{{"iteration", iteration}, {"wall_time_s", wall}}.dump() << '\n';
        log_.flush();
        timing_.flush();
    }

private:
    std::ofstream log_;
    std::ofstream timing_;
    Clock::time_point start_;
};

void require_finite(double v, const char* what, std::size_t iteration, TrainLog& log) {
    if (std::isfinite(v)) return;
    log.write(iteration, {{"iteration", iteration}, {"error", std::string("non-finite ") + what}});
    throw NumericalError(std::string("non-finite ") + what + " at iteration " + std::to_string(iteration));
}

void write_config(const TrainConfig& cfg, const std::filesystem::path& dir) {
    std::ofstream f(dir / "train_config.json", std::ios::binary | std::ios::trunc);
    f << nlohmann::json(cfg).dump(2) << '\n';
}

}  // namespace

std::string expert_file(Partition p) { return "expert_" + std::string(to_string(p)) + ".ckpt"; }

std::vector<TrainingPair> load_pairs(const DatasetManifest& m) {
    std::vector<TrainingPair> pairs;
    pairs.reserve(m.records.size());
    for (const auto& r : m.records)
        pairs.push_back({r.input, normalize(load_image(m.resolve(r.input))), normalize(load_image(m.resolve(r.target))),
                         r.partition});
    return pairs;
}

SampleOrder::SampleOrder(std::size_t n, RngStream rng) : order_(n), rng_(rng) {
    if (n == 0) throw ConfigError("cannot sample from an empty set");
    reshuffle();
}

void SampleOrder::reshuffle() {
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[rng_.below(i)]);
    pos_ = 0;
}

std::size_t SampleOrder::next() {
    if (pos_ == order_.size()) reshuffle();
    return order_[pos_++];
}

PretrainResult pretrain(const DatasetManifest& train, const TrainConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    if (train.records.empty()) throw ConfigError("pretrain: training manifest is empty");
    std::filesystem::create_directories(out_dir);
    write_config(cfg, out_dir);

    const auto pairs = load_pairs(train);
    PretrainResult res{{GeneratorNet(cfg.generator, RngStream(cfg.seed, "init.generator")), Optimizer(cfg.lr), {}},
                       {DiscriminatorNet(cfg.discriminator, RngStream(cfg.seed, "init.discriminator")),
                        Optimizer(cfg.lr), {}},
                       {},
                       {}};
    auto& gen = res.generator.net;
    auto& od = res.discriminator.net;
    SampleOrder order(pairs.size(), RngStream(cfg.seed, "data.order"));
    RngStream labels(cfg.seed, "labels");
    TrainLog log(out_dir);

    const GeneratorNet* gens[] = {&gen};
    for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
        const auto& pair = pairs[order.next()];

        od.zero_grad();
        const auto dl = discriminator_loss(od, gens, pair.input, pair.target, cfg.epsilon, labels);
        require_finite(dl.total, "discriminator loss", it, log);
        res.discriminator.optimizer.step(od);

        gen.zero_grad();
        const auto gl = generator_loss(gen, od, pair.input, pair.target, cfg.lambda_rec);
        require_finite(gl.total, "generator loss", it, log);
        res.generator.optimizer.step(gen);

        res.discriminator_losses.push_back(dl.total);
        res.generator_losses.push_back(gl.total);
        log.write(it, {{"iteration", it},
                       {"partition", std::string(to_string(pair.partition))},
                       {"input", pair.input_path},
                       {"losses",
                        {{"discriminator", dl.total},
                         {"generator", gl.total},
                         {"adversarial", gl.adversarial},
                         {"reconstruction", gl.reconstruction}}}});
        if ((it + 1) % 100 == 0)
            xopgan::log(LogLevel::Info, "pretrain " + std::to_string(it + 1) + "/" + std::to_string(cfg.max_iterations) +
                                            " d=" + std::to_string(dl.total) + " g=" + std::to_string(gl.total));
    }

    res.generator.meta = {cfg.max_iterations, cfg.seed};
    res.discriminator.meta = {cfg.max_iterations, cfg.seed};
    save_checkpoint(gen, res.generator.optimizer, res.generator.meta, out_dir / kBaseGeneratorFile);
    save_checkpoint(od, res.discriminator.optimizer, res.discriminator.meta, out_dir / kBaseDiscriminatorFile);
    return res;
}

ExpertResult train_experts(const DatasetManifest& partitioned_train, const GeneratorCheckpoint& base_generator,
                           const DiscriminatorCheckpoint& base_discriminator, const TrainConfig& cfg,
                           const std::filesystem::path& out_dir) {
    cfg.validate();
    if (config_digest(base_generator.net.config()) != config_digest(cfg.generator))
        throw ConfigError("base generator architecture differs from the training config");
    if (config_digest(base_discriminator.net.config()) != config_digest(cfg.discriminator))
        throw ConfigError("base discriminator architecture differs from the training config");

    std::array<std::vector<TrainingPair>, 3> parts;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto subset = partitioned_train.subset(kQualityPartitions[i]);
        if (subset.records.empty())
            throw ConfigError("partition " + std::string(to_string(kQualityPartitions[i])) + " is empty");
        parts[i] = load_pairs(subset);
    }
    std::filesystem::create_directories(out_dir);
    write_config(cfg, out_dir);

    ExpertResult res{{GeneratorCheckpoint{base_generator.net, Optimizer(cfg.lr), {}},
                      GeneratorCheckpoint{base_generator.net, Optimizer(cfg.lr), {}},
                      GeneratorCheckpoint{base_generator.net, Optimizer(cfg.lr), {}}},
                     {base_discriminator.net, Optimizer(cfg.lr), {}},
                     {}};
    auto& od = res.discriminator.net;
    const RngStream order_root(cfg.seed, "data.order");
    std::array<SampleOrder, 3> orders{SampleOrder(parts[0].size(), order_root.split("LQ")),
                                      SampleOrder(parts[1].size(), order_root.split("MQ")),
                                      SampleOrder(parts[2].size(), order_root.split("HQ"))};
    RngStream labels(cfg.seed, "labels");
    TrainLog log(out_dir);
    const GeneratorNet* gens[] = {&res.experts[0].net, &res.experts[1].net, &res.experts[2].net};

    for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
        std::array<const TrainingPair*, 3> drawn{};
        for (std::size_t i = 0; i < 3; ++i) drawn[i] = &parts[i][orders[i].next()];
        const std::size_t k = it % 3;
        const auto& src = *drawn[k];

        od.zero_grad();
        const auto dl = discriminator_loss(od, gens, src.input, src.target, cfg.epsilon, labels);
        require_finite(dl.total, "discriminator loss", it, log);
        res.discriminator.optimizer.step(od);

        nlohmann::ordered_json fakes = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < 3; ++i)
            fakes.push_back({{"generator", std::string(to_string(kQualityPartitions[i]))},
                             {"partition", std::string(to_string(src.partition))}});

        nlohmann::ordered_json updates = nlohmann::ordered_json::array();
        nlohmann::ordered_json losses;
        losses["discriminator"] = dl.total;
        for (std::size_t i = 0; i < 3; ++i) {
            auto& expert = res.experts[i];
            expert.net.zero_grad();
            const auto gl = generator_loss(expert.net, od, drawn[i]->input, drawn[i]->target, cfg.lambda_rec);
            require_finite(gl.total, "generator loss", it, log);
            expert.optimizer.step(expert.net);
            const std::string tag(to_string(kQualityPartitions[i]));
            updates.push_back({{"expert", tag},
                               {"partition", std::string(to_string(drawn[i]->partition))},
                               {"input", drawn[i]->input_path}});
            losses["generator_" + tag] = gl.total;
        }
        res.discriminator_losses.push_back(dl.total);
        log.write(it, {{"iteration", it},
                       {"partition", std::string(to_string(src.partition))},
                       {"discriminator_input", src.input_path},
                       {"discriminator_fakes", fakes},
                       {"generator_updates", updates},
                       {"losses", losses}});
        if ((it + 1) % 100 == 0)
            xopgan::log(LogLevel::Info, "experts " + std::to_string(it + 1) + "/" + std::to_string(cfg.max_iterations) +
                                            " d=" + std::to_string(dl.total));
    }

    for (std::size_t i = 0; i < 3; ++i) {
        res.experts[i].meta = {cfg.max_iterations, cfg.seed};
        save_checkpoint(res.experts[i].net, res.experts[i].optimizer, res.experts[i].meta,
                        out_dir / expert_file(kQualityPartitions[i]));
    }
    res.discriminator.meta = {cfg.max_iterations, cfg.seed};
    save_checkpoint(od, res.discriminator.optimizer, res.discriminator.meta, out_dir / kDiscriminatorFile);
    return res;
}

}  // namespace xopgan
