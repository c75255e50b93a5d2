#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "xopgan/data/image.hpp"
#include "xopgan/data/manifest.hpp"
#include "xopgan/data/metrics.hpp"
#include "xopgan/data/synth.hpp"
#include "xopgan/inference/evaluate.hpp"
#include "xopgan/inference/select.hpp"
#include "xopgan/layers/verify.hpp"
#include "xopgan/numerics/errors.hpp"
#include "xopgan/numerics/ops.hpp"
#include "xopgan/training/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace xopgan;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr double kGradTolerance = 1e-4;
constexpr const char* kPartitionReportFile = "partition_report.json";
constexpr const char* kPartitionedManifestFile = "partitioned.jsonl";

void write_json(const ordered_json& j, const fs::path& path) {
    fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    f << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void require_file(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw IoError("missing file " + path.string());
}

std::string fmt_db(double v) {
    if (std::isinf(v)) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

// Flags shared by pretrain and train; unset flags leave the config file value.
struct TrainFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> iterations;
    std::optional<double> lr;
    std::optional<double> epsilon;
    std::optional<double> lambda_rec;

    void attach(CLI::App& app) {
        app.add_option("--config", config, "JSON training config")->check(CLI::ExistingFile);
        app.add_option("--seed", seed, "Seed for every random stream")->required();
        app.add_option("--iterations", iterations, "Training iterations (image draws)");
        app.add_option("--lr", lr, "Adam learning rate");
        app.add_option("--epsilon", epsilon, "Label smoothing half-width");
        app.add_option("--lambda-rec", lambda_rec, "Weight of the L1 reconstruction term");
    }

    TrainConfig resolve() const {
        TrainConfig cfg;
        if (!config.empty()) cfg = read_json(config).get<TrainConfig>();
        cfg.seed = *seed;
        if (iterations) cfg.max_iterations = *iterations;
        if (lr) cfg.lr = *lr;
        if (epsilon) cfg.epsilon = *epsilon;
        if (lambda_rec) cfg.lambda_rec = *lambda_rec;
        cfg.validate();
        return cfg;
    }
};

struct ExpertSet {
    std::array<GeneratorCheckpoint, 3> experts;
    DiscriminatorCheckpoint od;
};

ExpertSet load_experts(const fs::path& dir) {
    for (auto p : kQualityPartitions) require_file(dir / expert_file(p));
    require_file(dir / kDiscriminatorFile);
    auto lq = load_generator_checkpoint(dir / expert_file(Partition::LQ));
    auto mq = load_generator_checkpoint(dir / expert_file(Partition::MQ), lq.net.config());
    auto hq = load_generator_checkpoint(dir / expert_file(Partition::HQ), lq.net.config());
    return {{std::move(lq), std::move(mq), std::move(hq)}, load_discriminator_checkpoint(dir / kDiscriminatorFile)};
}

int run_synth(std::uint64_t seed, const SynthOptions& base, const fs::path& out) {
    SynthOptions opt = base;
    opt.seed = seed;
    const auto res = synth_dataset(opt, out);
    ordered_json echo;
    echo["command"] = "synth";
    echo["seed"] = seed;
    echo["count"] = opt.count;
    echo["size"] = opt.size;
    echo["test_fraction"] = opt.test_fraction;
    auto bands = ordered_json::array();
    for (const auto& b : opt.bands) bands.push_back({b.lo, b.hi});
    echo["bands"] = bands;
    write_json(echo, out / "run_config.json");
    std::cout << "wrote " << res.all.records.size() << " pairs (" << res.train.records.size() << " train, "
              << res.test.records.size() << " test) to " << out.string() << '\n';
    return kExitOk;
}

int run_partition(const fs::path& manifest_path, const std::string& out) {
    const auto res = partition_by_psnr(read_manifest(manifest_path));
    for (const auto& g : res.groups)
        std::cout << to_string(g.tag) << ": " << g.count << " records, " << fmt_db(g.min_psnr) << " - "
                  << fmt_db(g.max_psnr) << " dB\n";
    std::cout << "boundaries: " << fmt_db(res.groups[0].max_psnr) << " " << fmt_db(res.groups[1].max_psnr) << '\n';
    if (!out.empty()) {
        auto tagged = res.manifest;
        fs::create_directories(out);
        // Keep the record paths valid relative to the new file.
        for (auto& r : tagged.records) {
            r.input = fs::relative(tagged.resolve(r.input), fs::absolute(out)).generic_string();
            r.target = fs::relative(tagged.resolve(r.target), fs::absolute(out)).generic_string();
        }
        write_manifest(tagged, fs::path(out) / kPartitionedManifestFile);
        ordered_json report;
        report["manifest"] = fs::absolute(manifest_path).generic_string();
        report["groups"] = groups_to_json(res.groups);
        write_json(report, fs::path(out) / kPartitionReportFile);
    }
    return kExitOk;
}

void echo_run(const std::string& command, const TrainConfig& cfg, ordered_json paths, const fs::path& out) {
    ordered_json echo;
    echo["command"] = command;
    echo["paths"] = std::move(paths);
    echo["train"] = nlohmann::json(cfg);
    write_json(echo, out / "run_config.json");
}

int run_pretrain(const TrainFlags& flags, const fs::path& manifest_path, const fs::path& out) {
    const auto cfg = flags.resolve();
    const auto manifest = read_manifest(manifest_path);
    fs::create_directories(out);
    echo_run("pretrain", cfg, {{"manifest", fs::absolute(manifest_path).generic_string()}}, out);
    const auto res = pretrain(manifest, cfg, out);
    std::cout << "pretrained " << cfg.max_iterations << " iterations";
    if (!res.discriminator_losses.empty())
        std::cout << ", final losses d=" << res.discriminator_losses.back() << " g=" << res.generator_losses.back();
    std::cout << '\n';
    return kExitOk;
}

int run_train(const TrainFlags& flags, const fs::path& manifest_path, const fs::path& base, const fs::path& out) {
    const auto cfg = flags.resolve();
    require_file(base / kBaseGeneratorFile);
    require_file(base / kBaseDiscriminatorFile);
    auto manifest = read_manifest(manifest_path);
    fs::create_directories(out);

    bool tagged = true;
    for (const auto& r : manifest.records) tagged = tagged && r.partition != Partition::Unassigned;
    ordered_json report;
    if (!tagged) {
        auto res = partition_by_psnr(manifest);
        manifest = std::move(res.manifest);
        report["groups"] = groups_to_json(res.groups);
    } else {
        std::vector<PartitionGroup> groups;
        for (auto p : kQualityPartitions) {
            const auto sub = manifest.subset(p);
            PartitionGroup g{p, sub.records.size(), kPsnrInfinity, -kPsnrInfinity};
            for (const auto& r : sub.records) {
                g.min_psnr = std::min(g.min_psnr, r.psnr_db);
                g.max_psnr = std::max(g.max_psnr, r.psnr_db);
            }
            groups.push_back(g);
        }
        report["groups"] = groups_to_json(groups);
    }
    report["manifest"] = fs::absolute(manifest_path).generic_string();
    write_json(report, out / kPartitionReportFile);
    echo_run("train", cfg,
             {{"manifest", fs::absolute(manifest_path).generic_string()}, {"base", fs::absolute(base).generic_string()}},
             out);

    const auto gen = load_generator_checkpoint(base / kBaseGeneratorFile, cfg.generator, cfg.lr);
    const auto od = load_discriminator_checkpoint(base / kBaseDiscriminatorFile, cfg.discriminator, cfg.lr);
    const auto res = train_experts(manifest, gen, od, cfg, out);
    std::cout << "trained experts for " << cfg.max_iterations << " iterations";
    if (!res.discriminator_losses.empty()) std::cout << ", final d=" << res.discriminator_losses.back();
    std::cout << '\n';
    return kExitOk;
}

int run_restore(const fs::path& image, const fs::path& ckpt_dir, const std::string& out) {
    const auto ex = load_experts(ckpt_dir);
    const Tensor x = normalize(load_image(image));
    const std::array<const GeneratorNet*, 3> gens{&ex.experts[0].net, &ex.experts[1].net, &ex.experts[2].net};
    const auto sel = restore_select(x, gens, ex.od.net);
    ordered_json j;
    j["image"] = image.generic_string();
    j["scores"] = sel.scores;
    j["chosen_index"] = sel.chosen_index;
    j["chosen_expert"] = std::string(to_string(kQualityPartitions[sel.chosen_index]));
    if (!out.empty()) {
        const auto path = fs::path(out) / (image.stem().string() + "_restored.png");
        save_image(denormalize(sel.outputs[sel.chosen_index]), path);
        j["output"] = path.generic_string();
    }
    std::cout << j.dump(2) << '\n';
    return kExitOk;
}

int run_eval(const fs::path& manifest_path, const fs::path& ckpt_dir, const std::string& base_ckpt,
             const std::string& boundaries, bool grids, const fs::path& out) {
    const auto ex = load_experts(ckpt_dir);
    std::optional<GeneratorCheckpoint> base;
    if (!base_ckpt.empty()) {
        require_file(base_ckpt);
        base = load_generator_checkpoint(base_ckpt, ex.experts[0].net.config());
    }
    auto test = read_manifest(manifest_path);
    fs::path boundary_file = boundaries.empty() ? ckpt_dir / kPartitionReportFile : fs::path(boundaries);
    if (!boundaries.empty()) require_file(boundary_file);
    if (fs::is_regular_file(boundary_file)) {
        const auto groups = groups_from_json(read_json(boundary_file).at("groups"));
        test = assign_by_boundaries(test, groups);
    }

    EvaluateOptions opt;
    if (grids) opt.grid_dir = out / "grids";
    const std::array<const GeneratorNet*, 3> gens{&ex.experts[0].net, &ex.experts[1].net, &ex.experts[2].net};
    const auto report = evaluate(test, gens, ex.od.net, base ? &base->net : nullptr, opt);
    write_json(to_json(report), out / "report.json");
    ordered_json echo;
    echo["command"] = "eval";
    echo["paths"] = {{"manifest", fs::absolute(manifest_path).generic_string()},
                     {"ckpt_dir", fs::absolute(ckpt_dir).generic_string()},
                     {"base_ckpt", base_ckpt},
                     {"boundaries", fs::is_regular_file(boundary_file) ? boundary_file.generic_string() : ""}};
    echo["grids"] = grids;
    write_json(echo, out / "run_config.json");

    const auto& m = report.means;
    std::cout << "images: " << m.count << '\n'
              << "input:    " << fmt_db(m.input) << " dB\n"
              << "LQ:       " << fmt_db(m.experts[0]) << " dB\n"
              << "MQ:       " << fmt_db(m.experts[1]) << " dB\n"
              << "HQ:       " << fmt_db(m.experts[2]) << " dB\n"
              << "selected: " << fmt_db(m.selected) << " dB\n"
              << "oracle:   " << fmt_db(m.oracle) << " dB\n";
    if (m.base) std::cout << "base:     " << fmt_db(*m.base) << " dB\n";
    std::cout << "agreement: " << m.agreement_rate << '\n';
    return kExitOk;
}

int run_gradcheck(std::uint64_t seed, std::size_t probes) {
    double worst = 0.0;
    for (const auto& c : gradcheck_suite(seed, probes)) {
        std::printf("%-14s max_rel_error %.3e over %zu probes (worst %s)\n", c.name.c_str(), c.report.max_rel_error,
                    c.report.probes, c.report.worst.c_str());
        worst = std::max(worst, c.report.max_rel_error);
    }
    std::printf("max relative error %.3e (tolerance %.0e)\n", worst, kGradTolerance);
    return worst < kGradTolerance ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"xOp-GAN: expert operational GANs for image restoration"};
    app.require_subcommand(1);
    std::size_t threads = 1;
    app.add_option("--threads", threads, "Worker threads (results do not depend on it)")
        ->check(CLI::PositiveNumber);

    auto* synth = app.add_subcommand("synth", "Generate a synthetic degraded/clean dataset");
    std::uint64_t synth_seed = 0;
    SynthOptions synth_opt;
    std::string synth_out;
    synth->add_option("--seed", synth_seed, "Dataset seed")->required();
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--count", synth_opt.count, "Number of pairs")->check(CLI::PositiveNumber);
    synth->add_option("--size", synth_opt.size, "Image side, multiple of 32")->check(CLI::PositiveNumber);
    synth->add_option("--test-fraction", synth_opt.test_fraction, "Held-out fraction")->check(CLI::Range(0.0, 1.0));

    auto* part = app.add_subcommand("partition", "Split a manifest into PSNR terciles");
    std::string part_manifest, part_out;
    part->add_option("--manifest", part_manifest, "Input manifest")->required()->check(CLI::ExistingFile);
    part->add_option("--out", part_out, "Directory for the tagged manifest and boundary report");

    auto* pre = app.add_subcommand("pretrain", "Train the base Op-GAN on the full training set");
    TrainFlags pre_flags;
    std::string pre_manifest, pre_out;
    pre_flags.attach(*pre);
    pre->add_option("--manifest", pre_manifest, "Training manifest")->required()->check(CLI::ExistingFile);
    pre->add_option("--out", pre_out, "Output directory")->required();

    auto* train = app.add_subcommand("train", "Specialize three experts from the base checkpoints");
    TrainFlags train_flags;
    std::string train_manifest, train_base, train_out;
    train_flags.attach(*train);
    train->add_option("--manifest", train_manifest, "Training manifest, tagged or not")
        ->required()
        ->check(CLI::ExistingFile);
    train->add_option("--base", train_base, "Directory holding the pretrained checkpoints")->required();
    train->add_option("--out", train_out, "Output directory")->required();

    auto* restore = app.add_subcommand("restore", "Restore one image with discriminator selection");
    std::string restore_image, restore_ckpt, restore_out;
    restore->add_option("--image", restore_image, "Degraded PNG")->required();
    restore->add_option("--ckpt-dir", restore_ckpt, "Directory holding expert and discriminator checkpoints")
        ->required();
    restore->add_option("--out", restore_out, "Directory for the restored PNG");

    auto* eval = app.add_subcommand("eval", "Evaluate selection strategies on a test manifest");
    std::string eval_manifest, eval_ckpt, eval_base, eval_bounds, eval_out;
    bool eval_grids = false;
    eval->add_option("--manifest", eval_manifest, "Test manifest")->required()->check(CLI::ExistingFile);
    eval->add_option("--ckpt-dir", eval_ckpt, "Directory holding expert and discriminator checkpoints")->required();
    eval->add_option("--base-ckpt", eval_base, "Pretrained generator checkpoint to report alongside");
    eval->add_option("--boundaries", eval_bounds, "Partition report used to tag test records");
    eval->add_flag("--grids", eval_grids, "Write a comparison grid per image");
    eval->add_option("--out", eval_out, "Output directory")->required();

    auto* grad = app.add_subcommand("gradcheck", "Finite-difference verification of all gradients");
    std::uint64_t grad_seed = 7;
    std::size_t grad_probes = 4;
    grad->add_option("--seed", grad_seed, "Seed for inputs and weights");
    grad->add_option("--probes", grad_probes, "Sampled elements per tensor for the full networks")
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        set_num_threads(threads);
        if (*synth) return run_synth(synth_seed, synth_opt, synth_out);
        if (*part) return run_partition(part_manifest, part_out);
        if (*pre) return run_pretrain(pre_flags, pre_manifest, pre_out);
        if (*train) return run_train(train_flags, train_manifest, train_base, train_out);
        if (*restore) return run_restore(restore_image, restore_ckpt, restore_out);
        if (*eval) return run_eval(eval_manifest, eval_ckpt, eval_base, eval_bounds, eval_grids, eval_out);
        if (*grad) return run_gradcheck(grad_seed, grad_probes);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}
