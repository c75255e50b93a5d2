#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "xopgan/data/manifest.hpp"
#include "xopgan/training/checkpoint.hpp"
#include "xopgan/training/config.hpp"

namespace xopgan {

/// Normalized input/target tensors for one manifest record.
struct TrainingPair {
    std::string input_path;
    Tensor input;
    Tensor target;
    Partition partition = Partition::Unassigned;
};

std::vector<TrainingPair> load_pairs(const DatasetManifest& m);

/// Epoch-wise shuffled cycling over [0, n), driven by a dedicated stream.
class SampleOrder {
public:
    SampleOrder(std::size_t n, RngStream rng);
    std::size_t next();

private:
    void reshuffle();
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
    RngStream rng_;
};

// Output file names inside a training directory.
inline constexpr const char* kBaseGeneratorFile = "base_generator.ckpt";
inline constexpr const char* kBaseDiscriminatorFile = "base_discriminator.ckpt";
inline constexpr const char* kDiscriminatorFile = "discriminator.ckpt";
inline constexpr const char* kTrainLogFile = "train_log.jsonl";
inline constexpr const char* kTimingLogFile = "timing.jsonl";
std::string expert_file(Partition p);

struct PretrainResult {
    GeneratorCheckpoint generator;
    DiscriminatorCheckpoint discriminator;
    std::vector<double> discriminator_losses;
    std::vector<double> generator_losses;
};

/// Single Op-GAN over the whole training set: per drawn image one
/// discriminator step, then one generator step. Writes the base checkpoints
/// and the training log into out_dir.
PretrainResult pretrain(const DatasetManifest& train, const TrainConfig& cfg, const std::filesystem::path& out_dir);

struct ExpertResult {
    std::array<GeneratorCheckpoint, 3> experts;  // LQ, MQ, HQ
    DiscriminatorCheckpoint discriminator;
    std::vector<double> discriminator_losses;
};

/// Specializes three copies of the base generator, each on its own quality
/// partition, against one shared discriminator. Iteration t draws one image
/// per partition; the discriminator step uses the draw from partition
/// t mod 3 passed through all three experts, then each expert steps on its
/// own draw.
ExpertResult train_experts(const DatasetManifest& partitioned_train, const GeneratorCheckpoint& base_generator,
                           const DiscriminatorCheckpoint& base_discriminator, const TrainConfig& cfg,
                           const std::filesystem::path& out_dir);

}  // namespace xopgan
