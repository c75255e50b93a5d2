#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "xopgan/layers/networks.hpp"
#include "xopgan/training/optimizer.hpp"

// Binary checkpoint layout (all integers and floats little-endian):
//
//   "XOPG" | u32 version | u64 metadata length | metadata JSON | f64 blobs
//
// The metadata holds the network kind, its architecture config and digest,
// iteration, seed, and a tensor directory {name, shape, offset, count} with
// offsets in elements from the start of the blob section. Blobs follow in
// directory order: every parameter, then each parameter's Adam moments.

namespace xopgan {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    enum class Kind { CorruptMagic, VersionMismatch, DigestMismatch, Truncation, Malformed, KindMismatch };

    CheckpointError(Kind kind, const std::string& what);
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

std::string_view to_string(CheckpointError::Kind k);

struct CheckpointMeta {
    std::uint64_t iteration = 0;
    std::uint64_t seed = 0;
};

struct GeneratorCheckpoint {
    GeneratorNet net;
    Optimizer optimizer;
    CheckpointMeta meta;
};

struct DiscriminatorCheckpoint {
    DiscriminatorNet net;
    Optimizer optimizer;
    CheckpointMeta meta;
};

void save_checkpoint(const GeneratorNet& net, const Optimizer& opt, const CheckpointMeta& meta,
                     const std::filesystem::path& path);
void save_checkpoint(const DiscriminatorNet& net, const Optimizer& opt, const CheckpointMeta& meta,
                     const std::filesystem::path& path);

/// Loads a checkpoint, rejecting it unless its architecture digest equals
/// the digest of `expected`. Nothing is returned on any failure.
GeneratorCheckpoint load_generator_checkpoint(const std::filesystem::path& path, const GeneratorConfig& expected,
                                              double lr = 1e-5);
DiscriminatorCheckpoint load_discriminator_checkpoint(const std::filesystem::path& path,
                                                      const DiscriminatorConfig& expected, double lr = 1e-5);

/// Loads using the architecture stored in the file itself.
GeneratorCheckpoint load_generator_checkpoint(const std::filesystem::path& path, double lr = 1e-5);
DiscriminatorCheckpoint load_discriminator_checkpoint(const std::filesystem::path& path, double lr = 1e-5);

}  // namespace xopgan
