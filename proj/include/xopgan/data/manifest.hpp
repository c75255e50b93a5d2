#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace xopgan {

enum class Partition { LQ, MQ, HQ, Unassigned };

inline constexpr std::array<Partition, 3> kQualityPartitions{Partition::LQ, Partition::MQ, Partition::HQ};

std::string_view to_string(Partition p);
Partition partition_from_string(std::string_view s);

struct ImagePair {
    std::string input;   // degraded image, relative to the manifest directory
    std::string target;  // ground truth
    double psnr_db = 0.0;
    Partition partition = Partition::Unassigned;

    friend bool operator==(const ImagePair&, const ImagePair&) = default;
};

/// Ordered pair records; canonical order is ascending input path.
struct DatasetManifest {
    std::vector<ImagePair> records;
    std::string split = "all";
    std::optional<std::uint64_t> seed;
    /// Directory relative paths are resolved against.
    std::filesystem::path base_dir;

    /// Sorts records by input path; throws ValueError on duplicate inputs.
    void canonicalize();
    std::filesystem::path resolve(const std::string& relative) const;
    /// Records tagged with one partition, in canonical order.
    DatasetManifest subset(Partition p) const;
};

/// One record per line: {"input","target","psnr_db","partition"}. The PSNR
/// infinity sentinel is written as the string "inf".
std::string to_jsonl(const DatasetManifest& m);
DatasetManifest parse_jsonl(std::string_view text);

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);
/// Reads a manifest; base_dir becomes the file's directory.
DatasetManifest read_manifest(const std::filesystem::path& path);

struct PartitionGroup {
    Partition tag = Partition::Unassigned;
    std::size_t count = 0;
    double min_psnr = 0.0;
    double max_psnr = 0.0;  // the reported boundary
};

struct PartitionResult {
    DatasetManifest manifest;  // canonical order, every record tagged
    std::vector<PartitionGroup> groups;
};

/// Group sizes for n sorted records split into k contiguous groups; the
/// remainder goes to the lowest groups first.
std::vector<std::size_t> tercile_sizes(std::size_t n, std::size_t k);

/// Equal-size PSNR partitioning into LQ < MQ < HQ. Ties at a boundary are
/// broken by canonical record order.
PartitionResult partition_by_psnr(const DatasetManifest& m, std::size_t k = 3);

/// Seeded split; the first round(n * test_fraction) records of a shuffle
/// form the test set. Both halves keep canonical order.
std::pair<DatasetManifest, DatasetManifest> split_train_test(const DatasetManifest& m, double test_fraction,
                                                             std::uint64_t seed);

/// Tags records using reported group boundaries (max PSNR per group), for
/// sets such as a test split that were not part of the partitioning.
DatasetManifest assign_by_boundaries(const DatasetManifest& m, std::span<const PartitionGroup> groups);

nlohmann::ordered_json groups_to_json(std::span<const PartitionGroup> groups);
std::vector<PartitionGroup> groups_from_json(const nlohmann::json& j);

}  // namespace xopgan
