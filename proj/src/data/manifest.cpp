#include "xopgan/data/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "xopgan/data/metrics.hpp"
#include "xopgan/numerics/errors.hpp"
#include "xopgan/numerics/rng.hpp"

namespace xopgan {

std::string_view to_string(Partition p) {
    switch (p) {
        case Partition::LQ: return "LQ";
        case Partition::MQ: return "MQ";
        case Partition::HQ: return "HQ";
        case Partition::Unassigned: return "UNASSIGNED";
    }
    return "UNASSIGNED";
}

Partition partition_from_string(std::string_view s) {
    if (s == "LQ") return Partition::LQ;
    if (s == "MQ") return Partition::MQ;
    if (s == "HQ") return Partition::HQ;
    if (s == "UNASSIGNED") return Partition::Unassigned;
    throw ValueError("unknown partition tag '" + std::string(s) + "'");
}

void DatasetManifest::canonicalize() {
    std::stable_sort(records.begin(), records.end(),
                     [](const ImagePair& a, const ImagePair& b) { return a.input < b.input; });
    for (std::size_t i = 1; i < records.size(); ++i)
        if (records[i].input == records[i - 1].input)
            throw ValueError("duplicate input path in manifest: " + records[i].input);
}

std::filesystem::path DatasetManifest::resolve(const std::string& relative) const {
    const std::filesystem::path p(relative);
    return p.is_absolute() ? p : base_dir / p;
}

DatasetManifest DatasetManifest::subset(Partition p) const {
    DatasetManifest out;
    out.split = split;
    out.seed = seed;
    out.base_dir = base_dir;
    for (const auto& r : records)
        if (r.partition == p) out.records.push_back(r);
    return out;
}

std::string to_jsonl(const DatasetManifest& m) {
    std::string out;
    for (const auto& r : m.records) {
        nlohmann::ordered_json j;
        j["input"] = r.input;
        j["target"] = r.target;
        if (std::isinf(r.psnr_db))
            j["psnr_db"] = "inf";
        else
            j["psnr_db"] = r.psnr_db;
        j["partition"] = std::string(to_string(r.partition));
        out += j.dump();
        out += '\n';
    }
    return out;
}

DatasetManifest parse_jsonl(std::string_view text) {
    DatasetManifest m;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            ImagePair r;
            r.input = j.at("input").get<std::string>();
            r.target = j.at("target").get<std::string>();
            const auto& p = j.at("psnr_db");
            if (p.is_string()) {
                if (p.get<std::string>() != "inf") throw ValueError("psnr_db string must be \"inf\"");
                r.psnr_db = kPsnrInfinity;
            } else {
                r.psnr_db = p.get<double>();
            }
            r.partition = partition_from_string(j.value("partition", std::string("UNASSIGNED")));
            if (!seen.insert(r.input).second) throw ValueError("duplicate input path in manifest: " + r.input);
            m.records.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw ValueError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return m;
}

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << to_jsonl(m);
    if (!out) throw IoError("failed writing manifest " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    auto m = parse_jsonl(buf.str());
    m.base_dir = path.parent_path();
    m.canonicalize();
    return m;
}

std::vector<std::size_t> tercile_sizes(std::size_t n, std::size_t k) {
    if (k == 0) throw ConfigError("partition count must be positive");
    std::vector<std::size_t> sizes(k, n / k);
    for (std::size_t i = 0; i < n % k; ++i) ++sizes[i];
    return sizes;
}

PartitionResult partition_by_psnr(const DatasetManifest& m, std::size_t k) {
    if (k != kQualityPartitions.size())
        throw ConfigError("quality partitioning is defined for k = 3 (LQ/MQ/HQ)");
    if (m.records.size() < k)
        throw ValueError("cannot partition " + std::to_string(m.records.size()) + " records into " +
                         std::to_string(k) + " groups");

    PartitionResult result;
    result.manifest = m;
    result.manifest.canonicalize();
    auto& recs = result.manifest.records;
    for (const auto& r : recs)
        if (std::isnan(r.psnr_db)) throw ValueError("record without PSNR: " + r.input);

    std::vector<std::size_t> order(recs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return recs[a].psnr_db < recs[b].psnr_db; });

    const auto sizes = tercile_sizes(recs.size(), k);
    std::size_t pos = 0;
    for (std::size_t g = 0; g < k; ++g) {
        PartitionGroup group{kQualityPartitions[g], sizes[g], 0.0, 0.0};
        for (std::size_t i = 0; i < sizes[g]; ++i) {
            auto& r = recs[order[pos + i]];
            r.partition = group.tag;
        }
        group.min_psnr = recs[order[pos]].psnr_db;
        group.max_psnr = recs[order[pos + sizes[g] - 1]].psnr_db;
        pos += sizes[g];
        result.groups.push_back(group);
    }
    return result;
}

std::pair<DatasetManifest, DatasetManifest> split_train_test(const DatasetManifest& m, double test_fraction,
                                                             std::uint64_t seed) {
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("test fraction must lie in [0, 1)");
    DatasetManifest sorted = m;
    sorted.canonicalize();
    const std::size_t n = sorted.records.size();
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    RngStream rng(seed, "data.split");
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::vector<bool> is_test(n, false);
    for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;

    DatasetManifest train, test;
    for (auto* d : {&train, &test}) {
        d->seed = sorted.seed;
        d->base_dir = sorted.base_dir;
    }
    train.split = "train";
    test.split = "test";
    for (std::size_t i = 0; i < n; ++i) (is_test[i] ? test : train).records.push_back(sorted.records[i]);
    return {std::move(train), std::move(test)};
}

DatasetManifest assign_by_boundaries(const DatasetManifest& m, std::span<const PartitionGroup> groups) {
    if (groups.size() != 3) throw ConfigError("assign_by_boundaries needs three partition groups");
    DatasetManifest out = m;
    for (auto& r : out.records) {
        if (r.psnr_db <= groups[0].max_psnr)
            r.partition = groups[0].tag;
        else if (r.psnr_db <= groups[1].max_psnr)
            r.partition = groups[1].tag;
        else
            r.partition = groups[2].tag;
    }
    return out;
}

nlohmann::ordered_json groups_to_json(std::span<const PartitionGroup> groups) {
    auto j = nlohmann::ordered_json::array();
    for (const auto& g : groups) {
        nlohmann::ordered_json e;
        e["partition"] = std::string(to_string(g.tag));
        e["count"] = g.count;
        e["min_psnr"] = std::isinf(g.min_psnr) ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(g.min_psnr);
        e["max_psnr"] = std::isinf(g.max_psnr) ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(g.max_psnr);
        j.push_back(std::move(e));
    }
    return j;
}

std::vector<PartitionGroup> groups_from_json(const nlohmann::json& j) {
    auto num = [](const nlohmann::json& v) {
        if (v.is_string()) {
            if (v.get<std::string>() != "inf") throw ValueError("PSNR string must be \"inf\"");
            return kPsnrInfinity;
        }
        return v.get<double>();
    };
    std::vector<PartitionGroup> groups;
    for (const auto& e : j)
        groups.push_back({partition_from_string(e.at("partition").get<std::string>()), e.at("count").get<std::size_t>(),
                          num(e.at("min_psnr")), num(e.at("max_psnr"))});
    return groups;
}

}  // namespace xopgan
