#include "xopgan/training/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "json.hpp"
#include "xopgan/numerics/errors.hpp"
#include "xopgan/training/config.hpp"

namespace xopgan {

namespace {

constexpr char kMagic[4] = {'X', 'O', 'P', 'G'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 8;

template <typename T>
void put_le(std::string& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const unsigned char* p) {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
    return v;
}

struct Entry {
    std::string name;
    const Tensor* tensor;
};

template <typename Net>
std::vector<Entry> collect(const Net& net, const Optimizer& opt) {
    std::vector<Entry> entries;
    const_cast<Net&>(net).visit(
        [&](const std::string& name, Tensor& value, Tensor&) { entries.push_back({name, &value}); });
    const auto n_params = entries.size();
    if (!opt.states().empty()) {
        if (opt.states().size() != n_params) throw ConfigError("optimizer state does not match the network");
        for (std::size_t i = 0; i < n_params; ++i) {
            entries.push_back({"adam." + entries[i].name + ".m", &opt.states()[i].m});
            entries.push_back({"adam." + entries[i].name + ".v", &opt.states()[i].v});
        }
    }
    return entries;
}

template <typename Net, typename Config>
void save_impl(const char* kind, const Net& net, const Config& cfg, const Optimizer& opt, const CheckpointMeta& meta,
               const std::filesystem::path& path) {
    const auto entries = collect(net, opt);
    nlohmann::ordered_json dir = nlohmann::ordered_json::array();
    std::uint64_t offset = 0;
    for (const auto& e : entries) {
        nlohmann::ordered_json d;
        d["name"] = e.name;
        d["shape"] = e.tensor->shape();
        d["offset"] = offset;
        d["count"] = e.tensor->size();
        dir.push_back(d);
        offset += e.tensor->size();
    }
    nlohmann::ordered_json adam = nullptr;
    if (!opt.states().empty()) {
        const auto& s = opt.states().front();
        std::vector<std::uint64_t> steps;
        for (const auto& st : opt.states()) steps.push_back(st.t);
        adam = {{"beta1", s.beta1}, {"beta2", s.beta2}, {"eps", s.eps}, {"t", steps}};
    }
    nlohmann::ordered_json metadata;
    metadata["kind"] = kind;
    metadata["config"] = nlohmann::json(cfg);
    metadata["config_digest"] = config_digest(cfg);
    metadata["iteration"] = meta.iteration;
    metadata["seed"] = meta.seed;
    metadata["adam"] = adam;
    metadata["tensors"] = dir;
    const std::string meta_text = metadata.dump();

    std::string out(kMagic, 4);
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint64_t>(out, meta_text.size());
    out += meta_text;
    out.reserve(out.size() + offset * 8);
    for (const auto& e : entries)
        for (double v : e.tensor->values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write checkpoint " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("failed writing checkpoint " + path.string());
}

struct Parsed {
    nlohmann::json meta;
    std::vector<unsigned char> bytes;
    std::size_t blob_start = 0;
};

Parsed parse_file(const std::filesystem::path& path, const char* kind) {
    using K = CheckpointError::Kind;
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint " + path.string());
    Parsed p;
    p.bytes.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    const auto& b = p.bytes;
    const std::string where = " in " + path.string();

    if (b.size() >= 4 && std::memcmp(b.data(), kMagic, 4) != 0) throw CheckpointError(K::CorruptMagic, "corrupt magic" + where);
    if (b.size() < kHeaderBytes) throw CheckpointError(K::Truncation, "truncation: header incomplete" + where);
    const auto version = get_le<std::uint32_t>(b.data() + 4);
    if (version != kCheckpointVersion)
        throw CheckpointError(K::VersionMismatch, "version mismatch: file v" + std::to_string(version) +
                                                      ", expected v" + std::to_string(kCheckpointVersion) + where);
    const auto meta_len = get_le<std::uint64_t>(b.data() + 8);
    if (meta_len > b.size() - kHeaderBytes) throw CheckpointError(K::Truncation, "truncation: metadata incomplete" + where);
    try {
        p.meta = nlohmann::json::parse(b.begin() + kHeaderBytes, b.begin() + kHeaderBytes + static_cast<std::ptrdiff_t>(meta_len));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(K::Malformed, std::string("malformed metadata: ") + e.what() + where);
    }
    p.blob_start = kHeaderBytes + meta_len;

    try {
        if (p.meta.at("kind").get<std::string>() != kind)
            throw CheckpointError(K::KindMismatch, "checkpoint holds a " + p.meta.at("kind").get<std::string>() +
                                                       ", expected a " + kind + where);
        std::uint64_t total = 0;
        for (const auto& d : p.meta.at("tensors")) {
            if (d.at("offset").get<std::uint64_t>() != total)
                throw CheckpointError(K::Malformed, "tensor directory is not contiguous" + where);
            total += d.at("count").get<std::uint64_t>();
        }
        const std::uint64_t have = b.size() - p.blob_start;
        if (have < total * 8)
            throw CheckpointError(K::Truncation, "truncation: " + std::to_string(have) + " blob bytes, expected " +
                                                     std::to_string(total * 8) + where);
        if (have > total * 8) throw CheckpointError(K::Malformed, "trailing bytes after tensor blobs" + where);
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(K::Malformed, std::string("malformed metadata: ") + e.what() + where);
    }
    return p;
}

template <typename Net, typename Config>
void restore(Net& net, Optimizer& opt, CheckpointMeta& meta, const Parsed& p, const std::string& where) {
    using K = CheckpointError::Kind;
    std::map<std::string, const nlohmann::json*> dir;
    for (const auto& d : p.meta.at("tensors")) dir[d.at("name").get<std::string>()] = &d;

    auto fill = [&](const std::string& name, Tensor& t) {
        auto it = dir.find(name);
        if (it == dir.end()) throw CheckpointError(K::Malformed, "missing tensor " + name + where);
        const auto shape = it->second->at("shape").get<Shape>();
        if (shape != t.shape())
            throw CheckpointError(K::Malformed, "tensor " + name + " has shape " + shape_string(shape) + ", expected " +
                                                    shape_string(t.shape()) + where);
        const auto offset = it->second->at("offset").get<std::uint64_t>();
        const unsigned char* src = p.bytes.data() + p.blob_start + offset * 8;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double v = std::bit_cast<double>(get_le<std::uint64_t>(src + 8 * i));
            if (!std::isfinite(v)) throw CheckpointError(K::Malformed, "non-finite value in " + name + where);
            t[i] = v;
        }
    };

    std::vector<std::string> names;
    net.visit([&](const std::string& name, Tensor& value, Tensor&) {
        fill(name, value);
        names.push_back(name);
    });

    const auto& adam = p.meta.at("adam");
    if (!adam.is_null()) {
        const auto steps = adam.at("t").get<std::vector<std::uint64_t>>();
        if (steps.size() != names.size()) throw CheckpointError(K::Malformed, "adam step count mismatch" + where);
        std::size_t i = 0;
        net.visit([&](const std::string& name, Tensor& value, Tensor&) {
            AdamState s = AdamState::fresh(value.shape());
            s.beta1 = adam.at("beta1").get<double>();
            s.beta2 = adam.at("beta2").get<double>();
            s.eps = adam.at("eps").get<double>();
            s.t = steps[i++];
            fill("adam." + name + ".m", s.m);
            fill("adam." + name + ".v", s.v);
            opt.states().push_back(std::move(s));
        });
    }
    meta.iteration = p.meta.at("iteration").get<std::uint64_t>();
    meta.seed = p.meta.at("seed").get<std::uint64_t>();
}

template <typename Config>
Config stored_config(const Parsed& p, const std::string& where) {
    using K = CheckpointError::Kind;
    Config cfg;
    try {
        cfg = p.meta.at("config").get<Config>();
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(K::Malformed, std::string("malformed config: ") + e.what() + where);
    }
    if (config_digest(cfg) != p.meta.at("config_digest").get<std::string>())
        throw CheckpointError(K::DigestMismatch, "digest mismatch: stored config does not hash to stored digest" + where);
    return cfg;
}

template <typename Ckpt, typename Config>
Ckpt load_impl(const std::filesystem::path& path, const char* kind, const Config* expected, double lr) {
    using K = CheckpointError::Kind;
    const auto p = parse_file(path, kind);
    const std::string where = " in " + path.string();
    const Config cfg = stored_config<Config>(p, where);
    if (expected && config_digest(*expected) != config_digest(cfg))
        throw CheckpointError(K::DigestMismatch, "digest mismatch: checkpoint architecture " + config_digest(cfg) +
                                                     " differs from expected " + config_digest(*expected) + where);
    try {
        Ckpt c{decltype(Ckpt::net)(cfg, RngStream(0, "checkpoint")), Optimizer(lr), {}};
        restore<decltype(Ckpt::net), Config>(c.net, c.optimizer, c.meta, p, where);
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(K::Malformed, std::string("malformed metadata: ") + e.what() + where);
    }
}

}  // namespace

CheckpointError::CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

std::string_view to_string(CheckpointError::Kind k) {
    using K = CheckpointError::Kind;
    switch (k) {
        case K::CorruptMagic: return "corrupt magic";
        case K::VersionMismatch: return "version mismatch";
        case K::DigestMismatch: return "digest mismatch";
        case K::Truncation: return "truncation";
        case K::Malformed: return "malformed";
        case K::KindMismatch: return "kind mismatch";
    }
    return "unknown";
}

void save_checkpoint(const GeneratorNet& net, const Optimizer& opt, const CheckpointMeta& meta,
                     const std::filesystem::path& path) {
    save_impl("generator", net, net.config(), opt, meta, path);
}

void save_checkpoint(const DiscriminatorNet& net, const Optimizer& opt, const CheckpointMeta& meta,
                     const std::filesystem::path& path) {
    save_impl("discriminator", net, net.config(), opt, meta, path);
}

GeneratorCheckpoint load_generator_checkpoint(const std::filesystem::path& path, const GeneratorConfig& expected,
                                              double lr) {
    return load_impl<GeneratorCheckpoint>(path, "generator", &expected, lr);
}

DiscriminatorCheckpoint load_discriminator_checkpoint(const std::filesystem::path& path,
                                                      const DiscriminatorConfig& expected, double lr) {
    return load_impl<DiscriminatorCheckpoint>(path, "discriminator", &expected, lr);
}

GeneratorCheckpoint load_generator_checkpoint(const std::filesystem::path& path, double lr) {
    return load_impl<GeneratorCheckpoint, GeneratorConfig>(path, "generator", nullptr, lr);
}

DiscriminatorCheckpoint load_discriminator_checkpoint(const std::filesystem::path& path, double lr) {
    return load_impl<DiscriminatorCheckpoint, DiscriminatorConfig>(path, "discriminator", nullptr, lr);
}

}  // namespace xopgan
