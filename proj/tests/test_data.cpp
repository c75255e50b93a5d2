#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "doctest.h"
#include "support.hpp"
#include "xopgan/data/degrade.hpp"
#include "xopgan/data/image.hpp"
#include "xopgan/data/manifest.hpp"
#include "xopgan/data/metrics.hpp"
#include "xopgan/data/synth.hpp"
#include "xopgan/numerics/errors.hpp"

using namespace xopgan;
using xopgan::testing::random_image;
using xopgan::testing::TempDir;

namespace {

void write_raw_png(const std::filesystem::path& path, int color_type, int bit_depth, std::size_t w, std::size_t h) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    REQUIRE(fp);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bit_depth, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
    std::vector<png_byte> row(w * channels * static_cast<std::size_t>(bit_depth / 8), 0x80);
    for (std::size_t y = 0; y < h; ++y) png_write_row(png, row.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

std::string error_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const IoError& e) {
        return e.what();
    }
    return {};
}

DatasetManifest manifest_with(const std::vector<double>& psnrs) {
    DatasetManifest m;
    for (std::size_t i = 0; i < psnrs.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "r%04zu.png", i);
        m.records.push_back({std::string("in/") + name, std::string("gt/") + name, psnrs[i], Partition::Unassigned});
    }
    return m;
}

Tensor tensor_with_mse(double mse) {
    Tensor a({3, 4, 4}, 100.0), b = a;
    for (auto& v : b.values()) v += std::sqrt(mse);
    return b;
}

}  // namespace

TEST_SUITE("image io") {
    TEST_CASE("save then load a ramp") {
        TempDir dir("img");
        Tensor img({3, 4, 4});
        for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i * 5);
        save_image(img, dir / "ramp.png");
        CHECK(load_image(dir / "ramp.png") == img);
    }

    TEST_CASE("grayscale is rejected as non-RGB") {
        TempDir dir("img");
        write_raw_png(dir / "gray.png", PNG_COLOR_TYPE_GRAY, 8, 4, 4);
        CHECK(error_of([&] { load_image(dir / "gray.png"); }).find("non-RGB") != std::string::npos);
    }

    TEST_CASE("16-bit is rejected") {
        TempDir dir("img");
        write_raw_png(dir / "deep.png", PNG_COLOR_TYPE_RGB, 16, 4, 4);
        CHECK(error_of([&] { load_image(dir / "deep.png"); }).find("unsupported bit depth") != std::string::npos);
    }

    TEST_CASE("missing and malformed files are I/O errors") {
        TempDir dir("img");
        CHECK_THROWS_AS(load_image(dir / "absent.png"), IoError);
        std::ofstream(dir / "junk.png") << "not a png";
        CHECK_THROWS_AS(load_image(dir / "junk.png"), IoError);
    }

    TEST_CASE("save rejects non-image shapes") {
        TempDir dir("img");
        CHECK_THROWS_AS(save_image(Tensor({1, 4, 4}), dir / "x.png"), DimensionError);
    }
}

TEST_SUITE("normalize") {
    TEST_CASE("endpoints") {
        const Tensor n = normalize(Tensor({3}, std::vector<double>{0.0, 255.0, 127.5}));
        CHECK(n[0] == -1.0);
        CHECK(n[1] == 1.0);
        CHECK(n[2] == 0.0);
    }

    TEST_CASE("denormalize clamps") {
        const Tensor d = denormalize(Tensor({2}, std::vector<double>{1.2, -3.0}));
        CHECK(d[0] == 255.0);
        CHECK(d[1] == 0.0);
    }

    TEST_CASE("round trip is exact on integer images") {
        RngStream rng(1, "rt");
        for (int i = 0; i < 5; ++i) {
            const Tensor img = random_image(16, rng);
            CHECK(denormalize(normalize(img)) == img);
        }
    }
}

TEST_SUITE("psnr") {
    TEST_CASE("identical images give the infinity sentinel") {
        const Tensor a({3, 4, 4}, 7.0);
        CHECK(std::isinf(psnr(a, a)));
        CHECK(psnr_capped(psnr(a, a)) == kPsnrCapDb);
    }

    TEST_CASE("closed forms") {
        const Tensor a({3, 4, 4}, 100.0);
        CHECK(std::abs(psnr(a, tensor_with_mse(1.0)) - 48.1308) < 1e-3);
        CHECK(psnr(a, tensor_with_mse(1.0)) == doctest::Approx(20.0 * std::log10(255.0)).epsilon(1e-12));
        const Tensor black({3, 2, 2}, 0.0), white({3, 2, 2}, 255.0);
        CHECK(std::abs(psnr(black, white)) < 1e-12);
    }

    TEST_CASE("symmetric") {
        RngStream rng(2, "sym");
        for (int i = 0; i < 10; ++i) {
            const Tensor a = random_image(8, rng), b = random_image(8, rng);
            CHECK(psnr(a, b) == psnr(b, a));
        }
    }

    TEST_CASE("shape mismatch is a dimension error") {
        CHECK_THROWS_AS(psnr(Tensor({3, 2, 2}), Tensor({3, 2, 3})), DimensionError);
    }

    TEST_CASE("mean caps infinity and rejects empty sets") {
        const double v[] = {10.0, 20.0};
        CHECK(mean_psnr(v) == 15.0);
        const double w[] = {kPsnrInfinity, 40.0};
        CHECK(mean_psnr(w) == 50.0);
        CHECK_THROWS_AS(mean_psnr(std::span<const double>{}), ValueError);
    }
}

TEST_SUITE("degrade") {
    TEST_CASE("zero severity is the identity") {
        RngStream rng(3, "deg");
        const Tensor img = random_image(16, rng);
        CHECK(degrade(img, 0.0, 99) == img);
    }

    TEST_CASE("deterministic given image, severity and seed") {
        RngStream rng(4, "deg");
        const Tensor img = random_image(16, rng);
        CHECK(degrade(img, 0.6, 5) == degrade(img, 0.6, 5));
        CHECK_FALSE(degrade(img, 0.6, 5) == degrade(img, 0.6, 6));
    }

    TEST_CASE("output stays integral in [0, 255]") {
        RngStream rng(5, "deg");
        const Tensor out = degrade(random_image(16, rng), 1.0, 1);
        for (double v : out.values()) CHECK((v >= 0.0 && v <= 255.0 && v == std::round(v)));
    }

    TEST_CASE("mean PSNR strictly decreases with severity") {
        std::vector<double> means;
        for (double s : {0.2, 0.5, 0.8}) {
            std::vector<double> vals;
            for (std::uint64_t i = 0; i < 50; ++i) {
                const Tensor img = procedural_image(32, 1000 + i);
                vals.push_back(psnr(degrade(img, s, 7 + i), img));
            }
            means.push_back(mean_psnr(vals));
        }
        CHECK(means[0] > means[1]);
        CHECK(means[1] > means[2]);
    }

    TEST_CASE("invalid severity is rejected") {
        CHECK_THROWS_AS(degrade(Tensor({3, 4, 4}), 1.5, 0), ValueError);
    }
}

TEST_SUITE("synth") {
    TEST_CASE("six records with every file present") {
        TempDir dir("synth");
        SynthOptions opt;
        opt.count = 6;
        opt.seed = 3;
        const auto res = synth_dataset(opt, dir.path());
        CHECK(res.all.records.size() == 6);
        CHECK(res.train.records.size() + res.test.records.size() == 6);
        for (const auto& r : res.all.records) {
            CHECK(std::filesystem::exists(dir / r.input));
            CHECK(std::filesystem::exists(dir / r.target));
        }
        CHECK(std::filesystem::exists(dir / "manifest.jsonl"));
        CHECK(read_manifest(dir / "manifest.jsonl").records == res.all.records);
    }

    TEST_CASE("same seed regenerates the same manifest and pixels") {
        TempDir a("synth"), b("synth");
        SynthOptions opt;
        opt.count = 6;
        opt.seed = 11;
        synth_dataset(opt, a.path());
        synth_dataset(opt, b.path());
        std::ifstream fa(a / "manifest.jsonl"), fb(b / "manifest.jsonl");
        const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
        CHECK(sa == sb);
        const auto m = read_manifest(a / "manifest.jsonl");
        for (const auto& r : m.records) CHECK(load_image(a / r.input) == load_image(b / r.input));
    }

    TEST_CASE("band medians are ordered and stored PSNRs recompute") {
        TempDir dir("synth");
        SynthOptions opt;
        opt.count = 30;
        opt.seed = 5;
        const auto res = synth_dataset(opt, dir.path());
        std::array<std::vector<double>, 3> bands;
        for (std::size_t i = 0; i < res.all.records.size(); ++i) {
            const auto& r = res.all.records[i];
            const double recomputed = psnr(load_image(dir / r.input), load_image(dir / r.target));
            CHECK(std::abs(recomputed - r.psnr_db) < 1e-6);
            for (std::size_t b = 0; b < 3; ++b)
                if (res.severities[i] >= opt.bands[b].lo && res.severities[i] <= opt.bands[b].hi)
                    bands[b].push_back(r.psnr_db);
        }
        std::array<double, 3> med{};
        for (std::size_t b = 0; b < 3; ++b) {
            REQUIRE(bands[b].size() == 10);
            std::sort(bands[b].begin(), bands[b].end());
            med[b] = 0.5 * (bands[b][4] + bands[b][5]);
        }
        CHECK(med[0] > med[1]);
        CHECK(med[1] > med[2]);
    }

    TEST_CASE("invalid options are configuration errors") {
        TempDir dir("synth");
        SynthOptions opt;
        opt.count = 2;
        CHECK_THROWS_AS(synth_dataset(opt, dir.path()), ConfigError);
        opt.count = 6;
        opt.size = 40;
        CHECK_THROWS_AS(synth_dataset(opt, dir.path()), ConfigError);
    }
}

TEST_SUITE("partition") {
    TEST_CASE("sorted terciles of six records") {
        const auto res = partition_by_psnr(manifest_with({20, 10, 25, 15, 12, 17}));
        std::map<double, Partition> tags;
        for (const auto& r : res.manifest.records) tags[r.psnr_db] = r.partition;
        CHECK(tags[10] == Partition::LQ);
        CHECK(tags[12] == Partition::LQ);
        CHECK(tags[15] == Partition::MQ);
        CHECK(tags[17] == Partition::MQ);
        CHECK(tags[20] == Partition::HQ);
        CHECK(tags[25] == Partition::HQ);
        REQUIRE(res.groups.size() == 3);
        CHECK(res.groups[0].max_psnr == 12.0);
        CHECK(res.groups[1].max_psnr == 17.0);
        CHECK(res.groups[2].max_psnr == 25.0);
    }

    TEST_CASE("remainder goes to lower-quality groups first") {
        const auto res = partition_by_psnr(manifest_with({1, 2, 3, 4, 5, 6, 7}));
        CHECK(res.groups[0].count == 3);
        CHECK(res.groups[1].count == 2);
        CHECK(res.groups[2].count == 2);
        CHECK(tercile_sizes(8, 3) == std::vector<std::size_t>{3, 3, 2});
    }

    TEST_CASE("too few records and unsupported k") {
        CHECK_THROWS_AS(partition_by_psnr(manifest_with({1, 2})), ValueError);
        CHECK_THROWS_AS(partition_by_psnr(manifest_with({1, 2, 3, 4}), 4), ConfigError);
    }

    TEST_CASE("property: disjoint cover, monotone boundaries, balanced sizes") {
        RngStream rng(6, "prop");
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t n = 3 + rng.below(60);
            std::vector<double> psnrs(n);
            for (auto& p : psnrs) p = rng.below(4) == 0 ? std::round(rng.uniform(5, 35)) : rng.uniform(5, 35);
            const auto res = partition_by_psnr(manifest_with(psnrs));
            std::array<std::vector<double>, 3> groups;
            std::set<std::string> seen;
            for (const auto& r : res.manifest.records) {
                REQUIRE(r.partition != Partition::Unassigned);
                groups[static_cast<std::size_t>(r.partition)].push_back(r.psnr_db);
                seen.insert(r.input);
            }
            CHECK(seen.size() == n);
            CHECK(groups[0].size() + groups[1].size() + groups[2].size() == n);
            for (std::size_t g = 0; g + 1 < 3; ++g)
                CHECK(*std::max_element(groups[g].begin(), groups[g].end()) <=
                      *std::min_element(groups[g + 1].begin(), groups[g + 1].end()));
            const auto [lo, hi] = std::minmax({groups[0].size(), groups[1].size(), groups[2].size()});
            CHECK(hi - lo <= 1);
        }
    }

    TEST_CASE("boundaries assign held-out records") {
        const auto res = partition_by_psnr(manifest_with({10, 12, 15, 17, 20, 25}));
        const auto tagged = assign_by_boundaries(manifest_with({5, 12, 12.5, 17, 30}), res.groups);
        const std::vector<Partition> expect{Partition::LQ, Partition::LQ, Partition::MQ, Partition::MQ, Partition::HQ};
        for (std::size_t i = 0; i < expect.size(); ++i) CHECK(tagged.records[i].partition == expect[i]);
        CHECK_THROWS_AS(assign_by_boundaries(tagged, std::span(res.groups).first(2)), ConfigError);
    }

    TEST_CASE("group report json round trip") {
        auto res = partition_by_psnr(manifest_with({10, 12, 15, 17, 20, 25}));
        res.groups[2].max_psnr = kPsnrInfinity;
        const auto back = groups_from_json(nlohmann::json::parse(groups_to_json(res.groups).dump()));
        REQUIRE(back.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(back[i].tag == res.groups[i].tag);
            CHECK(back[i].count == res.groups[i].count);
            CHECK(back[i].min_psnr == res.groups[i].min_psnr);
            CHECK(back[i].max_psnr == res.groups[i].max_psnr);
        }
    }
}

TEST_SUITE("manifest") {
    TEST_CASE("jsonl round trip is unchanged") {
        auto m = partition_by_psnr(manifest_with({10.123456789, 12, 15, 17, 20, 25})).manifest;
        m.records[0].psnr_db = kPsnrInfinity;
        const std::string text = to_jsonl(m);
        const auto back = parse_jsonl(text);
        CHECK(back.records == m.records);
        CHECK(to_jsonl(back) == text);
    }

    TEST_CASE("file round trip resolves relative paths") {
        TempDir dir("man");
        const auto m = manifest_with({1, 2, 3});
        write_manifest(m, dir / "m.jsonl");
        const auto back = read_manifest(dir / "m.jsonl");
        CHECK(back.records == m.records);
        CHECK(back.resolve("in/r0000.png") == dir / "in/r0000.png");
    }

    TEST_CASE("malformed input is rejected") {
        CHECK_THROWS_AS(parse_jsonl("{not json}\n"), ValueError);
        CHECK_THROWS_AS(partition_from_string("XQ"), ValueError);
        auto m = manifest_with({1, 2});
        m.records[1].input = m.records[0].input;
        CHECK_THROWS_AS(parse_jsonl(to_jsonl(m)), ValueError);
    }

    TEST_CASE("subset filters by tag") {
        const auto res = partition_by_psnr(manifest_with({1, 2, 3, 4, 5, 6, 7}));
        CHECK(res.manifest.subset(Partition::LQ).records.size() == 3);
        CHECK(res.manifest.subset(Partition::HQ).records.size() == 2);
    }

    TEST_CASE("train/test split is a deterministic partition") {
        std::vector<double> p(40);
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<double>(i);
        const auto m = manifest_with(p);
        const auto [tr, te] = split_train_test(m, 0.1, 9);
        CHECK(te.records.size() == 4);
        CHECK(tr.records.size() == 36);
        const auto [tr2, te2] = split_train_test(m, 0.1, 9);
        CHECK(te2.records == te.records);
        CHECK_THROWS_AS(split_train_test(m, 1.0, 9), ConfigError);
    }
}
