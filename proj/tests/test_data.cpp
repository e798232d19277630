#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "ugcsr/dataset.hpp"
#include "ugcsr/degrade.hpp"

using namespace ugcsr;
namespace fs = std::filesystem;

namespace {

Image textured_image(int h, int w, int phase) {
    Image im(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                im.at(y, x, c) = 0.5 + 0.35 * std::sin((x * 0.7 + y * 1.3 + phase) / 3.0 + c) +
                                 0.1 * std::cos(x * y * 0.01);
    im.clamp01();
    return im;
}

Image smooth_image(int h, int w, int phase) {
    Image im(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                im.at(y, x, c) =
                    0.5 + 0.4 * std::sin((x + 8.0 * phase) / 17.0) * std::cos(y / 19.0);
    return im;
}

DegradationRecipe identity_recipe() {
    DegradationRecipe r;
    r.blur_sigma_min = r.blur_sigma_max = 0.0;
    r.noise_sigma_min = r.noise_sigma_max = 0.0;
    r.jpeg_quality_min = r.jpeg_quality_max = 95;
    return r;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("ugcsr_test_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("branch mixing is a deterministic 50/50 split") {
    CHECK(mix_branch("img_000", 7) == mix_branch("img_000", 7));

    size_t downsample = 0;
    for (int i = 0; i < 10000; ++i) {
        char id[32];
        std::snprintf(id, sizeof(id), "img_%05d", i);
        MixBranch b = mix_branch(id, 1234);
        if (b == MixBranch::downsample_only) ++downsample;
        // complementary outcomes only
        CHECK((b == MixBranch::downsample_only || b == MixBranch::degrade));
    }
    CHECK(downsample >= 4800);
    CHECK(downsample <= 5200);

    // a different seed reshuffles assignments
    bool any_diff = false;
    for (int i = 0; i < 100 && !any_diff; ++i) {
        char id[32];
        std::snprintf(id, sizeof(id), "img_%05d", i);
        any_diff = mix_branch(id, 1234) != mix_branch(id, 99);
    }
    CHECK(any_diff);
}

TEST_CASE("synthetic degradation: shape, determinism, identity limit") {
    Image hr = textured_image(512, 512, 0);
    DegradationRecipe recipe;  // defaults: 4x downsample plus blur/noise/jpeg
    Image lr = synth_degrade(hr, recipe, 42);
    CHECK(lr.h == 128);
    CHECK(lr.w == 128);
    Image lr2 = synth_degrade(hr, recipe, 42);
    CHECK(max_abs_diff(lr, lr2) == 0.0);
    Image lr3 = synth_degrade(hr, recipe, 43);
    CHECK(max_abs_diff(lr, lr3) > 0.0);

    // no blur, no noise, top jpeg quality: only the 4x resampling remains
    Image small = smooth_image(128, 128, 1);
    Image out = synth_degrade(small, identity_recipe(), 5);
    Image plain = resize_bicubic(small, 32, 32);
    CHECK(max_abs_diff(plain, out) <= 0.02);
}

TEST_CASE("wild degradation stays at native scale") {
    Image hr = textured_image(96, 96, 2);
    DegradationRecipe recipe = wild_default_recipe();
    Image out = wild_degrade(hr, recipe, 11);
    CHECK(out.h == hr.h);
    CHECK(out.w == hr.w);
    CHECK(max_abs_diff(out, wild_degrade(hr, recipe, 11)) == 0.0);

    DegradationRecipe ident = identity_recipe();
    ident.resize_factor = 1.0;
    Image smooth = smooth_image(96, 96, 2);
    Image near = wild_degrade(smooth, ident, 11);
    CHECK(max_abs_diff(smooth, near) <= 0.02);
    for (double v : near.px) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("noise injection hits the requested strength") {
    Image flat(256, 256);
    for (double& v : flat.px) v = 0.5;
    Rng rng(77);
    Image noisy = add_gaussian_noise(flat, 0.1, rng);
    double mean = 0.0;
    for (double v : noisy.px) mean += v;
    mean /= noisy.px.size();
    double var = 0.0;
    for (double v : noisy.px) var += (v - mean) * (v - mean);
    double std = std::sqrt(var / noisy.px.size());
    CHECK(std >= 0.09);
    CHECK(std <= 0.11);
}

TEST_CASE("overlapping crops cover the image") {
    Image hr = textured_image(1024, 1024, 3);
    Image lr = resize_bicubic(hr, 256, 256);
    std::vector<PatchPair> pairs = crop_overlapping_patches(hr, lr, 512, 256);
    REQUIRE(pairs.size() == 9);
    std::set<std::pair<int, int>> offsets;
    for (const auto& p : pairs) {
        offsets.insert({p.hr_row, p.hr_col});
        CHECK(p.hr.h == 512);
        CHECK(p.hr.w == 512);
        CHECK(p.lr.h == 128);
        CHECK(p.lr.w == 128);
        CHECK(p.hr_row % 256 == 0);
        CHECK(p.hr_col % 256 == 0);
    }
    CHECK(offsets.size() == 9);
    CHECK(offsets.count({512, 512}) == 1);

    // cropping commutes with downsampling away from the patch border
    const PatchPair& mid = pairs[4];
    Image direct = resize_bicubic(mid.hr, 128, 128);
    double worst = 0.0;
    for (int y = 4; y < 124; ++y)
        for (int x = 4; x < 124; ++x)
            for (int c = 0; c < 3; ++c)
                worst = std::max(worst, std::abs(direct.at(y, x, c) - mid.lr.at(y, x, c)));
    CHECK(worst <= 1e-6);
}

TEST_CASE("training set assembly") {
    TempDir root("assemble");
    fs::path lsdir = root.path / "lsdir";
    fs::path pairs = root.path / "pairs";
    fs::path ugc_hr = root.path / "ugc_hr";
    fs::create_directories(lsdir);
    fs::create_directories(pairs / "HR");
    fs::create_directories(pairs / "LR");
    fs::create_directories(ugc_hr);

    for (int i = 0; i < 3; ++i)
        save_png(textured_image(32, 32, i), (lsdir / ("a" + std::to_string(i) + ".png")).string());
    for (int i = 0; i < 2; ++i) {
        Image hr = textured_image(32, 32, 10 + i);
        save_png(hr, (pairs / "HR" / ("p" + std::to_string(i) + ".png")).string());
        save_png(resize_bicubic(hr, 8, 8), (pairs / "LR" / ("p" + std::to_string(i) + ".png")).string());
    }
    save_png(textured_image(32, 32, 20), (ugc_hr / "w0.png").string());

    DatasetConfig cfg;
    cfg.patch = 16;
    cfg.stride = 8;
    cfg.global_seed = 3;

    fs::path out1 = root.path / "out1";
    DatasetManifest m = assemble_training_set(lsdir.string(), pairs.string(), ugc_hr.string(),
                                              cfg, out1.string());
    CHECK(m.component_counts.size() == 3);
    size_t total = 0;
    for (const auto& [name, count] : m.component_counts) {
        CHECK(count > 0);
        total += count;
    }
    CHECK(total == m.records.size());
    CHECK(m.global_seed == 3);

    // every record is loadable and consistently sized
    for (const PatchRecord& r : m.records) {
        Image hr = load_image((out1 / r.hr_path).string());
        Image lr = load_image((out1 / r.lr_path).string());
        CHECK(hr.h == r.patch);
        CHECK((lr.h == r.patch / 4 || lr.h == r.patch));
    }

    // a second build is byte-identical, manifest included
    fs::path out2 = root.path / "out2";
    assemble_training_set(lsdir.string(), pairs.string(), ugc_hr.string(), cfg, out2.string());
    CHECK(read_file(out1 / "manifest.jsonl") == read_file(out2 / "manifest.jsonl"));
    for (const PatchRecord& r : m.records)
        CHECK(read_file(out1 / r.hr_path) == read_file(out2 / r.hr_path));

    // manifest round trip
    DatasetManifest re = load_manifest((out1 / "manifest.jsonl").string());
    CHECK(re.records.size() == m.records.size());
    CHECK(re.component_counts == m.component_counts);

    // an empty wild-HR corpus just drops that component
    fs::path empty = root.path / "empty";
    fs::create_directories(empty);
    fs::path out3 = root.path / "out3";
    DatasetManifest m3 = assemble_training_set(lsdir.string(), pairs.string(), empty.string(),
                                               cfg, out3.string());
    CHECK(m3.component_counts[to_string(PatchBranch::wild_degraded)] == 0);

    // an unreadable file is skipped, not fatal
    std::ofstream bad(lsdir / "broken.png");
    bad << "not a png";
    bad.close();
    fs::path out4 = root.path / "out4";
    DatasetManifest m4 = assemble_training_set(lsdir.string(), pairs.string(), ugc_hr.string(),
                                               cfg, out4.string());
    CHECK(m4.records.size() == m.records.size());
}
