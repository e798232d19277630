#include "ugcsr/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace ugcsr {

std::string to_string(PatchBranch b) {
    switch (b) {
        case PatchBranch::downsample_only: return "downsample_only";
        case PatchBranch::degrade: return "degrade";
        case PatchBranch::synthetic_pair: return "synthetic_pair";
        case PatchBranch::wild_degraded: return "wild_degraded";
    }
    throw std::logic_error("bad branch");
}

PatchBranch patch_branch_from_string(const std::string& s) {
    if (s == "downsample_only") return PatchBranch::downsample_only;
    if (s == "degrade") return PatchBranch::degrade;
    if (s == "synthetic_pair") return PatchBranch::synthetic_pair;
    if (s == "wild_degraded") return PatchBranch::wild_degraded;
    throw std::invalid_argument("unknown patch branch: " + s);
}

std::vector<PatchPair> crop_overlapping_patches(const Image& hr, const Image& lr, int patch,
                                                int stride) {
    if (patch % 4 != 0) throw std::invalid_argument("crop: patch must be divisible by 4");
    if (stride < 1) throw std::invalid_argument("crop: stride must be >= 1");
    if (hr.h < patch || hr.w < patch) throw std::invalid_argument("crop: hr smaller than patch");
    bool quarter = (lr.h * 4 == hr.h && lr.w * 4 == hr.w);
    bool same = (lr.h == hr.h && lr.w == hr.w);
    if (!quarter && !same) throw std::invalid_argument("crop: misaligned hr/lr sizes");
    if (quarter && stride % 4 != 0)
        throw std::invalid_argument("crop: stride must be divisible by 4 for 4x pairs");

    auto offsets = [&](int extent) {
        std::vector<int> out;
        for (int o = 0;; o += stride) {
            if (o + patch >= extent) {
                out.push_back(extent - patch);  // edge-snapped last window
                break;
            }
            out.push_back(o);
        }
        return out;
    };

    std::vector<PatchPair> pairs;
    for (int oy : offsets(hr.h))
        for (int ox : offsets(hr.w)) {
            PatchPair p;
            p.hr_row = oy;
            p.hr_col = ox;
            p.hr = crop(hr, oy, ox, patch, patch);
            if (quarter) {
                if (oy % 4 != 0 || ox % 4 != 0)
                    throw std::invalid_argument("crop: hr offset not divisible by 4");
                p.lr = crop(lr, oy / 4, ox / 4, patch / 4, patch / 4);
            } else {
                p.lr = crop(lr, oy, ox, patch, patch);
            }
            pairs.push_back(std::move(p));
        }
    return pairs;
}

namespace {

std::vector<std::string> list_images(const std::string& dir) {
    std::vector<std::string> out;
    if (dir.empty() || !fs::exists(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::string ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
        if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") out.push_back(e.path().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct PatchWriter {
    fs::path out_dir;
    DatasetManifest* manifest;
    size_t counter = 0;

    void emit(const std::string& image_id, const PatchPair& pair, PatchBranch branch) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%06zu", counter++);
        std::string stem = std::string(buf) + "_" + to_string(branch);
        PatchRecord rec;
        rec.source_image_id = image_id;
        rec.hr_path = "patches/" + stem + "_hr.png";
        rec.lr_path = "patches/" + stem + "_lr.png";
        rec.hr_row = pair.hr_row;
        rec.hr_col = pair.hr_col;
        rec.patch = pair.hr.h;
        rec.branch = branch;
        save_png(pair.hr, (out_dir / rec.hr_path).string());
        save_png(pair.lr, (out_dir / rec.lr_path).string());
        manifest->records.push_back(rec);
        manifest->component_counts[to_string(branch)]++;
    }
};

// Center-crop so both dimensions are divisible by 4 and at least patch.
Image prepare_hr(const Image& img, int patch) {
    int h = std::max(patch, (img.h / 4) * 4);
    int w = std::max(patch, (img.w / 4) * 4);
    if (h > img.h || w > img.w) throw std::invalid_argument("image smaller than patch");
    return crop(img, 0, 0, h, w);
}

}  // namespace

DatasetManifest assemble_training_set(const std::string& lsdir_dir,
                                      const std::string& ugc_pairs_dir,
                                      const std::string& ugc_hr_dir, const DatasetConfig& config,
                                      const std::string& out_dir) {
    auto lsdir = list_images(lsdir_dir);
    std::vector<std::string> pair_hr, ugc_hr;
    if (!ugc_pairs_dir.empty()) pair_hr = list_images((fs::path(ugc_pairs_dir) / "HR").string());
    ugc_hr = list_images(ugc_hr_dir);
    if (lsdir.empty() && pair_hr.empty() && ugc_hr.empty())
        throw std::runtime_error("assemble_training_set: no decodable inputs in any source");

    fs::create_directories(fs::path(out_dir) / "patches");
    DatasetManifest manifest;
    manifest.global_seed = config.global_seed;
    PatchWriter writer{fs::path(out_dir), &manifest};

    auto skip = [](const std::string& path, const std::exception& e) {
        std::cerr << "warning: skipping " << path << ": " << e.what() << "\n";
    };

    // Component 1: LSDIR-style HR images, 50/50 plain downsample vs degradation.
    for (const auto& path : lsdir) {
        std::string id = fs::path(path).stem().string();
        try {
            Image hr = prepare_hr(load_image(path), config.patch);
            uint64_t seed = hash_combine(config.global_seed, id);
            MixBranch branch = mix_branch(id, config.global_seed);
            Image lr;
            PatchBranch pb;
            if (branch == MixBranch::downsample_only) {
                lr = resize_bicubic(hr, hr.h / 4, hr.w / 4);
                pb = PatchBranch::downsample_only;
            } else {
                lr = synth_degrade(hr, config.synth_recipe, seed);
                pb = PatchBranch::degrade;
            }
            for (const auto& p : crop_overlapping_patches(hr, lr, config.patch, config.stride))
                writer.emit(id, p, pb);
        } catch (const std::exception& e) {
            skip(path, e);
        }
    }

    // Component 2: official paired set, cropped with correspondence kept.
    for (const auto& hr_path : pair_hr) {
        std::string id = fs::path(hr_path).stem().string();
        fs::path lr_path = fs::path(ugc_pairs_dir) / "LR" / fs::path(hr_path).filename();
        try {
            Image hr = prepare_hr(load_image(hr_path), config.patch);
            Image lr_full = load_image(lr_path.string());
            Image lr = crop(lr_full, 0, 0, hr.h / 4, hr.w / 4);
            for (const auto& p : crop_overlapping_patches(hr, lr, config.patch, config.stride))
                writer.emit(id, p, PatchBranch::synthetic_pair);
        } catch (const std::exception& e) {
            skip(hr_path, e);
        }
    }

    // Component 3: UGC HR patches, wild-degraded at native scale.
    for (const auto& path : ugc_hr) {
        std::string id = fs::path(path).stem().string();
        try {
            Image hr = prepare_hr(load_image(path), config.patch);
            uint64_t seed = hash_combine(config.global_seed, "wild:" + id);
            std::vector<PatchPair> pairs = crop_overlapping_patches(hr, hr, config.patch,
                                                                    config.stride);
            size_t k = 0;
            for (auto& p : pairs) {
                p.lr = wild_degrade(p.hr, config.wild_recipe, hash_combine(seed, std::to_string(k++)));
                writer.emit(id, p, PatchBranch::wild_degraded);
            }
        } catch (const std::exception& e) {
            skip(path, e);
        }
    }

    save_manifest(manifest, (fs::path(out_dir) / "manifest.jsonl").string());
    return manifest;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_manifest: cannot open " + path);
    json header = {{"global_seed", m.global_seed}, {"component_counts", m.component_counts}};
    f << header.dump() << "\n";
    for (const auto& r : m.records) {
        json j = {{"source_image_id", r.source_image_id}, {"hr_path", r.hr_path},
                  {"lr_path", r.lr_path},                 {"hr_row", r.hr_row},
                  {"hr_col", r.hr_col},                   {"patch", r.patch},
                  {"branch", to_string(r.branch)}};
        f << j.dump() << "\n";
    }
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_manifest: cannot open " + path);
    DatasetManifest m;
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("load_manifest: empty file");
    json header = json::parse(line);
    m.global_seed = header.at("global_seed").get<uint64_t>();
    m.component_counts = header.at("component_counts").get<std::map<std::string, size_t>>();
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        PatchRecord r;
        r.source_image_id = j.at("source_image_id").get<std::string>();
        r.hr_path = j.at("hr_path").get<std::string>();
        r.lr_path = j.at("lr_path").get<std::string>();
        r.hr_row = j.at("hr_row").get<int>();
        r.hr_col = j.at("hr_col").get<int>();
        r.patch = j.at("patch").get<int>();
        r.branch = patch_branch_from_string(j.at("branch").get<std::string>());
        m.records.push_back(std::move(r));
    }
    size_t total = 0;
    for (const auto& [k, v] : m.component_counts) total += v;
    if (total != m.records.size())
        throw std::runtime_error("load_manifest: component counts do not sum to record count");
    return m;
}

}  // namespace ugcsr
