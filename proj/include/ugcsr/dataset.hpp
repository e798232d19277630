#pragma once

#include <map>
#include <string>
#include <vector>

#include "ugcsr/degrade.hpp"
#include "ugcsr/image.hpp"

namespace ugcsr {

enum class PatchBranch { downsample_only, degrade, synthetic_pair, wild_degraded };

std::string to_string(PatchBranch b);
PatchBranch patch_branch_from_string(const std::string& s);

struct PatchRecord {
    std::string source_image_id;
    std::string hr_path;  // relative to manifest location
    std::string lr_path;
    int hr_row = 0, hr_col = 0;
    int patch = 0;  // HR patch size
    PatchBranch branch = PatchBranch::downsample_only;
};

struct DatasetManifest {
    std::vector<PatchRecord> records;
    std::map<std::string, size_t> component_counts;  // branch name -> count
    uint64_t global_seed = 0;
};

// In-memory HR/LR patch pair produced by cropping.
struct PatchPair {
    Image hr, lr;
    int hr_row = 0, hr_col = 0;
};

// Overlapping HR windows on a stride grid (last window snapped to the image
// edge), each paired with the co-located LR window. lr must be hr/4 or the
// same size as hr (wild pairs).
std::vector<PatchPair> crop_overlapping_patches(const Image& hr, const Image& lr, int patch,
                                                int stride);

inline DegradationRecipe wild_default_recipe() {
    DegradationRecipe r;
    r.resize_factor = 1.0;
    return r;
}

struct DatasetConfig {
    DegradationRecipe synth_recipe;                       // resize_factor 4
    DegradationRecipe wild_recipe = wild_default_recipe();  // native scale
    int patch = 128;
    int stride = 64;  // default patch/2
    uint64_t global_seed = 0;
};

// Builds the three-component training set:
//   lsdir_dir    — HR images, 50/50 plain-downsample vs degradation
//   ugc_pairs_dir — HR/ and LR/ subdirectories with matching filenames
//   ugc_hr_dir   — HR images, cropped then wild-degraded at native scale
// Patches are written under out_dir; the manifest is line-delimited JSON.
DatasetManifest assemble_training_set(const std::string& lsdir_dir,
                                      const std::string& ugc_pairs_dir,
                                      const std::string& ugc_hr_dir, const DatasetConfig& config,
                                      const std::string& out_dir);

void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

}  // namespace ugcsr
