#pragma once

#include <cstdint>
#include <string>

#include "ugcsr/image.hpp"

namespace ugcsr {

enum class OpOrder { fixed, shuffled };

// Seeded degradation recipe: blur -> noise -> jpeg (optionally shuffled),
// plus 4x bicubic downsampling for the synthetic path.
struct DegradationRecipe {
    double blur_sigma_min = 0.2, blur_sigma_max = 2.0;
    double noise_sigma_min = 0.0, noise_sigma_max = 0.06;  // pixel units, [0,1] range
    int jpeg_quality_min = 30, jpeg_quality_max = 95;
    double resize_factor = 4.0;  // 4 for synthetic, 1 for wild
    OpOrder op_order = OpOrder::fixed;
    uint64_t seed = 0;

    void validate() const;
};

enum class MixBranch { downsample_only, degrade };

// 50/50 branch assignment, deterministic in (seed, image_id).
MixBranch mix_branch(const std::string& image_id, uint64_t seed);

// 4x bicubic downsample followed by the degradation chain.
Image synth_degrade(const Image& hr, const DegradationRecipe& recipe, uint64_t seed);

// Degradation at native scale (no resize).
Image wild_degrade(const Image& hr, const DegradationRecipe& recipe, uint64_t seed);

}  // namespace ugcsr
