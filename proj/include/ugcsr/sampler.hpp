#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ugcsr/autoencoder.hpp"
#include "ugcsr/denoiser.hpp"
#include "ugcsr/diffusion.hpp"
#include "ugcsr/extractor.hpp"
#include "ugcsr/image.hpp"

namespace ugcsr {

enum class StartPoint { noise, lr };

struct SamplerConfig {
    StartPoint start_point = StartPoint::noise;
    double guidance_scale = 1.0;  // >= 0
    size_t num_steps = 50;
    std::vector<std::string> positive_prompt;
    std::vector<std::string> negative_prompt;
    uint64_t seed = 0;
    size_t start_timestep = 0;       // lr mode; 0 means "2T/3 at sample time"
    size_t max_lr_pixels = 1 << 16;  // input cap: reject LR inputs above 64k px

    void validate(const NoiseSchedule& sched) const;
};

// Named presets: "synthetic" starts from the noised LR latent with sub-one
// guidance and no prompt; "wild" starts from pure noise with strong guidance
// and the quality prompt list.
SamplerConfig synthetic_preset();
SamplerConfig wild_preset();
SamplerConfig preset_by_name(const std::string& name);

// Deterministic tagger stand-in: each word hashes to a fixed embedding row.
Tensor embed_prompt(const std::vector<std::string>& words, size_t dim);

struct SamplerModels {
    Autoencoder* autoencoder = nullptr;
    Denoiser* denoiser = nullptr;
    SemanticExtractor* extractor = nullptr;
};

// Starting latent and timestep: pure Gaussian at T-1, or the LR latent
// noised to start_timestep.
std::pair<LatentTensor, size_t> init_start(const SamplerConfig& cfg,
                                           const LatentTensor& lr_latent,
                                           const NoiseSchedule& sched, Rng& rng);

// Classifier-free guidance: eps_neg + gs * (eps_pos - eps_neg), bit-exact
// passthrough at gs = 0 and gs = 1.
LatentTensor cfg_predict(Denoiser& model, const LatentTensor& x_t, size_t t,
                         const ConditioningBundle& cond_pos,
                         const ConditioningBundle& cond_neg, double gs);

// Full inference: 4x-upsample + encode the LR input, run the guided reverse
// chain down a strided timestep ladder, decode. Deterministic per seed.
Image sample(const SamplerConfig& cfg, const Image& lr_image, const SamplerModels& models,
             const NoiseSchedule& sched);

}  // namespace ugcsr
