#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ugcsr/autoencoder.hpp"
#include "ugcsr/config.hpp"
#include "ugcsr/denoiser.hpp"
#include "ugcsr/extractor.hpp"
#include "ugcsr/image.hpp"
#include "ugcsr/schedule.hpp"

namespace ugcsr {

struct TrainModels {
    Autoencoder* autoencoder = nullptr;
    Denoiser* denoiser = nullptr;
    SemanticExtractor* extractor = nullptr;
};

struct TrainStats {
    size_t start_step = 0, end_step = 0;
    double lead_mean = 0.0, trail_mean = 0.0;  // first / last 100-step loss means
    std::vector<double> losses;                // this run's per-step losses
};

// Autoencoder pretraining on raw images; returns per-step total losses.
std::vector<double> pretrain_autoencoder(Autoencoder& vae, const std::vector<Image>& images,
                                         size_t steps, double lr, uint64_t seed);

// Noise-prediction training on (hr, lr) patch pairs. Only the denoiser's
// conditioning pathway and head receive updates; the backbone, autoencoder,
// and extractor checksums are verified before and after, and any change
// aborts the run. Writes loss.csv and checkpoint.bin under out_dir; passing
// resume_path restores weights and continues step numbering.
TrainStats train_denoiser(const TrainModels& models,
                          const std::vector<std::pair<Image, Image>>& pairs,
                          const NoiseSchedule& sched, const OptimizerBlock& opt,
                          const std::string& out_dir, const std::string& resume_path = "");

// checkpoint plumbing shared with the CLI
void save_models(const std::string& path, const TrainModels& models, size_t step);
size_t load_models(const std::string& path, const TrainModels& models);  // returns step

}  // namespace ugcsr
