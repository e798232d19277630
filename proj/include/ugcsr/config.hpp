#pragma once

#include <string>

#include "ugcsr/autoencoder.hpp"
#include "ugcsr/dataset.hpp"
#include "ugcsr/denoiser.hpp"
#include "ugcsr/extractor.hpp"
#include "ugcsr/sampler.hpp"
#include "ugcsr/schedule.hpp"

namespace ugcsr {

struct ScheduleBlock {
    size_t T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;

    NoiseSchedule build() const { return build_schedule(T, beta_start, beta_end); }
};

struct OptimizerBlock {
    size_t steps = 2000;      // desk-scale default; the reference setup ran 90k
    double lr = 5e-5;
    size_t vae_steps = 200;   // autoencoder pretraining
    double vae_lr = 1e-3;
    uint64_t seed = 7;
};

// Whole-run configuration. Every block has working defaults; JSON input may
// override any subset. Unknown keys anywhere are hard errors.
struct RunConfig {
    uint64_t seed = 0;
    ScheduleBlock schedule;
    DatasetConfig dataset;
    AutoencoderConfig autoencoder;
    DenoiserConfig denoiser;
    TrunkConfig extractor;
    std::string sampler_preset = "wild";
    SamplerConfig sampler;  // preset resolved, then overrides applied
    OptimizerBlock optimizer;

    void validate() const;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text);
std::string run_config_json(const RunConfig& cfg);  // effective config, round-trips

}  // namespace ugcsr
