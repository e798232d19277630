#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ugcsr/metrics.hpp"
#include "ugcsr/sampler.hpp"

namespace ugcsr {

// Cartesian sweep over sampler settings. Known axes: guidance_scale,
// start_point {noise, lr}, prompt_set {none, positive, negative}.
struct SweepGrid {
    std::vector<std::pair<std::string, std::vector<std::string>>> axes;
};

SweepGrid load_sweep_grid(const std::string& path);  // JSON {"axes": {...}}

struct SweepPoint {
    std::vector<std::pair<std::string, std::string>> settings;
    std::string label() const;  // "axis=value" joined with ';'
};

std::vector<SweepPoint> enumerate_grid(const SweepGrid& grid);
SamplerConfig apply_point(SamplerConfig base, const SweepPoint& point);

struct SweepPointResult {
    SweepPoint point;
    bool failed = false;
    std::string error;
    ScoreCard card;
};

struct SweepResult {
    std::vector<SweepPointResult> points;
};

// Evaluates every grid point over the input images. With a non-empty
// inject_dir the sampler never runs; per-point metrics are replayed from
// "<label>.csv" files instead (externally computed NR-IQA values). Points
// run concurrently up to `workers`, each on private model clones; a failed
// point is recorded and the sweep continues.
SweepResult run_sweep(const SweepGrid& grid, const SamplerConfig& base,
                      const std::vector<std::pair<std::string, Image>>& images,
                      const SamplerModels& models, const NoiseSchedule& sched,
                      NrIqaPlugin* nr, const std::string& inject_dir, size_t workers);

void write_sweep_csv(const std::string& path, const SweepResult& result);
// one score-vs-value plot image per axis with at least two values
void write_sweep_plots(const std::string& out_dir, const SweepGrid& grid,
                       const SweepResult& result);

}  // namespace ugcsr
