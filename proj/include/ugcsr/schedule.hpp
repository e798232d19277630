#pragma once

#include <cstddef>
#include <vector>

namespace ugcsr {

struct NoiseSchedule {
    size_t T = 0;
    std::vector<double> betas;       // (0,1)
    std::vector<double> alphas;      // 1 - beta
    std::vector<double> alpha_bars;  // cumulative product of alphas

    double beta(size_t t) const { return betas.at(t); }
    double alpha(size_t t) const { return alphas.at(t); }
    double alpha_bar(size_t t) const { return alpha_bars.at(t); }
};

enum class ScheduleKind { linear };

// Linear beta ramp from beta_start to beta_end inclusive.
NoiseSchedule build_schedule(size_t T, double beta_start, double beta_end,
                             ScheduleKind kind = ScheduleKind::linear);

// Uniformly strided descending timestep ladder for inference:
// num_steps values from T-1 (or t_start) down toward 0, always ending at 0.
std::vector<size_t> strided_timesteps(size_t t_start, size_t num_steps);

// Collapse a full schedule onto a visited-timestep subsequence: effective
// alpha of ladder step i is alpha_bar[t_i] / alpha_bar[t_{i+1}], so a plain
// reverse step over the sub-schedule is the standard strided DDPM sampler.
NoiseSchedule sub_schedule(const NoiseSchedule& sched, const std::vector<size_t>& ladder);

}  // namespace ugcsr
