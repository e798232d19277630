#include "ugcsr/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ugcsr {

NoiseSchedule build_schedule(size_t T, double beta_start, double beta_end, ScheduleKind kind) {
    if (T < 1) throw std::invalid_argument("build_schedule: T must be >= 1");
    if (!(beta_start > 0.0 && beta_end < 1.0))
        throw std::invalid_argument("build_schedule: beta bounds must lie in (0,1)");
    if (beta_start > beta_end)
        throw std::invalid_argument("build_schedule: beta_start > beta_end");
    if (kind != ScheduleKind::linear)
        throw std::invalid_argument("build_schedule: unknown schedule kind");

    NoiseSchedule s;
    s.T = T;
    s.betas.resize(T);
    s.alphas.resize(T);
    s.alpha_bars.resize(T);
    double cum = 1.0;
    for (size_t t = 0; t < T; ++t) {
        double frac = (T == 1) ? 0.0 : static_cast<double>(t) / static_cast<double>(T - 1);
        s.betas[t] = beta_start + (beta_end - beta_start) * frac;
        s.alphas[t] = 1.0 - s.betas[t];
        cum *= s.alphas[t];
        s.alpha_bars[t] = cum;
    }
    return s;
}

std::vector<size_t> strided_timesteps(size_t t_start, size_t num_steps) {
    if (num_steps < 1) throw std::invalid_argument("strided_timesteps: num_steps >= 1");
    std::vector<size_t> ladder;
    if (num_steps == 1 || t_start == 0) {
        ladder.push_back(t_start);
        if (t_start != 0) ladder.push_back(0);
    } else {
        double step = static_cast<double>(t_start) / static_cast<double>(num_steps - 1);
        for (size_t i = 0; i < num_steps; ++i) {
            size_t t = static_cast<size_t>(
                std::llround(static_cast<double>(t_start) - step * static_cast<double>(i)));
            if (ladder.empty() || t < ladder.back()) ladder.push_back(t);
        }
        if (ladder.back() != 0) ladder.push_back(0);
    }
    return ladder;  // strictly decreasing, ends at 0
}

NoiseSchedule sub_schedule(const NoiseSchedule& sched, const std::vector<size_t>& ladder) {
    NoiseSchedule s;
    s.T = ladder.size();
    s.betas.resize(s.T);
    s.alphas.resize(s.T);
    s.alpha_bars.resize(s.T);
    // ladder[0] is the first visited (largest) timestep; sub-schedule index i
    // corresponds to ladder[s.T - 1 - i] so that index 0 is the last (smallest) step.
    for (size_t i = 0; i < s.T; ++i) {
        size_t t = ladder[s.T - 1 - i];
        double prev_bar = (i == 0) ? 1.0 : sched.alpha_bar(ladder[s.T - i]);
        s.alpha_bars[i] = sched.alpha_bar(t);
        s.alphas[i] = s.alpha_bars[i] / prev_bar;
        s.betas[i] = 1.0 - s.alphas[i];
    }
    return s;
}

}  // namespace ugcsr
