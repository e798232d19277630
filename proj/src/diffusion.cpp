#include "ugcsr/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace ugcsr {

namespace {
void check_pair(const LatentTensor& a, const LatentTensor& b, const char* what) {
    if (!a.data.same_shape(b.data))
        throw std::invalid_argument(std::string(what) + ": shape mismatch");
}
void check_t(size_t t, const NoiseSchedule& sched, const char* what) {
    if (t >= sched.T) throw std::out_of_range(std::string(what) + ": t out of range");
}
}  // namespace

LatentTensor forward_step(const LatentTensor& x_prev, size_t t, const NoiseSchedule& sched,
                          const LatentTensor& noise) {
    check_pair(x_prev, noise, "forward_step");
    check_t(t, sched, "forward_step");
    double b = sched.beta(t);
    double cs = std::sqrt(1.0 - b);
    double cn = std::sqrt(b);
    LatentTensor out = x_prev;
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = cs * x_prev.data[i] + cn * noise.data[i];
    return out;
}

LatentTensor forward_marginal(const LatentTensor& x0, size_t t, const NoiseSchedule& sched,
                              const LatentTensor& noise) {
    check_pair(x0, noise, "forward_marginal");
    check_t(t, sched, "forward_marginal");
    double ab = sched.alpha_bar(t);
    double cs = std::sqrt(ab);
    double cn = std::sqrt(1.0 - ab);
    LatentTensor out = x0;
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = cs * x0.data[i] + cn * noise.data[i];
    return out;
}

LatentTensor reverse_step(const LatentTensor& x_t, size_t t, const LatentTensor& predicted_noise,
                          const NoiseSchedule& sched, const LatentTensor& noise,
                          std::optional<double> sigma_override) {
    check_pair(x_t, predicted_noise, "reverse_step");
    check_pair(x_t, noise, "reverse_step");
    check_t(t, sched, "reverse_step");
    double a = sched.alpha(t);
    double ab = sched.alpha_bar(t);
    double b = sched.beta(t);
    double inv_sqrt_a = 1.0 / std::sqrt(a);
    double eps_coef = (ab < 1.0) ? b / std::sqrt(1.0 - ab) : 0.0;
    double sigma = (t == 0) ? 0.0 : std::sqrt(b);
    if (sigma_override) sigma = *sigma_override;
    if (t == 0) sigma = 0.0;  // sigma_0 = 0 contract wins over any override

    LatentTensor out = x_t;
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = inv_sqrt_a * (x_t.data[i] - eps_coef * predicted_noise.data[i]) +
                      sigma * noise.data[i];
    return out;
}

double training_loss(const NoisePredictor& model, const LatentTensor& x0_latent, size_t t,
                     const NoiseSchedule& sched, const LatentTensor& noise) {
    if (x0_latent.space != Space::latent)
        throw std::invalid_argument("training_loss: x0 must live in latent space");
    LatentTensor x_t = forward_marginal(x0_latent, t, sched, noise);
    Tensor pred = model(x_t.data, t);
    if (!pred.same_shape(noise.data))
        throw std::invalid_argument("training_loss: prediction shape mismatch");
    if (!pred.all_finite()) throw std::runtime_error("training_loss: non-finite model output");
    return pred.mse(noise.data);
}

}  // namespace ugcsr
