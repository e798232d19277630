#include "ugcsr/sampler.hpp"

#include <stdexcept>

namespace ugcsr {

void SamplerConfig::validate(const NoiseSchedule& sched) const {
    if (guidance_scale < 0.0) throw std::invalid_argument("guidance_scale must be >= 0");
    if (num_steps < 1) throw std::invalid_argument("num_steps must be >= 1");
    if (start_timestep >= sched.T)
        throw std::invalid_argument("start_timestep outside schedule");
}

SamplerConfig synthetic_preset() {
    SamplerConfig cfg;
    cfg.start_point = StartPoint::lr;
    cfg.guidance_scale = 0.9;
    return cfg;
}

SamplerConfig wild_preset() {
    SamplerConfig cfg;
    cfg.start_point = StartPoint::noise;
    cfg.guidance_scale = 8.5;
    cfg.positive_prompt = {"clean", "high-resolution", "8K", "ultra-detailed",
                           "ultra-realistic"};
    cfg.negative_prompt = {"dotted",     "noise",  "blur",
                           "low-resolution", "smooth", "unrealistic physics",
                           "unnatural shadows"};
    return cfg;
}

SamplerConfig preset_by_name(const std::string& name) {
    if (name == "synthetic") return synthetic_preset();
    if (name == "wild") return wild_preset();
    throw std::invalid_argument("unknown sampler preset: " + name);
}

Tensor embed_prompt(const std::vector<std::string>& words, size_t dim) {
    if (words.empty()) return Tensor();
    Tensor tokens({words.size(), dim});
    for (size_t i = 0; i < words.size(); ++i) {
        Rng rng(hash_combine(0x7461676765720000ull, words[i]));
        for (size_t d = 0; d < dim; ++d) tokens.at2(i, d) = rng.normal();
    }
    return tokens;
}

std::pair<LatentTensor, size_t> init_start(const SamplerConfig& cfg,
                                           const LatentTensor& lr_latent,
                                           const NoiseSchedule& sched, Rng& rng) {
    if (lr_latent.data.empty()) throw std::invalid_argument("init_start: lr_latent required");
    Tensor eps = Tensor::randn(lr_latent.data.shape(), rng);
    if (cfg.start_point == StartPoint::noise)
        return {LatentTensor(std::move(eps), Space::latent), sched.T - 1};
    size_t t0 = cfg.start_timestep != 0 ? cfg.start_timestep : sched.T * 2 / 3;
    LatentTensor x0 = forward_marginal(lr_latent, t0, sched,
                                       LatentTensor(std::move(eps), Space::latent));
    return {std::move(x0), t0};
}

LatentTensor cfg_predict(Denoiser& model, const LatentTensor& x_t, size_t t,
                         const ConditioningBundle& cond_pos,
                         const ConditioningBundle& cond_neg, double gs) {
    if (gs == 1.0) return model.predict_noise(x_t, t, cond_pos);
    if (gs == 0.0) return model.predict_noise(x_t, t, cond_neg);
    LatentTensor pos = model.predict_noise(x_t, t, cond_pos);
    LatentTensor neg = model.predict_noise(x_t, t, cond_neg);
    if (!pos.data.same_shape(neg.data))
        throw std::invalid_argument("cfg_predict: branch output shape mismatch");
    Tensor out = neg.data + gs * (pos.data - neg.data);
    return LatentTensor(std::move(out), Space::latent);
}

Image sample(const SamplerConfig& cfg, const Image& lr_image, const SamplerModels& models,
             const NoiseSchedule& sched) {
    cfg.validate(sched);
    if (!models.autoencoder || !models.denoiser || !models.extractor)
        throw std::invalid_argument("sample: all three models are required");
    size_t px = static_cast<size_t>(lr_image.h) * static_cast<size_t>(lr_image.w);
    if (px > cfg.max_lr_pixels)
        throw std::invalid_argument("sample: LR input exceeds max_lr_pixels cap");

    Image lr_up = resize_bicubic(lr_image, lr_image.h * 4, lr_image.w * 4);
    auto [lr_mean, lr_logvar] = models.autoencoder->encode(image_to_tensor(lr_up));
    const LatentTensor& lr_latent = lr_mean;  // deterministic: posterior mean

    size_t prompt_dim = models.denoiser->config().prompt_dim;
    ConditioningBundle pos, neg;
    pos.lr_latent = neg.lr_latent = lr_latent;
    pos.semantic = neg.semantic = models.extractor->extract(lr_image);
    pos.prompt_tokens = embed_prompt(cfg.positive_prompt, prompt_dim);
    neg.prompt_tokens = embed_prompt(cfg.negative_prompt, prompt_dim);

    Rng rng(hash_combine(cfg.seed, "sample"));
    auto [x, t_start] = init_start(cfg, lr_latent, sched, rng);
    std::vector<size_t> ladder = strided_timesteps(t_start, cfg.num_steps);
    NoiseSchedule sub = sub_schedule(sched, ladder);
    for (size_t k = 0; k < ladder.size(); ++k) {
        LatentTensor eps =
            cfg_predict(*models.denoiser, x, ladder[k], pos, neg, cfg.guidance_scale);
        LatentTensor step_noise(Tensor::randn(x.data.shape(), rng), Space::latent);
        x = reverse_step(x, ladder.size() - 1 - k, eps, sub, step_noise);
    }
    return tensor_to_image(models.autoencoder->decode(x.data));
}

}  // namespace ugcsr
