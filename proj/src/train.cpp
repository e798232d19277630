#include "ugcsr/train.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "ugcsr/checkpoint.hpp"
#include "ugcsr/diffusion.hpp"
#include "ugcsr/sampler.hpp"

namespace fs = std::filesystem;

namespace ugcsr {

std::vector<double> pretrain_autoencoder(Autoencoder& vae, const std::vector<Image>& images,
                                         size_t steps, double lr, uint64_t seed) {
    if (images.empty()) throw std::invalid_argument("pretrain_autoencoder: no images");
    nn::Adam adam(vae.parameters(), lr);
    Rng rng(hash_combine(seed, "vae-pretrain"));
    std::vector<double> losses;
    losses.reserve(steps);
    size_t f = vae.config().downscale_factor;
    for (size_t s = 0; s < steps; ++s) {
        const Image& img = images[rng.uniform_int(0, images.size() - 1)];
        Tensor x = image_to_chw(img);
        Tensor eps = Tensor::randn({vae.config().latent_channels, img.h / f, img.w / f}, rng);
        adam.zero_grad();
        losses.push_back(vae.train_step(x, eps).total);
        adam.step();
    }
    return losses;
}

void save_models(const std::string& path, const TrainModels& models, size_t step) {
    Checkpoint ck;
    pack_params(ck, "denoiser", models.denoiser->parameters());
    pack_params(ck, "autoencoder", models.autoencoder->parameters());
    pack_params(ck, "extractor", models.extractor->parameters());
    ck.put_scalar("train/step", static_cast<double>(step));
    ck.save(path);
}

size_t load_models(const std::string& path, const TrainModels& models) {
    Checkpoint ck = Checkpoint::load(path);
    unpack_params(ck, "denoiser", models.denoiser->parameters());
    unpack_params(ck, "autoencoder", models.autoencoder->parameters());
    unpack_params(ck, "extractor", models.extractor->parameters());
    return static_cast<size_t>(ck.scalar("train/step"));
}

TrainStats train_denoiser(const TrainModels& models,
                          const std::vector<std::pair<Image, Image>>& pairs,
                          const NoiseSchedule& sched, const OptimizerBlock& opt,
                          const std::string& out_dir, const std::string& resume_path) {
    if (pairs.empty()) throw std::invalid_argument("train_denoiser: no training pairs");
    Autoencoder& vae = *models.autoencoder;
    Denoiser& den = *models.denoiser;
    SemanticExtractor& ext = *models.extractor;
    fs::create_directories(out_dir);

    TrainStats stats;
    if (!resume_path.empty()) stats.start_step = load_models(resume_path, models);

    uint64_t fz_den = den.frozen_checksum();
    uint64_t fz_vae = vae.checksum();
    uint64_t fz_ext = ext.checksum();

    // frozen encoders run once per pair; training touches only the denoiser
    struct Prepped {
        LatentTensor x0, lr_latent;
        ConditioningBundle cond;
    };
    std::vector<Prepped> data;
    Tensor prompt =
        embed_prompt(wild_preset().positive_prompt, den.config().prompt_dim);
    for (const auto& [hr, lr] : pairs) {
        Prepped p;
        p.x0 = vae.encode(image_to_tensor(hr)).first;
        Image lr_up = (lr.h == hr.h) ? lr : resize_bicubic(lr, hr.h, hr.w);
        p.lr_latent = vae.encode(image_to_tensor(lr_up)).first;
        p.cond.lr_latent = p.lr_latent;
        p.cond.prompt_tokens = prompt;
        p.cond.semantic = ext.extract(lr);
        data.push_back(std::move(p));
    }

    nn::Adam adam(den.trainable_parameters(), opt.lr);
    adam.set_step_count(stats.start_step);
    Rng rng(hash_combine(opt.seed, "train"));

    std::ofstream loss_csv(out_dir + "/loss.csv",
                           stats.start_step == 0 ? std::ios::trunc : std::ios::app);
    if (!loss_csv) throw std::runtime_error("train: cannot write loss.csv in " + out_dir);
    if (stats.start_step == 0) loss_csv << "step,loss\n";

    auto squeeze = [](const Tensor& t) {
        Tensor out({t.dim(1), t.dim(2), t.dim(3)});
        for (size_t i = 0; i < out.size(); ++i) out[i] = t[i];
        return out;
    };

    for (size_t s = 0; s < opt.steps; ++s) {
        const Prepped& p = data[rng.uniform_int(0, data.size() - 1)];
        size_t t = rng.uniform_int(0, sched.T - 1);
        LatentTensor eps(Tensor::randn(p.x0.data.shape(), rng), Space::latent);
        LatentTensor x_t = forward_marginal(p.x0, t, sched, eps);
        Tensor eps3 = squeeze(eps.data);
        Tensor pred = den.predict_noise_chw(squeeze(x_t.data), t, p.cond);
        double loss = pred.mse(eps3);
        adam.zero_grad();
        den.backward((pred - eps3) * (2.0 / static_cast<double>(eps3.size())));
        adam.step();
        stats.losses.push_back(loss);
        loss_csv << (stats.start_step + s + 1) << "," << loss << "\n";
    }
    stats.end_step = stats.start_step + opt.steps;

    if (den.frozen_checksum() != fz_den || vae.checksum() != fz_vae ||
        ext.checksum() != fz_ext)
        throw std::runtime_error("train: frozen parameter set changed during training");

    size_t lead = std::min<size_t>(100, stats.losses.size());
    double a = 0.0, b = 0.0;
    for (size_t i = 0; i < lead; ++i) {
        a += stats.losses[i];
        b += stats.losses[stats.losses.size() - 1 - i];
    }
    stats.lead_mean = a / static_cast<double>(lead);
    stats.trail_mean = b / static_cast<double>(lead);

    save_models(out_dir + "/checkpoint.bin", models, stats.end_step);
    return stats;
}

}  // namespace ugcsr
