#pragma once

#include <utility>
#include <vector>

#include "ugcsr/nn.hpp"
#include "ugcsr/tensor.hpp"

namespace ugcsr {

struct AutoencoderConfig {
    size_t downscale_factor = 8;  // power of 2
    size_t latent_channels = 4;
    size_t base_width = 32;
    double kl_weight = 1e-6;
    uint64_t seed = 101;

    void validate() const;
};

struct VaeLossParts {
    double total = 0.0, recon = 0.0, kl = 0.0;
};

// recon MSE + kl_weight * KL(N(mean, exp(logvar)) || N(0,1)), both means over
// elements. img and recon live in [0,1] pixel space.
VaeLossParts vae_loss(const Tensor& img, const Tensor& mean, const Tensor& logvar,
                      const Tensor& recon, double kl_weight);

// Channel-preserving residual block without timestep conditioning.
struct VaeResBlock {
    nn::GroupNorm gn1, gn2;
    nn::SiLU a1, a2;
    nn::Conv2d c1, c2;

    VaeResBlock() = default;
    VaeResBlock(size_t ch, Rng& rng);
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);
    void collect_params(nn::ParamRefs& out);
};

// Small convolutional VAE: [0,1] pixels rescaled to [-1,1] internally,
// latent at 1/downscale_factor spatial resolution. Copying clones weights.
class Autoencoder {
public:
    explicit Autoencoder(const AutoencoderConfig& config);

    // (b,3,h,w) in [0,1] -> mean/logvar (b,latent_channels,h/f,w/f)
    std::pair<LatentTensor, LatentTensor> encode(const Tensor& img_batch);
    // (b,latent_channels,hl,wl) -> (b,3,h,w) clamped to [0,1]
    Tensor decode(const Tensor& z);

    // One training step on a single (3,h,w) image with the given latent
    // noise draw; accumulates param grads. Loss uses the unclamped decode.
    VaeLossParts train_step(const Tensor& img, const Tensor& latent_noise);

    nn::ParamRefs parameters();
    uint64_t checksum() { return nn::params_checksum(parameters()); }
    const AutoencoderConfig& config() const { return cfg_; }

    // single image (3,h,w) forward pieces, used internally and by train_step
    Tensor encode_one(const Tensor& img);   // -> (2*latent_ch, hl, wl)
    Tensor decode_one_raw(const Tensor& z);  // unclamped [0,1]-domain output

private:
    Tensor encode_backward(const Tensor& gy);
    Tensor decode_backward(const Tensor& gy);

    AutoencoderConfig cfg_;
    size_t stages_ = 0;
    // encoder
    nn::Conv2d enc_in_;
    std::vector<VaeResBlock> enc_blocks_;
    std::vector<nn::Conv2d> enc_down_;
    VaeResBlock enc_mid_;
    nn::GroupNorm enc_out_gn_;
    nn::SiLU enc_out_act_;
    nn::Conv2d enc_out_;
    // decoder
    nn::Conv2d dec_in_;
    VaeResBlock dec_mid_;
    std::vector<VaeResBlock> dec_blocks_;
    std::vector<nn::Conv2d> dec_up_;
    std::vector<nn::Upsample2x> dec_upsample_;
    nn::GroupNorm dec_out_gn_;
    nn::SiLU dec_out_act_;
    nn::Conv2d dec_out_;
};

}  // namespace ugcsr
