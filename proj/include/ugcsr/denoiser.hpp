#pragma once

#include <vector>

#include "ugcsr/extractor.hpp"
#include "ugcsr/nn.hpp"
#include "ugcsr/tensor.hpp"

namespace ugcsr {

// Conditioning inputs for one noise prediction. prompt_tokens and semantic
// may be empty; lr_latent is required whenever the control branch is on and
// must match the working latent size (the LR image is bicubically upsampled
// to the output pixel size before encoding).
struct ConditioningBundle {
    LatentTensor lr_latent;  // (1, latent_ch, hl, wl) or default-empty
    Tensor prompt_tokens;    // (n_tokens, prompt_dim) or empty
    SemanticEmbedding semantic;

    bool has_lr() const { return !lr_latent.data.empty(); }
};

struct DenoiserConfig {
    size_t latent_channels = 4;
    std::vector<size_t> widths{32, 64, 128};     // one per resolution level
    std::vector<size_t> attention_levels{1, 2};  // carry PCA + SCA blocks
    size_t prompt_dim = 32;
    size_t semantic_dim = 32;  // must match the extractor embed dim
    size_t temb_dim = 64;
    bool control_branch = true;
    uint64_t seed = 303;

    void validate() const;
};

// Channel-mapping residual block with additive per-channel timestep shift.
struct CondResBlock {
    nn::GroupNorm gn1, gn2;
    nn::SiLU a1, a2, at;
    nn::Conv2d c1, c2, skip;
    nn::Linear temb_proj;
    bool has_skip = false;

    CondResBlock() = default;
    CondResBlock(size_t in_ch, size_t out_ch, size_t temb_dim, Rng& rng);
    Tensor forward(const Tensor& x, const Tensor& temb);  // temb (1, temb_dim)
    Tensor backward(const Tensor& gy, Tensor& gtemb);     // adds into gtemb
    void collect_params(nn::ParamRefs& out);
};

// Noise-prediction U-Net. Three parameter groups:
//   frozen backbone  — conv_in, timestep MLP, encoder/middle/decoder blocks
//   conditioning     — control branch, PCA/SCA attention blocks
//   output head      — zero-initialized projection back to latent channels
// Only the conditioning group and the head are trainable; the backbone is
// frozen at its random initialization, standing in for pretrained weights.
// Forward passes cache activations for backward(), so clone per thread.
class Denoiser {
public:
    explicit Denoiser(const DenoiserConfig& config = DenoiserConfig());

    // x_t (1, latent_ch, h, w); h and w divisible by 2^(levels-1).
    LatentTensor predict_noise(const LatentTensor& x_t, size_t t,
                               const ConditioningBundle& cond);
    // same network on a bare (latent_ch, h, w) map
    Tensor predict_noise_chw(const Tensor& x, size_t t, const ConditioningBundle& cond);

    // Backpropagates from the gradient of the last predict_noise output,
    // accumulating into all param grads; returns the gradient w.r.t. x_t.
    Tensor backward(const Tensor& g_eps);

    // Gated control residuals, one per decoder level (finest first); exactly
    // zero at initialization.
    std::vector<Tensor> control_branch_forward(const Tensor& x, size_t t,
                                               const Tensor& lr_latent);

    nn::ParamRefs parameters();
    nn::ParamRefs trainable_parameters();  // control + attention + head
    nn::ParamRefs frozen_parameters();
    uint64_t checksum() { return nn::params_checksum(parameters()); }
    uint64_t frozen_checksum() { return nn::params_checksum(frozen_parameters()); }
    const DenoiserConfig& config() const { return cfg_; }

    // attention blocks exposed for unit oracles
    std::vector<nn::CrossAttention> pca, sca;  // one per level; unused levels empty

private:
    Tensor temb_forward(size_t t);
    bool is_attn(size_t level) const;

    DenoiserConfig cfg_;
    size_t levels_ = 0;

    nn::Linear temb_l1_, temb_l2_;
    nn::SiLU temb_act_;
    nn::Conv2d conv_in_;
    std::vector<CondResBlock> enc_res_;
    std::vector<nn::Conv2d> enc_down_;
    CondResBlock mid1_, mid2_;
    std::vector<CondResBlock> dec_res_;
    std::vector<nn::Conv2d> dec_up_;
    std::vector<nn::Upsample2x> dec_upsample_;
    nn::GroupNorm head_gn_;
    nn::SiLU head_act_;
    nn::Conv2d head_out_;
    // control branch
    nn::Conv2d ctrl_in_;
    std::vector<CondResBlock> ctrl_res_;
    std::vector<nn::Conv2d> ctrl_down_;
    std::vector<nn::Conv2d> ctrl_gate_;  // zero-init 1x1

    // forward caches for backward()
    bool ran_ = false, used_control_ = false;
    std::vector<size_t> lr_shape_;
};

}  // namespace ugcsr
