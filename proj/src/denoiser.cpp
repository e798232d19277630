#include "ugcsr/denoiser.hpp"

#include <stdexcept>
#include <string>

namespace ugcsr {

namespace {

size_t groups_for(size_t ch) { return ch % 4 == 0 ? 4 : 1; }

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
        throw std::invalid_argument("concat_channels: spatial mismatch");
    Tensor out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
    size_t na = a.size();
    for (size_t i = 0; i < na; ++i) out[i] = a[i];
    for (size_t i = 0; i < b.size(); ++i) out[na + i] = b[i];
    return out;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& g, size_t ca) {
    Tensor a({ca, g.dim(1), g.dim(2)});
    Tensor b({g.dim(0) - ca, g.dim(1), g.dim(2)});
    for (size_t i = 0; i < a.size(); ++i) a[i] = g[i];
    for (size_t i = 0; i < b.size(); ++i) b[i] = g[a.size() + i];
    return {a, b};
}

Tensor squeeze_batch(const Tensor& t) {
    if (t.ndim() != 4 || t.dim(0) != 1)
        throw std::invalid_argument("expected a (1,c,h,w) tensor");
    Tensor out({t.dim(1), t.dim(2), t.dim(3)});
    for (size_t i = 0; i < out.size(); ++i) out[i] = t[i];
    return out;
}

Tensor unsqueeze_batch(const Tensor& t) {
    Tensor out({1, t.dim(0), t.dim(1), t.dim(2)});
    for (size_t i = 0; i < out.size(); ++i) out[i] = t[i];
    return out;
}

}  // namespace

void DenoiserConfig::validate() const {
    if (latent_channels == 0) throw std::invalid_argument("latent_channels must be > 0");
    if (widths.empty()) throw std::invalid_argument("need at least one resolution level");
    for (size_t w : widths)
        if (w == 0) throw std::invalid_argument("level width must be > 0");
    if (attention_levels.empty())
        throw std::invalid_argument("at least one level must carry PCA and SCA blocks");
    for (size_t l : attention_levels)
        if (l >= widths.size())
            throw std::invalid_argument("attention level out of range");
    if (prompt_dim == 0 || semantic_dim == 0 || temb_dim == 0)
        throw std::invalid_argument("embedding dims must be > 0");
}

CondResBlock::CondResBlock(size_t in_ch, size_t out_ch, size_t temb_dim, Rng& rng)
    : gn1(in_ch, groups_for(in_ch)),
      gn2(out_ch, groups_for(out_ch)),
      c1(in_ch, out_ch, 3, 1, 1, rng),
      c2(out_ch, out_ch, 3, 1, 1, rng),
      temb_proj(temb_dim, out_ch, rng),
      has_skip(in_ch != out_ch) {
    if (has_skip) skip = nn::Conv2d(in_ch, out_ch, 1, 1, 0, rng);
}

Tensor CondResBlock::forward(const Tensor& x, const Tensor& temb) {
    Tensor h = c1.forward(a1.forward(gn1.forward(x)));
    Tensor tv = temb_proj.forward(at.forward(temb));  // (1, out_ch)
    size_t hw = h.dim(1) * h.dim(2);
    for (size_t c = 0; c < h.dim(0); ++c)
        for (size_t i = 0; i < hw; ++i) h.data()[c * hw + i] += tv[c];
    Tensor y = c2.forward(a2.forward(gn2.forward(h)));
    return y + (has_skip ? skip.forward(x) : x);
}

Tensor CondResBlock::backward(const Tensor& gy, Tensor& gtemb) {
    Tensor g = gn2.backward(a2.backward(c2.backward(gy)));
    Tensor gtv({1, g.dim(0)});
    size_t hw = g.dim(1) * g.dim(2);
    for (size_t c = 0; c < g.dim(0); ++c) {
        double acc = 0.0;
        for (size_t i = 0; i < hw; ++i) acc += g.data()[c * hw + i];
        gtv.at2(0, c) = acc;
    }
    gtemb += at.backward(temb_proj.backward(gtv));
    Tensor gx = gn1.backward(a1.backward(c1.backward(g)));
    return gx + (has_skip ? skip.backward(gy) : gy);
}

void CondResBlock::collect_params(nn::ParamRefs& out) {
    gn1.collect_params(out);
    c1.collect_params(out);
    temb_proj.collect_params(out);
    gn2.collect_params(out);
    c2.collect_params(out);
    if (has_skip) skip.collect_params(out);
}

Denoiser::Denoiser(const DenoiserConfig& config) : cfg_(config) {
    cfg_.validate();
    levels_ = cfg_.widths.size();
    Rng rng(cfg_.seed);

    // backbone first, so toggling the control branch leaves it bit-identical
    temb_l1_ = nn::Linear(cfg_.temb_dim, cfg_.temb_dim, rng);
    temb_l2_ = nn::Linear(cfg_.temb_dim, cfg_.temb_dim, rng);
    conv_in_ = nn::Conv2d(cfg_.latent_channels, cfg_.widths[0], 3, 1, 1, rng);
    for (size_t i = 0; i < levels_; ++i) {
        enc_res_.emplace_back(cfg_.widths[i], cfg_.widths[i], cfg_.temb_dim, rng);
        if (i + 1 < levels_)
            enc_down_.emplace_back(cfg_.widths[i], cfg_.widths[i + 1], 3, 2, 1, rng);
    }
    size_t deep = cfg_.widths.back();
    mid1_ = CondResBlock(deep, deep, cfg_.temb_dim, rng);
    mid2_ = CondResBlock(deep, deep, cfg_.temb_dim, rng);
    dec_res_.resize(levels_);
    dec_up_.resize(levels_);
    dec_upsample_.resize(levels_);
    for (size_t i = levels_; i-- > 0;) {
        dec_res_[i] = CondResBlock(2 * cfg_.widths[i], cfg_.widths[i], cfg_.temb_dim, rng);
        if (i > 0) dec_up_[i] = nn::Conv2d(cfg_.widths[i], cfg_.widths[i - 1], 3, 1, 1, rng);
    }
    pca.resize(levels_);
    sca.resize(levels_);
    for (size_t l : cfg_.attention_levels) {
        pca[l] = nn::CrossAttention(cfg_.widths[l], cfg_.prompt_dim, cfg_.widths[l], rng);
        sca[l] = nn::CrossAttention(cfg_.widths[l], cfg_.semantic_dim, cfg_.widths[l], rng);
    }
    head_gn_ = nn::GroupNorm(cfg_.widths[0], groups_for(cfg_.widths[0]));
    head_out_ = nn::Conv2d(cfg_.widths[0], cfg_.latent_channels, 3, 1, 1, rng,
                           nn::PadMode::zero, /*zero_init=*/true);
    if (cfg_.control_branch) {
        ctrl_in_ = nn::Conv2d(2 * cfg_.latent_channels, cfg_.widths[0], 3, 1, 1, rng);
        for (size_t i = 0; i < levels_; ++i) {
            ctrl_res_.emplace_back(cfg_.widths[i], cfg_.widths[i], cfg_.temb_dim, rng);
            if (i + 1 < levels_)
                ctrl_down_.emplace_back(cfg_.widths[i], cfg_.widths[i + 1], 3, 2, 1, rng);
            ctrl_gate_.emplace_back(cfg_.widths[i], cfg_.widths[i], 1, 1, 0, rng,
                                    nn::PadMode::zero, /*zero_init=*/true);
        }
    }
}

bool Denoiser::is_attn(size_t level) const { return pca[level].channels != 0; }

Tensor Denoiser::temb_forward(size_t t) {
    return temb_l2_.forward(temb_act_.forward(
        temb_l1_.forward(nn::timestep_embedding(t, cfg_.temb_dim))));
}

std::vector<Tensor> Denoiser::control_branch_forward(const Tensor& x, size_t t,
                                                     const Tensor& lr_latent) {
    if (!cfg_.control_branch) throw std::logic_error("control branch is disabled");
    if (lr_latent.empty()) throw std::invalid_argument("control branch needs lr_latent");
    if (!x.same_shape(lr_latent))
        throw std::invalid_argument("lr_latent shape must match x_t");
    Tensor temb = temb_forward(t);
    Tensor c = ctrl_in_.forward(concat_channels(x, lr_latent));
    std::vector<Tensor> residuals(levels_);
    for (size_t i = 0; i < levels_; ++i) {
        c = ctrl_res_[i].forward(c, temb);
        residuals[i] = ctrl_gate_[i].forward(c);
        if (i + 1 < levels_) c = ctrl_down_[i].forward(c);
    }
    return residuals;
}

Tensor Denoiser::predict_noise_chw(const Tensor& x, size_t t, const ConditioningBundle& cond) {
    if (x.ndim() != 3 || x.dim(0) != cfg_.latent_channels)
        throw std::invalid_argument("predict_noise: expected (" +
                                    std::to_string(cfg_.latent_channels) + ",h,w) input");
    size_t div = size_t(1) << (levels_ - 1);
    if (x.dim(1) % div != 0 || x.dim(2) % div != 0)
        throw std::invalid_argument("predict_noise: spatial dims must divide " +
                                    std::to_string(div));
    if (cfg_.control_branch && !cond.has_lr())
        throw std::invalid_argument("control branch needs cond.lr_latent");
    if (!cond.prompt_tokens.empty() && cond.prompt_tokens.dim(1) != cfg_.prompt_dim)
        throw std::invalid_argument("prompt token dim mismatch");
    if (!cond.semantic.empty() && cond.semantic.dim != cfg_.semantic_dim)
        throw std::invalid_argument("semantic embedding dim mismatch");

    Tensor temb = temb_forward(t);
    std::vector<Tensor> residuals;
    used_control_ = cfg_.control_branch;
    if (used_control_) {
        Tensor lr = squeeze_batch(cond.lr_latent.data);
        if (!lr.same_shape(x)) throw std::invalid_argument("lr_latent shape must match x_t");
        lr_shape_ = lr.shape();
        Tensor c = ctrl_in_.forward(concat_channels(x, lr));
        residuals.resize(levels_);
        for (size_t i = 0; i < levels_; ++i) {
            c = ctrl_res_[i].forward(c, temb);
            residuals[i] = ctrl_gate_[i].forward(c);
            if (i + 1 < levels_) c = ctrl_down_[i].forward(c);
        }
    }

    Tensor sem_feat, sem_pos;
    if (!cond.semantic.empty()) {
        sem_feat = cond.semantic.finest().features;
        sem_pos = cond.semantic.finest().pos_encoding;
    }

    Tensor h = conv_in_.forward(x);
    std::vector<Tensor> skips(levels_);
    for (size_t i = 0; i < levels_; ++i) {
        h = enc_res_[i].forward(h, temb);
        skips[i] = used_control_ ? h + residuals[i] : h;
        if (i + 1 < levels_) h = enc_down_[i].forward(h);
    }
    h = mid2_.forward(mid1_.forward(h, temb), temb);
    for (size_t i = levels_; i-- > 0;) {
        h = dec_res_[i].forward(concat_channels(h, skips[i]), temb);
        if (is_attn(i)) {
            h = pca[i].forward(h, cond.prompt_tokens);
            h = sca[i].forward(h, sem_feat, sem_pos);
        }
        if (i > 0) h = dec_up_[i].forward(dec_upsample_[i].forward(h));
    }
    Tensor out = head_out_.forward(head_act_.forward(head_gn_.forward(h)));
    if (!out.all_finite()) throw std::runtime_error("predict_noise: non-finite output");
    ran_ = true;
    return out;
}

LatentTensor Denoiser::predict_noise(const LatentTensor& x_t, size_t t,
                                     const ConditioningBundle& cond) {
    if (x_t.space != Space::latent)
        throw std::invalid_argument("predict_noise: input must be in latent space");
    Tensor out = predict_noise_chw(squeeze_batch(x_t.data), t, cond);
    return LatentTensor(unsqueeze_batch(out), Space::latent);
}

Tensor Denoiser::backward(const Tensor& g_eps) {
    if (!ran_) throw std::logic_error("backward without a preceding predict_noise");
    Tensor gtemb({1, cfg_.temb_dim});
    Tensor g = head_gn_.backward(head_act_.backward(head_out_.backward(g_eps)));

    std::vector<Tensor> gskips(levels_);
    for (size_t i = 0; i < levels_; ++i) {
        if (i > 0) g = dec_upsample_[i].backward(dec_up_[i].backward(g));
        if (is_attn(i)) {
            g = sca[i].backward(g);
            g = pca[i].backward(g);
        }
        g = dec_res_[i].backward(g, gtemb);
        auto [gh, gs] = split_channels(g, cfg_.widths[i]);
        gskips[i] = std::move(gs);
        g = std::move(gh);
    }
    g = mid1_.backward(mid2_.backward(g, gtemb), gtemb);

    for (size_t i = levels_; i-- > 0;) {
        Tensor gpre = gskips[i];
        gpre += (i + 1 < levels_) ? enc_down_[i].backward(g) : g;
        g = enc_res_[i].backward(gpre, gtemb);
    }
    Tensor gx = conv_in_.backward(g);

    if (used_control_) {
        Tensor gc;
        for (size_t i = levels_; i-- > 0;) {
            Tensor gpost = ctrl_gate_[i].backward(gskips[i]);
            if (i + 1 < levels_) gpost += ctrl_down_[i].backward(gc);
            gc = ctrl_res_[i].backward(gpost, gtemb);
        }
        // upstream of lr_latent is the frozen encoder, so that half is dropped
        gx += split_channels(ctrl_in_.backward(gc), cfg_.latent_channels).first;
    }

    temb_l1_.backward(temb_act_.backward(temb_l2_.backward(gtemb)));
    return gx;
}

nn::ParamRefs Denoiser::trainable_parameters() {
    nn::ParamRefs out;
    if (cfg_.control_branch) {
        ctrl_in_.collect_params(out);
        for (auto& b : ctrl_res_) b.collect_params(out);
        for (auto& c : ctrl_down_) c.collect_params(out);
        for (auto& c : ctrl_gate_) c.collect_params(out);
    }
    for (size_t i = 0; i < levels_; ++i)
        if (is_attn(i)) {
            pca[i].collect_params(out);
            sca[i].collect_params(out);
        }
    head_gn_.collect_params(out);
    head_out_.collect_params(out);
    return out;
}

nn::ParamRefs Denoiser::frozen_parameters() {
    nn::ParamRefs out;
    temb_l1_.collect_params(out);
    temb_l2_.collect_params(out);
    conv_in_.collect_params(out);
    for (auto& b : enc_res_) b.collect_params(out);
    for (auto& c : enc_down_) c.collect_params(out);
    mid1_.collect_params(out);
    mid2_.collect_params(out);
    for (auto& b : dec_res_) b.collect_params(out);
    for (size_t i = 1; i < levels_; ++i) dec_up_[i].collect_params(out);
    return out;
}

nn::ParamRefs Denoiser::parameters() {
    nn::ParamRefs out = frozen_parameters();
    nn::ParamRefs tr = trainable_parameters();
    out.insert(out.end(), tr.begin(), tr.end());
    return out;
}

}  // namespace ugcsr
