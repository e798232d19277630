#include "ugcsr/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ugcsr {

namespace {
size_t pick_groups(size_t ch) { return ch % 4 == 0 ? 4 : 1; }

size_t ilog2(size_t v) {
    size_t n = 0;
    while (v > 1) {
        if (v % 2 != 0) throw std::invalid_argument("downscale_factor must be a power of 2");
        v /= 2;
        ++n;
    }
    return n;
}

size_t stage_width(size_t base, size_t i) { return base * std::min<size_t>(1ull << i, 4); }
}  // namespace

void AutoencoderConfig::validate() const {
    ilog2(downscale_factor);
    if (downscale_factor < 2) throw std::invalid_argument("downscale_factor must be >= 2");
    if (latent_channels < 1) throw std::invalid_argument("latent_channels must be >= 1");
    if (base_width < 1) throw std::invalid_argument("base_width must be >= 1");
    if (kl_weight < 0.0) throw std::invalid_argument("kl_weight must be >= 0");
}

VaeLossParts vae_loss(const Tensor& img, const Tensor& mean, const Tensor& logvar,
                      const Tensor& recon, double kl_weight) {
    if (!img.same_shape(recon)) throw std::invalid_argument("vae_loss: img/recon shape mismatch");
    if (!mean.same_shape(logvar)) throw std::invalid_argument("vae_loss: mean/logvar mismatch");
    VaeLossParts parts;
    parts.recon = img.mse(recon);
    double kl = 0.0;
    for (size_t i = 0; i < mean.size(); ++i) {
        double m = mean[i], lv = logvar[i];
        kl += 0.5 * (m * m + std::exp(lv) - 1.0 - lv);
    }
    parts.kl = mean.size() ? kl / static_cast<double>(mean.size()) : 0.0;
    if (!std::isfinite(parts.recon) || !std::isfinite(parts.kl))
        throw std::runtime_error("vae_loss: non-finite loss term");
    parts.total = parts.recon + kl_weight * parts.kl;
    return parts;
}

VaeResBlock::VaeResBlock(size_t ch, Rng& rng)
    : gn1(ch, pick_groups(ch)),
      gn2(ch, pick_groups(ch)),
      c1(ch, ch, 3, 1, 1, rng),
      c2(ch, ch, 3, 1, 1, rng) {}

Tensor VaeResBlock::forward(const Tensor& x) {
    Tensor h = c1.forward(a1.forward(gn1.forward(x)));
    h = c2.forward(a2.forward(gn2.forward(h)));
    return x + h;
}

Tensor VaeResBlock::backward(const Tensor& gy) {
    Tensor g = gn2.backward(a2.backward(c2.backward(gy)));
    g = gn1.backward(a1.backward(c1.backward(g)));
    return gy + g;
}

void VaeResBlock::collect_params(nn::ParamRefs& out) {
    gn1.collect_params(out);
    c1.collect_params(out);
    gn2.collect_params(out);
    c2.collect_params(out);
}

Autoencoder::Autoencoder(const AutoencoderConfig& config) : cfg_(config) {
    cfg_.validate();
    stages_ = ilog2(cfg_.downscale_factor);
    Rng rng(cfg_.seed);
    size_t w = cfg_.base_width;

    enc_in_ = nn::Conv2d(3, w, 3, 1, 1, rng);
    size_t cur = w;
    for (size_t i = 0; i < stages_; ++i) {
        enc_blocks_.emplace_back(cur, rng);
        size_t next = stage_width(w, i + 1);
        enc_down_.emplace_back(cur, next, 3, 2, 1, rng);
        cur = next;
    }
    enc_mid_ = VaeResBlock(cur, rng);
    enc_out_gn_ = nn::GroupNorm(cur, pick_groups(cur));
    enc_out_ = nn::Conv2d(cur, 2 * cfg_.latent_channels, 3, 1, 1, rng);

    dec_in_ = nn::Conv2d(cfg_.latent_channels, cur, 3, 1, 1, rng);
    dec_mid_ = VaeResBlock(cur, rng);
    for (size_t i = stages_; i-- > 0;) {
        size_t next = stage_width(w, i);
        dec_upsample_.emplace_back();
        dec_up_.emplace_back(cur, next, 3, 1, 1, rng);
        dec_blocks_.emplace_back(next, rng);
        cur = next;
    }
    dec_out_gn_ = nn::GroupNorm(cur, pick_groups(cur));
    dec_out_ = nn::Conv2d(cur, 3, 3, 1, 1, rng);
}

Tensor Autoencoder::encode_one(const Tensor& img) {
    // rescale [0,1] -> [-1,1]
    Tensor x = img;
    for (size_t i = 0; i < x.size(); ++i) x[i] = 2.0 * x[i] - 1.0;
    Tensor h = enc_in_.forward(x);
    for (size_t i = 0; i < stages_; ++i) {
        h = enc_blocks_[i].forward(h);
        h = enc_down_[i].forward(h);
    }
    h = enc_mid_.forward(h);
    h = enc_out_.forward(enc_out_act_.forward(enc_out_gn_.forward(h)));
    return h;
}

Tensor Autoencoder::encode_backward(const Tensor& gy) {
    Tensor g = enc_out_gn_.backward(enc_out_act_.backward(enc_out_.backward(gy)));
    g = enc_mid_.backward(g);
    for (size_t i = stages_; i-- > 0;) {
        g = enc_down_[i].backward(g);
        g = enc_blocks_[i].backward(g);
    }
    g = enc_in_.backward(g);
    g *= 2.0;  // input rescale chain rule (unused upstream, kept for symmetry)
    return g;
}

Tensor Autoencoder::decode_one_raw(const Tensor& z) {
    if (z.dim(0) != cfg_.latent_channels)
        throw std::invalid_argument("decode: wrong latent channel count");
    Tensor h = dec_in_.forward(z);
    h = dec_mid_.forward(h);
    for (size_t i = 0; i < stages_; ++i) {
        h = dec_up_[i].forward(dec_upsample_[i].forward(h));
        h = dec_blocks_[i].forward(h);
    }
    Tensor y = dec_out_.forward(dec_out_act_.forward(dec_out_gn_.forward(h)));
    // [-1,1] -> [0,1], unclamped
    for (size_t i = 0; i < y.size(); ++i) y[i] = 0.5 * (y[i] + 1.0);
    return y;
}

Tensor Autoencoder::decode_backward(const Tensor& gy01) {
    Tensor g = gy01;
    g *= 0.5;
    g = dec_out_gn_.backward(dec_out_act_.backward(dec_out_.backward(g)));
    for (size_t i = stages_; i-- > 0;) {
        g = dec_blocks_[i].backward(g);
        g = dec_upsample_[i].backward(dec_up_[i].backward(g));
    }
    g = dec_mid_.backward(g);
    g = dec_in_.backward(g);
    return g;
}

std::pair<LatentTensor, LatentTensor> Autoencoder::encode(const Tensor& img_batch) {
    if (img_batch.ndim() != 4 || img_batch.dim(1) != 3)
        throw std::invalid_argument("encode: want (b,3,h,w)");
    if (img_batch.dim(2) % cfg_.downscale_factor != 0 ||
        img_batch.dim(3) % cfg_.downscale_factor != 0)
        throw std::invalid_argument("encode: spatial dims not divisible by downscale_factor");
    if (!img_batch.all_finite()) throw std::invalid_argument("encode: non-finite input");
    size_t b = img_batch.dim(0), h = img_batch.dim(2), w = img_batch.dim(3);
    size_t hl = h / cfg_.downscale_factor, wl = w / cfg_.downscale_factor;
    Tensor mean({b, cfg_.latent_channels, hl, wl}), logvar({b, cfg_.latent_channels, hl, wl});
    for (size_t bi = 0; bi < b; ++bi) {
        Tensor one({3, h, w});
        for (size_t i = 0; i < one.size(); ++i)
            one[i] = img_batch.data()[bi * one.size() + i];
        Tensor ml = encode_one(one);
        size_t plane = hl * wl;
        for (size_t c = 0; c < cfg_.latent_channels; ++c)
            for (size_t i = 0; i < plane; ++i) {
                mean.data()[(bi * cfg_.latent_channels + c) * plane + i] =
                    ml.data()[c * plane + i];
                logvar.data()[(bi * cfg_.latent_channels + c) * plane + i] =
                    ml.data()[(cfg_.latent_channels + c) * plane + i];
            }
    }
    return {LatentTensor(mean, Space::latent), LatentTensor(logvar, Space::latent)};
}

Tensor Autoencoder::decode(const Tensor& z) {
    if (z.ndim() != 4) throw std::invalid_argument("decode: want (b,c,h,w)");
    if (z.dim(1) != cfg_.latent_channels)
        throw std::invalid_argument("decode: wrong latent channel count");
    size_t b = z.dim(0), hl = z.dim(2), wl = z.dim(3);
    size_t h = hl * cfg_.downscale_factor, w = wl * cfg_.downscale_factor;
    Tensor out({b, 3, h, w});
    for (size_t bi = 0; bi < b; ++bi) {
        Tensor one({cfg_.latent_channels, hl, wl});
        for (size_t i = 0; i < one.size(); ++i) one[i] = z.data()[bi * one.size() + i];
        Tensor y = decode_one_raw(one);
        for (size_t i = 0; i < y.size(); ++i) {
            double v = y[i];
            out.data()[bi * y.size() + i] = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        }
    }
    return out;
}

VaeLossParts Autoencoder::train_step(const Tensor& img, const Tensor& latent_noise) {
    if (img.ndim() != 3 || img.dim(0) != 3) throw std::invalid_argument("train_step: want (3,h,w)");
    Tensor ml = encode_one(img);
    size_t lc = cfg_.latent_channels, plane = ml.dim(1) * ml.dim(2);
    Tensor mean({lc, ml.dim(1), ml.dim(2)}), logvar({lc, ml.dim(1), ml.dim(2)});
    for (size_t i = 0; i < lc * plane; ++i) {
        mean[i] = ml[i];
        logvar[i] = ml[lc * plane + i];
    }
    if (!latent_noise.same_shape(mean))
        throw std::invalid_argument("train_step: latent noise shape mismatch");

    Tensor z = mean;
    for (size_t i = 0; i < z.size(); ++i)
        z[i] = mean[i] + std::exp(0.5 * logvar[i]) * latent_noise[i];
    Tensor recon = decode_one_raw(z);
    VaeLossParts parts = vae_loss(img, mean, logvar, recon, cfg_.kl_weight);

    // backward: reconstruction term
    size_t np = img.size(), nl = mean.size();
    Tensor grecon(recon.shape());
    for (size_t i = 0; i < np; ++i)
        grecon[i] = 2.0 * (recon[i] - img[i]) / static_cast<double>(np);
    Tensor gz = decode_backward(grecon);

    // split into mean/logvar grads, add KL term
    Tensor gml(ml.shape());
    for (size_t i = 0; i < nl; ++i) {
        double glv_recon = gz[i] * latent_noise[i] * 0.5 * std::exp(0.5 * logvar[i]);
        gml[i] = gz[i] + cfg_.kl_weight * mean[i] / static_cast<double>(nl);
        gml[nl + i] = glv_recon +
                      cfg_.kl_weight * 0.5 * (std::exp(logvar[i]) - 1.0) / static_cast<double>(nl);
    }
    encode_backward(gml);
    return parts;
}

nn::ParamRefs Autoencoder::parameters() {
    nn::ParamRefs ps;
    enc_in_.collect_params(ps);
    for (auto& b : enc_blocks_) b.collect_params(ps);
    for (auto& d : enc_down_) d.collect_params(ps);
    enc_mid_.collect_params(ps);
    enc_out_gn_.collect_params(ps);
    enc_out_.collect_params(ps);
    dec_in_.collect_params(ps);
    dec_mid_.collect_params(ps);
    for (size_t i = 0; i < dec_up_.size(); ++i) {
        dec_up_[i].collect_params(ps);
        dec_blocks_[i].collect_params(ps);
    }
    dec_out_gn_.collect_params(ps);
    dec_out_.collect_params(ps);
    return ps;
}

}  // namespace ugcsr
