#include "ugcsr/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ugcsr::nn {

void kaiming_init(Tensor& w, size_t fan_in, Rng& rng) {
    double std = std::sqrt(1.0 / static_cast<double>(std::max<size_t>(fan_in, 1)));
    for (size_t i = 0; i < w.size(); ++i) w[i] = rng.normal() * std;
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(size_t in_ch_, size_t out_ch_, size_t k_, size_t stride_, size_t pad_, Rng& rng,
               PadMode pm, bool zero_init)
    : in_ch(in_ch_), out_ch(out_ch_), k(k_), stride(stride_), pad(pad_), pad_mode(pm) {
    Tensor wt({out_ch, in_ch, k, k});
    if (!zero_init) kaiming_init(wt, in_ch * k * k, rng);
    w = Param("w", std::move(wt));
    b = Param("b", Tensor({out_ch}));
}

static inline long clampi(long v, long lo, long hi) { return v < lo ? lo : (v > hi ? hi : v); }

Tensor Conv2d::forward(const Tensor& x) {
    if (x.ndim() != 3 || x.dim(0) != in_ch) throw std::invalid_argument("Conv2d: bad input");
    x_ = x;
    long h = static_cast<long>(x.dim(1)), wd = static_cast<long>(x.dim(2));
    long oh = (h + 2 * static_cast<long>(pad) - static_cast<long>(k)) / static_cast<long>(stride) + 1;
    long ow = (wd + 2 * static_cast<long>(pad) - static_cast<long>(k)) / static_cast<long>(stride) + 1;
    if (oh < 1 || ow < 1) throw std::invalid_argument("Conv2d: input too small");
    Tensor y({out_ch, static_cast<size_t>(oh), static_cast<size_t>(ow)});
    for (size_t oc = 0; oc < out_ch; ++oc) {
        double bias = b.value[oc];
        for (long oy = 0; oy < oh; ++oy)
            for (long ox = 0; ox < ow; ++ox) {
                double acc = bias;
                for (size_t ic = 0; ic < in_ch; ++ic)
                    for (size_t ky = 0; ky < k; ++ky) {
                        long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                        if (pad_mode == PadMode::replicate)
                            iy = clampi(iy, 0, h - 1);
                        else if (iy < 0 || iy >= h)
                            continue;
                        for (size_t kx = 0; kx < k; ++kx) {
                            long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                            if (pad_mode == PadMode::replicate)
                                ix = clampi(ix, 0, wd - 1);
                            else if (ix < 0 || ix >= wd)
                                continue;
                            acc += w.value.at4(oc, ic, ky, kx) *
                                   x.at3(ic, static_cast<size_t>(iy), static_cast<size_t>(ix));
                        }
                    }
                y.at3(oc, static_cast<size_t>(oy), static_cast<size_t>(ox)) = acc;
            }
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
    long h = static_cast<long>(x_.dim(1)), wd = static_cast<long>(x_.dim(2));
    long oh = static_cast<long>(gy.dim(1)), ow = static_cast<long>(gy.dim(2));
    Tensor gx(x_.shape());
    for (size_t oc = 0; oc < out_ch; ++oc)
        for (long oy = 0; oy < oh; ++oy)
            for (long ox = 0; ox < ow; ++ox) {
                double g = gy.at3(oc, static_cast<size_t>(oy), static_cast<size_t>(ox));
                b.grad[oc] += g;
                for (size_t ic = 0; ic < in_ch; ++ic)
                    for (size_t ky = 0; ky < k; ++ky) {
                        long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                        if (pad_mode == PadMode::replicate)
                            iy = clampi(iy, 0, h - 1);
                        else if (iy < 0 || iy >= h)
                            continue;
                        for (size_t kx = 0; kx < k; ++kx) {
                            long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                            if (pad_mode == PadMode::replicate)
                                ix = clampi(ix, 0, wd - 1);
                            else if (ix < 0 || ix >= wd)
                                continue;
                            double xv = x_.at3(ic, static_cast<size_t>(iy), static_cast<size_t>(ix));
                            w.grad.at4(oc, ic, ky, kx) += g * xv;
                            gx.at3(ic, static_cast<size_t>(iy), static_cast<size_t>(ix)) +=
                                g * w.value.at4(oc, ic, ky, kx);
                        }
                    }
            }
    return gx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(size_t in_dim_, size_t out_dim_, Rng& rng, bool zero_init, bool bias)
    : in_dim(in_dim_), out_dim(out_dim_), has_bias(bias) {
    Tensor wt({out_dim, in_dim});
    if (!zero_init) kaiming_init(wt, in_dim, rng);
    w = Param("w", std::move(wt));
    if (has_bias) b = Param("b", Tensor({out_dim}));
}

Tensor Linear::forward(const Tensor& x) {
    if (x.ndim() != 2 || x.dim(1) != in_dim) throw std::invalid_argument("Linear: bad input");
    x_ = x;
    size_t n = x.dim(0);
    Tensor y({n, out_dim});
    for (size_t r = 0; r < n; ++r)
        for (size_t o = 0; o < out_dim; ++o) {
            double acc = has_bias ? b.value[o] : 0.0;
            for (size_t i = 0; i < in_dim; ++i) acc += x.at2(r, i) * w.value.at2(o, i);
            y.at2(r, o) = acc;
        }
    return y;
}

Tensor Linear::backward(const Tensor& gy) {
    size_t n = x_.dim(0);
    Tensor gx({n, in_dim});
    for (size_t r = 0; r < n; ++r)
        for (size_t o = 0; o < out_dim; ++o) {
            double g = gy.at2(r, o);
            if (has_bias) b.grad[o] += g;
            for (size_t i = 0; i < in_dim; ++i) {
                w.grad.at2(o, i) += g * x_.at2(r, i);
                gx.at2(r, i) += g * w.value.at2(o, i);
            }
        }
    return gx;
}

// ---------------------------------------------------------------- SiLU

Tensor SiLU::forward(const Tensor& x) {
    x_ = x;
    Tensor y = x;
    for (size_t i = 0; i < y.size(); ++i) {
        double s = 1.0 / (1.0 + std::exp(-x[i]));
        y[i] = x[i] * s;
    }
    return y;
}

Tensor SiLU::backward(const Tensor& gy) {
    Tensor gx = gy;
    for (size_t i = 0; i < gx.size(); ++i) {
        double s = 1.0 / (1.0 + std::exp(-x_[i]));
        gx[i] = gy[i] * s * (1.0 + x_[i] * (1.0 - s));
    }
    return gx;
}

// ---------------------------------------------------------------- GroupNorm

GroupNorm::GroupNorm(size_t channels_, size_t groups_, double eps_)
    : channels(channels_), groups(groups_), eps(eps_) {
    if (channels % groups != 0) throw std::invalid_argument("GroupNorm: channels % groups != 0");
    gamma = Param("gamma", Tensor({channels}, 1.0));
    beta = Param("beta", Tensor({channels}));
}

Tensor GroupNorm::forward(const Tensor& x) {
    if (x.ndim() != 3 || x.dim(0) != channels) throw std::invalid_argument("GroupNorm: bad input");
    size_t cpg = channels / groups, hw = x.dim(1) * x.dim(2);
    xhat_ = Tensor(x.shape());
    inv_std_.assign(groups, 0.0);
    Tensor y(x.shape());
    for (size_t g = 0; g < groups; ++g) {
        double mean = 0.0;
        size_t n = cpg * hw;
        for (size_t c = g * cpg; c < (g + 1) * cpg; ++c)
            for (size_t i = 0; i < hw; ++i) mean += x.data()[c * hw + i];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (size_t c = g * cpg; c < (g + 1) * cpg; ++c)
            for (size_t i = 0; i < hw; ++i) {
                double d = x.data()[c * hw + i] - mean;
                var += d * d;
            }
        var /= static_cast<double>(n);
        double is = 1.0 / std::sqrt(var + eps);
        inv_std_[g] = is;
        for (size_t c = g * cpg; c < (g + 1) * cpg; ++c)
            for (size_t i = 0; i < hw; ++i) {
                double xh = (x.data()[c * hw + i] - mean) * is;
                xhat_.data()[c * hw + i] = xh;
                y.data()[c * hw + i] = gamma.value[c] * xh + beta.value[c];
            }
    }
    return y;
}

Tensor GroupNorm::backward(const Tensor& gy) {
    size_t cpg = channels / groups, hw = xhat_.dim(1) * xhat_.dim(2);
    Tensor gx(xhat_.shape());
    for (size_t g = 0; g < groups; ++g) {
        size_t n = cpg * hw;
        double sum_gxh = 0.0, sum_gxh_xh = 0.0;
        for (size_t c = g * cpg; c < (g + 1) * cpg; ++c)
            for (size_t i = 0; i < hw; ++i) {
                size_t idx = c * hw + i;
                double gxh = gy.data()[idx] * gamma.value[c];
                sum_gxh += gxh;
                sum_gxh_xh += gxh * xhat_.data()[idx];
                gamma.grad[c] += gy.data()[idx] * xhat_.data()[idx];
                beta.grad[c] += gy.data()[idx];
            }
        double m1 = sum_gxh / static_cast<double>(n);
        double m2 = sum_gxh_xh / static_cast<double>(n);
        for (size_t c = g * cpg; c < (g + 1) * cpg; ++c)
            for (size_t i = 0; i < hw; ++i) {
                size_t idx = c * hw + i;
                double gxh = gy.data()[idx] * gamma.value[c];
                gx.data()[idx] = inv_std_[g] * (gxh - m1 - xhat_.data()[idx] * m2);
            }
    }
    return gx;
}

// ---------------------------------------------------------------- Upsample2x

Tensor Upsample2x::forward(const Tensor& x) {
    in_shape_ = x.shape();
    size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor y({c, 2 * h, 2 * w});
    for (size_t ch = 0; ch < c; ++ch)
        for (size_t yy = 0; yy < 2 * h; ++yy)
            for (size_t xx = 0; xx < 2 * w; ++xx)
                y.at3(ch, yy, xx) = x.at3(ch, yy / 2, xx / 2);
    return y;
}

Tensor Upsample2x::backward(const Tensor& gy) {
    Tensor gx(in_shape_);
    size_t c = in_shape_[0], h = in_shape_[1], w = in_shape_[2];
    for (size_t ch = 0; ch < c; ++ch)
        for (size_t yy = 0; yy < 2 * h; ++yy)
            for (size_t xx = 0; xx < 2 * w; ++xx)
                gx.at3(ch, yy / 2, xx / 2) += gy.at3(ch, yy, xx);
    return gx;
}

// ---------------------------------------------------------------- matmul/softmax

Tensor matmul(const Tensor& a, const Tensor& b) {
    size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
    if (b.dim(0) != k) throw std::invalid_argument("matmul: dim mismatch");
    Tensor y({n, m});
    for (size_t r = 0; r < n; ++r)
        for (size_t j = 0; j < k; ++j) {
            double av = a.at2(r, j);
            if (av == 0.0) continue;
            for (size_t c = 0; c < m; ++c) y.at2(r, c) += av * b.at2(j, c);
        }
    return y;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    size_t n = a.dim(0), k = a.dim(1), m = b.dim(0);
    if (b.dim(1) != k) throw std::invalid_argument("matmul_nt: dim mismatch");
    Tensor y({n, m});
    for (size_t r = 0; r < n; ++r)
        for (size_t c = 0; c < m; ++c) {
            double acc = 0.0;
            for (size_t j = 0; j < k; ++j) acc += a.at2(r, j) * b.at2(c, j);
            y.at2(r, c) = acc;
        }
    return y;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    size_t k = a.dim(0), n = a.dim(1), m = b.dim(1);
    if (b.dim(0) != k) throw std::invalid_argument("matmul_tn: dim mismatch");
    Tensor y({n, m});
    for (size_t j = 0; j < k; ++j)
        for (size_t r = 0; r < n; ++r) {
            double av = a.at2(j, r);
            if (av == 0.0) continue;
            for (size_t c = 0; c < m; ++c) y.at2(r, c) += av * b.at2(j, c);
        }
    return y;
}

Tensor softmax_rows(const Tensor& s) {
    Tensor y = s;
    size_t n = s.dim(0), m = s.dim(1);
    for (size_t r = 0; r < n; ++r) {
        double mx = -1e300;
        for (size_t c = 0; c < m; ++c) mx = std::max(mx, s.at2(r, c));
        double sum = 0.0;
        for (size_t c = 0; c < m; ++c) {
            double e = std::exp(s.at2(r, c) - mx);
            y.at2(r, c) = e;
            sum += e;
        }
        for (size_t c = 0; c < m; ++c) y.at2(r, c) /= sum;
    }
    return y;
}

Tensor softmax_rows_backward(const Tensor& y, const Tensor& gy) {
    Tensor gs = gy;
    size_t n = y.dim(0), m = y.dim(1);
    for (size_t r = 0; r < n; ++r) {
        double dot = 0.0;
        for (size_t c = 0; c < m; ++c) dot += gy.at2(r, c) * y.at2(r, c);
        for (size_t c = 0; c < m; ++c) gs.at2(r, c) = y.at2(r, c) * (gy.at2(r, c) - dot);
    }
    return gs;
}

// ---------------------------------------------------------------- CrossAttention

CrossAttention::CrossAttention(size_t channels_, size_t ctx_dim_, size_t head_dim_, Rng& rng)
    : channels(channels_), ctx_dim(ctx_dim_), head_dim(head_dim_) {
    wq = Linear(channels, head_dim, rng, false, false);
    wk = Linear(ctx_dim, head_dim, rng, false, false);
    wv = Linear(ctx_dim, head_dim, rng, false, false);
    wo = Linear(head_dim, channels, rng, /*zero_init=*/true, false);
}

static Tensor flatten_hw(const Tensor& feat) {
    size_t c = feat.dim(0), hw = feat.dim(1) * feat.dim(2);
    Tensor rows({hw, c});
    for (size_t ch = 0; ch < c; ++ch)
        for (size_t i = 0; i < hw; ++i) rows.at2(i, ch) = feat.data()[ch * hw + i];
    return rows;
}

static Tensor unflatten_hw(const Tensor& rows, const std::vector<size_t>& shape) {
    size_t c = shape[0], hw = shape[1] * shape[2];
    Tensor feat(shape);
    for (size_t ch = 0; ch < c; ++ch)
        for (size_t i = 0; i < hw; ++i) feat.data()[ch * hw + i] = rows.at2(i, ch);
    return feat;
}

Tensor CrossAttention::forward(const Tensor& feat, const Tensor& ctx, const Tensor& pos) {
    feat_shape_ = feat.shape();
    if (ctx.empty()) {  // skip-on-empty: the block is the identity
        skipped_ = true;
        return feat;
    }
    skipped_ = false;
    if (ctx.dim(1) != ctx_dim) throw std::invalid_argument("CrossAttention: ctx dim mismatch");
    Tensor kin = ctx;
    if (!pos.empty()) {
        if (!pos.same_shape(ctx))
            throw std::invalid_argument("CrossAttention: pos/ctx shape mismatch");
        kin += pos;
    }
    xrows_ = flatten_hw(feat);
    q_ = wq.forward(xrows_);
    kmat_ = wk.forward(kin);
    vmat_ = wv.forward(ctx);
    Tensor s = matmul_nt(q_, kmat_);
    s *= 1.0 / std::sqrt(static_cast<double>(head_dim));
    attn_ = softmax_rows(s);
    Tensor o = matmul(attn_, vmat_);
    Tensor y = wo.forward(o);
    return feat + unflatten_hw(y, feat_shape_);
}

Tensor CrossAttention::backward(const Tensor& gy) {
    if (skipped_) return gy;
    Tensor gy_rows = flatten_hw(gy);
    Tensor go = wo.backward(gy_rows);
    Tensor ga = matmul_nt(go, vmat_);
    Tensor gv = matmul_tn(attn_, go);
    Tensor gs = softmax_rows_backward(attn_, ga);
    gs *= 1.0 / std::sqrt(static_cast<double>(head_dim));
    Tensor gq = matmul(gs, kmat_);
    Tensor gk = matmul_tn(gs, q_);
    wk.backward(gk);  // ctx inputs are frozen upstream; their grads are dropped
    wv.backward(gv);
    Tensor gx_rows = wq.backward(gq);
    return gy + unflatten_hw(gx_rows, feat_shape_);
}

// ---------------------------------------------------------------- embeddings

Tensor timestep_embedding(size_t t, size_t dim) {
    if (dim % 2 != 0) throw std::invalid_argument("timestep_embedding: dim must be even");
    size_t half = dim / 2;
    Tensor e({1, dim});
    for (size_t i = 0; i < half; ++i) {
        double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                               static_cast<double>(half));
        e.at2(0, i) = std::sin(static_cast<double>(t) * freq);
        e.at2(0, half + i) = std::cos(static_cast<double>(t) * freq);
    }
    return e;
}

Tensor positional_encoding_2d(size_t h, size_t w, size_t dim) {
    if (dim % 4 != 0) throw std::invalid_argument("positional_encoding_2d: dim % 4 != 0");
    size_t q = dim / 4;
    Tensor pe({h * w, dim});
    for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < w; ++x) {
            size_t r = y * w + x;
            for (size_t i = 0; i < q; ++i) {
                double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                                       static_cast<double>(q));
                pe.at2(r, i) = std::sin(static_cast<double>(y) * freq);
                pe.at2(r, q + i) = std::cos(static_cast<double>(y) * freq);
                pe.at2(r, 2 * q + i) = std::sin(static_cast<double>(x) * freq);
                pe.at2(r, 3 * q + i) = std::cos(static_cast<double>(x) * freq);
            }
        }
    return pe;
}

// ---------------------------------------------------------------- Adam

Adam::Adam(ParamRefs params, double lr_, double beta1, double beta2, double eps)
    : lr(lr_), params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (Param* p : params_) {
        m_.emplace_back(p->value.shape());
        v_.emplace_back(p->value.shape());
    }
}

void Adam::step() {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t pi = 0; pi < params_.size(); ++pi) {
        Param* p = params_[pi];
        for (size_t i = 0; i < p->value.size(); ++i) {
            double g = p->grad[i];
            m_[pi][i] = beta1_ * m_[pi][i] + (1.0 - beta1_) * g;
            v_[pi][i] = beta2_ * v_[pi][i] + (1.0 - beta2_) * g * g;
            double mhat = m_[pi][i] / bc1;
            double vhat = v_[pi][i] / bc2;
            p->value[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::zero_grad() {
    for (Param* p : params_) p->zero_grad();
}

}  // namespace ugcsr::nn
