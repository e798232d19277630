#pragma once

#include <string>
#include <vector>

#include "ugcsr/tensor.hpp"

namespace ugcsr::nn {

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param() = default;
    Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
    void zero_grad() { grad.fill(0.0); }
};

using ParamRefs = std::vector<Param*>;

inline uint64_t params_checksum(const ParamRefs& ps) {
    uint64_t h = 14695981039346656037ull;
    for (const Param* p : ps) h = fnv1a(p->value.data(), p->value.size() * sizeof(double), h);
    return h;
}

inline size_t params_count(const ParamRefs& ps) {
    size_t n = 0;
    for (const Param* p : ps) n += p->value.size();
    return n;
}

void kaiming_init(Tensor& w, size_t fan_in, Rng& rng);

enum class PadMode { zero, replicate };

// 2-D convolution on (c,h,w) feature maps. backward() accumulates into
// param grads and returns the input gradient.
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(size_t in_ch, size_t out_ch, size_t k, size_t stride, size_t pad, Rng& rng,
           PadMode pad_mode = PadMode::zero, bool zero_init = false);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);
    void collect_params(ParamRefs& out) {
        out.push_back(&w);
        out.push_back(&b);
    }

    Param w, b;
    size_t in_ch = 0, out_ch = 0, k = 1, stride = 1, pad = 0;
    PadMode pad_mode = PadMode::zero;

private:
    Tensor x_;
};

// y = x W^T + b on (n, in) rows.
class Linear {
public:
    Linear() = default;
    Linear(size_t in_dim, size_t out_dim, Rng& rng, bool zero_init = false, bool bias = true);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);
    void collect_params(ParamRefs& out) {
        out.push_back(&w);
        if (has_bias) out.push_back(&b);
    }

    Param w, b;
    size_t in_dim = 0, out_dim = 0;
    bool has_bias = true;

private:
    Tensor x_;
};

class SiLU {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);

private:
    Tensor x_;
};

class GroupNorm {
public:
    GroupNorm() = default;
    GroupNorm(size_t channels, size_t groups, double eps = 1e-5);

    Tensor forward(const Tensor& x);  // (c,h,w)
    Tensor backward(const Tensor& gy);
    void collect_params(ParamRefs& out) {
        out.push_back(&gamma);
        out.push_back(&beta);
    }

    Param gamma, beta;
    size_t channels = 0, groups = 1;
    double eps = 1e-5;

private:
    Tensor xhat_;
    std::vector<double> inv_std_;
};

// Nearest-neighbor 2x upsample; backward is 2x2 gradient pooling.
class Upsample2x {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);

private:
    std::vector<size_t> in_shape_;
};

Tensor softmax_rows(const Tensor& s);                          // (n,m)
Tensor softmax_rows_backward(const Tensor& y, const Tensor& gy);

Tensor matmul(const Tensor& a, const Tensor& b);     // (n,k)x(k,m) -> (n,m)
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // (n,k) x (m,k)^T -> (n,m)
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // (k,n)^T x (k,m) -> (n,m)

// Residual cross-attention: queries from a (c,h,w) feature map, keys/values
// from a (n, ctx_dim) token set. Positional encodings, when given, are added
// to the key inputs only. Output projection starts at zero so a fresh block
// is the identity.
class CrossAttention {
public:
    CrossAttention() = default;
    CrossAttention(size_t channels, size_t ctx_dim, size_t head_dim, Rng& rng);

    Tensor forward(const Tensor& feat, const Tensor& ctx, const Tensor& pos = Tensor());
    Tensor backward(const Tensor& gy);
    void collect_params(ParamRefs& out) {
        wq.collect_params(out);
        wk.collect_params(out);
        wv.collect_params(out);
        wo.collect_params(out);
    }

    const Tensor& last_attention() const { return attn_; }

    Linear wq, wk, wv, wo;
    size_t channels = 0, ctx_dim = 0, head_dim = 0;

private:
    bool skipped_ = false;
    std::vector<size_t> feat_shape_;
    Tensor attn_, q_, kmat_, vmat_, xrows_;
};

// Sinusoidal embeddings.
Tensor timestep_embedding(size_t t, size_t dim);
Tensor positional_encoding_2d(size_t h, size_t w, size_t dim);  // (h*w, dim)

// Adam over an explicit parameter set.
class Adam {
public:
    Adam(ParamRefs params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);

    void step();
    void zero_grad();
    size_t step_count() const { return t_; }
    void set_step_count(size_t t) { t_ = t; }
    double lr;

private:
    ParamRefs params_;
    double beta1_, beta2_, eps_;
    size_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

}  // namespace ugcsr::nn
