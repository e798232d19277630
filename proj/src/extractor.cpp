#include "ugcsr/extractor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ugcsr {

void TrunkConfig::validate() const {
    for (size_t i = 1; i < 4; ++i)
        if (stage_widths[i] < stage_widths[i - 1])
            throw std::invalid_argument("TrunkConfig: stage widths must be non-decreasing");
    for (size_t d : stage_depths)
        if (d < 1) throw std::invalid_argument("TrunkConfig: stage depths must be >= 1");
    if (patchify_stride < 1) throw std::invalid_argument("TrunkConfig: bad patchify stride");
    if (embed_dim % 4 != 0) throw std::invalid_argument("TrunkConfig: embed_dim % 4 != 0");
    if (window < 1) throw std::invalid_argument("TrunkConfig: bad window");
}

MsbLayer::MsbLayer(size_t ch, size_t window_, Rng& rng)
    : pointwise(ch, ch, 1, 1, 0, rng),
      wq(ch, ch, rng, false, false),
      wk(ch, ch, rng, false, false),
      wv(ch, ch, rng, false, false),
      wo(ch, ch, rng, false, false),
      channels(ch),
      window(window_) {
    Tensor w({ch, 3, 3});
    nn::kaiming_init(w, 9, rng);
    dw_w = nn::Param("dw_w", std::move(w));
    dw_b = nn::Param("dw_b", Tensor({ch}));
}

namespace {
inline double silu(double x) { return x / (1.0 + std::exp(-x)); }
inline long clampi(long v, long lo, long hi) { return v < lo ? lo : (v > hi ? hi : v); }
}  // namespace

Tensor MsbLayer::forward(const Tensor& x) {
    size_t c = x.dim(0);
    long h = static_cast<long>(x.dim(1)), w = static_cast<long>(x.dim(2));

    // depthwise 3x3 with replicate borders
    Tensor d(x.shape());
    for (size_t ch = 0; ch < c; ++ch)
        for (long y = 0; y < h; ++y)
            for (long xx = 0; xx < w; ++xx) {
                double acc = dw_b.value[ch];
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        long iy = clampi(y + ky - 1, 0, h - 1);
                        long ix = clampi(xx + kx - 1, 0, w - 1);
                        acc += dw_w.value.at3(ch, ky, kx) *
                               x.at3(ch, static_cast<size_t>(iy), static_cast<size_t>(ix));
                    }
                d.at3(ch, static_cast<size_t>(y), static_cast<size_t>(xx)) = silu(acc);
            }
    Tensor p = pointwise.forward(d);
    Tensor hfeat = x;
    for (size_t i = 0; i < hfeat.size(); ++i) hfeat[i] += silu(p[i]);

    // windowed self-attention residual
    Tensor out = hfeat;
    double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(c));
    for (long wy = 0; wy < h; wy += static_cast<long>(window))
        for (long wx = 0; wx < w; wx += static_cast<long>(window)) {
            long yh = std::min<long>(wy + static_cast<long>(window), h);
            long xh = std::min<long>(wx + static_cast<long>(window), w);
            size_t n = static_cast<size_t>((yh - wy) * (xh - wx));
            Tensor rows({n, c});
            size_t r = 0;
            for (long y = wy; y < yh; ++y)
                for (long xx = wx; xx < xh; ++xx, ++r)
                    for (size_t ch = 0; ch < c; ++ch)
                        rows.at2(r, ch) = hfeat.at3(ch, static_cast<size_t>(y),
                                                    static_cast<size_t>(xx));
            Tensor q = wq.forward(rows);
            Tensor k = wk.forward(rows);
            Tensor v = wv.forward(rows);
            Tensor s = nn::matmul_nt(q, k);
            s *= inv_sqrt_d;
            Tensor a = nn::softmax_rows(s);
            Tensor o = wo.forward(nn::matmul(a, v));
            r = 0;
            for (long y = wy; y < yh; ++y)
                for (long xx = wx; xx < xh; ++xx, ++r)
                    for (size_t ch = 0; ch < c; ++ch)
                        out.at3(ch, static_cast<size_t>(y), static_cast<size_t>(xx)) +=
                            o.at2(r, ch);
        }
    return out;
}

void MsbLayer::collect_params(nn::ParamRefs& out) {
    out.push_back(&dw_w);
    out.push_back(&dw_b);
    pointwise.collect_params(out);
    wq.collect_params(out);
    wk.collect_params(out);
    wv.collect_params(out);
    wo.collect_params(out);
}

SemanticExtractor::SemanticExtractor(const TrunkConfig& config) : cfg_(config) {
    cfg_.validate();
    Rng rng(cfg_.seed);
    patchify = nn::Conv2d(3, cfg_.stage_widths[0], cfg_.patchify_stride, cfg_.patchify_stride, 0,
                          rng);
    for (size_t s = 0; s < 4; ++s) {
        stages.emplace_back();
        for (size_t i = 0; i < cfg_.stage_depths[s]; ++i)
            stages[s].emplace_back(cfg_.stage_widths[s], cfg_.window, rng);
        if (s < 3)
            stage_down.emplace_back(cfg_.stage_widths[s], cfg_.stage_widths[s + 1], 2, 2, 0, rng);
        neck_proj.emplace_back(cfg_.stage_widths[s], cfg_.embed_dim, 1, 1, 0, rng);
    }
}

std::vector<Tensor> SemanticExtractor::trunk_forward(const Tensor& img) {
    if (img.ndim() != 3 || img.dim(0) != 3)
        throw std::invalid_argument("trunk_forward: want (3,h,w)");
    if (img.dim(1) < cfg_.patchify_stride || img.dim(2) < cfg_.patchify_stride)
        throw std::invalid_argument("trunk_forward: image smaller than patchify stride");
    std::vector<Tensor> maps;
    Tensor h = patchify.forward(img);
    for (size_t s = 0; s < 4; ++s) {
        if (s > 0) h = stage_down[s - 1].forward(h);
        for (auto& layer : stages[s]) h = layer.forward(h);
        maps.push_back(h);
    }
    return maps;
}

namespace {
Tensor resize_nearest_to(const Tensor& t, size_t h, size_t w) {
    size_t c = t.dim(0), sh = t.dim(1), sw = t.dim(2);
    Tensor out({c, h, w});
    for (size_t ch = 0; ch < c; ++ch)
        for (size_t y = 0; y < h; ++y)
            for (size_t x = 0; x < w; ++x)
                out.at3(ch, y, x) = t.at3(ch, std::min(y * sh / h, sh - 1),
                                          std::min(x * sw / w, sw - 1));
    return out;
}

Tensor flatten_tokens(const Tensor& feat) {
    size_t c = feat.dim(0), hw = feat.dim(1) * feat.dim(2);
    Tensor rows({hw, c});
    for (size_t ch = 0; ch < c; ++ch)
        for (size_t i = 0; i < hw; ++i) rows.at2(i, ch) = feat.data()[ch * hw + i];
    return rows;
}
}  // namespace

SemanticEmbedding SemanticExtractor::neck_fuse(const std::vector<Tensor>& stage_maps) {
    if (stage_maps.size() != 4) throw std::invalid_argument("neck_fuse: want 4 stage maps");
    for (size_t s = 1; s < 4; ++s) {
        if (stage_maps[s].dim(1) != stage_maps[s - 1].dim(1) / 2 ||
            stage_maps[s].dim(2) != stage_maps[s - 1].dim(2) / 2)
            throw std::invalid_argument("neck_fuse: broken halving relation between stages");
    }
    // per-scale projection to the common dim
    std::vector<Tensor> proj;
    for (size_t s = 0; s < 4; ++s)
        proj.push_back(neck_proj[s].forward(stage_maps[s]));
    // top-down fusion: coarse scales upsampled and added into finer ones
    for (size_t s = 4; s-- > 1;)
        proj[s - 1] += resize_nearest_to(proj[s], proj[s - 1].dim(1), proj[s - 1].dim(2));

    SemanticEmbedding emb;
    emb.dim = cfg_.embed_dim;
    for (size_t s = 0; s < 4; ++s) {
        SemanticEmbedding::Scale scale;
        scale.h = proj[s].dim(1);
        scale.w = proj[s].dim(2);
        scale.features = flatten_tokens(proj[s]);
        scale.pos_encoding = nn::positional_encoding_2d(scale.h, scale.w, cfg_.embed_dim);
        emb.scales.push_back(std::move(scale));
        emb.scale_factors.push_back(cfg_.patchify_stride << s);
    }
    return emb;
}

SemanticEmbedding SemanticExtractor::extract(const Image& img_lr) {
    return neck_fuse(trunk_forward(image_to_chw(img_lr)));
}

nn::ParamRefs SemanticExtractor::parameters() {
    nn::ParamRefs ps;
    patchify.collect_params(ps);
    for (auto& d : stage_down) d.collect_params(ps);
    for (auto& st : stages)
        for (auto& l : st) l.collect_params(ps);
    for (auto& p : neck_proj) p.collect_params(ps);
    return ps;
}

}  // namespace ugcsr
