#pragma once

#include <array>
#include <vector>

#include "ugcsr/image.hpp"
#include "ugcsr/nn.hpp"
#include "ugcsr/tensor.hpp"

namespace ugcsr {

// Multi-scale features plus positional encodings, flattened to token rows.
struct SemanticEmbedding {
    struct Scale {
        Tensor features;      // (tokens, dim)
        Tensor pos_encoding;  // (tokens, dim), content independent
        size_t h = 0, w = 0;
    };
    std::vector<Scale> scales;  // 4, finest first
    size_t dim = 0;
    std::vector<size_t> scale_factors;  // spatial reduction per scale

    bool empty() const { return scales.empty(); }
    // finest fused scale, the default cross-attention source
    const Scale& finest() const { return scales.front(); }
};

struct TrunkConfig {
    std::array<size_t, 4> stage_depths{1, 1, 1, 1};
    std::array<size_t, 4> stage_widths{16, 24, 32, 48};  // non-decreasing
    size_t patchify_stride = 4;
    size_t embed_dim = 32;  // neck output dim, divisible by 4
    size_t window = 8;      // self-attention window inside MSB layers
    uint64_t seed = 202;

    void validate() const;
};

// MSB layer: depthwise conv + pointwise conv + windowed self-attention,
// composed as residual branches. Forward-only; the extractor is frozen.
struct MsbLayer {
    nn::Param dw_w, dw_b;  // depthwise 3x3, replicate padding
    nn::Conv2d pointwise;  // 1x1
    nn::Linear wq, wk, wv, wo;
    size_t channels = 0, window = 8;

    MsbLayer() = default;
    MsbLayer(size_t ch, size_t window, Rng& rng);
    Tensor forward(const Tensor& x);
    void collect_params(nn::ParamRefs& out);
};

// Frozen hierarchical encoder: a 4-stage trunk of MSB layers plus a neck
// with per-scale projections and top-down fusion.
class SemanticExtractor {
public:
    explicit SemanticExtractor(const TrunkConfig& config = TrunkConfig());

    // Layer forwards cache activations, so share one extractor per thread
    // (the type is copyable; a copy clones the weights).
    SemanticEmbedding extract(const Image& img_lr);
    std::vector<Tensor> trunk_forward(const Tensor& img);  // 4 maps, (c,h,w)
    SemanticEmbedding neck_fuse(const std::vector<Tensor>& stage_maps);

    nn::ParamRefs parameters();  // frozen; exposed for checksums and IO
    uint64_t checksum() { return nn::params_checksum(parameters()); }
    const TrunkConfig& config() const { return cfg_; }

    // trunk internals, visible so tests can propagate constants by hand
    nn::Conv2d patchify;
    std::vector<nn::Conv2d> stage_down;         // 3 stride-2 convs
    std::vector<std::vector<MsbLayer>> stages;  // 4 stages
    std::vector<nn::Conv2d> neck_proj;          // 4 1x1 projections to embed_dim

private:
    TrunkConfig cfg_;
};

}  // namespace ugcsr
