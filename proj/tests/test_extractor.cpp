#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ugcsr/extractor.hpp"

using namespace ugcsr;

namespace {

Image gradient_image(int h, int w) {
    Image im(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                im.at(y, x, c) = (x + y + 10.0 * c) / (h + w + 30.0);
    return im;
}

}  // namespace

TEST_CASE("config validation") {
    TrunkConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.embed_dim = 30;  // not divisible by 4
    CHECK_THROWS(cfg.validate());
    cfg.embed_dim = 32;
    cfg.stage_widths = {32, 24, 16, 8};  // decreasing
    CHECK_THROWS(cfg.validate());
    cfg.stage_widths = {16, 24, 32, 48};
    cfg.patchify_stride = 0;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("trunk produces a halving pyramid") {
    SemanticExtractor ext;
    Image im = gradient_image(64, 64);
    std::vector<Tensor> maps = ext.trunk_forward(image_to_chw(im));
    REQUIRE(maps.size() == 4);
    std::vector<size_t> sizes{16, 8, 4, 2};  // stride-4 patchify then 3 halvings
    for (size_t s = 0; s < 4; ++s) {
        CHECK(maps[s].shape() ==
              std::vector<size_t>{ext.config().stage_widths[s], sizes[s], sizes[s]});
        CHECK(maps[s].all_finite());
    }
}

TEST_CASE("embedding shape across four scales") {
    SemanticExtractor ext;
    SemanticEmbedding emb = ext.extract(gradient_image(128, 128));
    REQUIRE(emb.scales.size() == 4);
    CHECK(emb.dim == 32);
    CHECK(emb.scale_factors == std::vector<size_t>{4, 8, 16, 32});
    std::vector<size_t> tokens{1024, 256, 64, 16};
    for (size_t s = 0; s < 4; ++s) {
        CHECK(emb.scales[s].features.shape() == std::vector<size_t>{tokens[s], 32});
        CHECK(emb.scales[s].pos_encoding.shape() == std::vector<size_t>{tokens[s], 32});
        CHECK(emb.scales[s].h * emb.scales[s].w == tokens[s]);
    }
    CHECK(&emb.finest() == &emb.scales[0]);

    // doubling the input doubles every spatial extent
    SemanticEmbedding big = ext.extract(gradient_image(256, 256));
    for (size_t s = 0; s < 4; ++s) {
        CHECK(big.scales[s].h == 2 * emb.scales[s].h);
        CHECK(big.scales[s].w == 2 * emb.scales[s].w);
    }
}

TEST_CASE("constant input gives spatially constant stage maps") {
    SemanticExtractor ext;
    Tensor img({3, 64, 64}, 0.0);
    std::vector<Tensor> maps = ext.trunk_forward(img);
    for (const Tensor& m : maps) {
        size_t c = m.dim(0), h = m.dim(1), w = m.dim(2);
        for (size_t ch = 0; ch < c; ++ch) {
            double ref = m.at3(ch, 0, 0);
            for (size_t y = 0; y < h; ++y)
                for (size_t x = 0; x < w; ++x)
                    CHECK(std::abs(m.at3(ch, y, x) - ref) < 1e-9);
        }
    }
}

TEST_CASE("extraction is deterministic") {
    SemanticExtractor ext;
    Image im = gradient_image(64, 64);
    SemanticEmbedding a = ext.extract(im);
    SemanticEmbedding b = ext.extract(im);
    for (size_t s = 0; s < 4; ++s) {
        CHECK(a.scales[s].features.checksum() == b.scales[s].features.checksum());
        CHECK(a.scales[s].pos_encoding.checksum() == b.scales[s].pos_encoding.checksum());
    }

    // fresh instance with the same seed agrees bit for bit
    SemanticExtractor ext2;
    SemanticEmbedding c = ext2.extract(im);
    CHECK(c.scales[0].features.checksum() == a.scales[0].features.checksum());
}

TEST_CASE("positional encodings ignore image content") {
    SemanticExtractor ext;
    SemanticEmbedding a = ext.extract(gradient_image(64, 64));
    Image other(64, 64);
    for (size_t i = 0; i < other.px.size(); ++i) other.px[i] = (i % 7) / 7.0;
    SemanticEmbedding b = ext.extract(other);
    for (size_t s = 0; s < 4; ++s) {
        CHECK(a.scales[s].pos_encoding.checksum() == b.scales[s].pos_encoding.checksum());
        CHECK(a.scales[s].features.checksum() != b.scales[s].features.checksum());
    }
}

TEST_CASE("too-small input is rejected") {
    SemanticExtractor ext;
    // stride-4 patchify plus three halvings cannot survive an 8x8 input
    CHECK_THROWS(ext.extract(gradient_image(8, 8)));
}
