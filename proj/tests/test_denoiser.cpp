#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "ugcsr/denoiser.hpp"

using namespace ugcsr;

namespace {

DenoiserConfig tiny_config() {
    DenoiserConfig cfg;
    cfg.latent_channels = 2;
    cfg.widths = {4, 8};
    cfg.attention_levels = {1};
    cfg.prompt_dim = 4;
    cfg.semantic_dim = 4;
    cfg.temb_dim = 8;
    cfg.control_branch = true;
    cfg.seed = 77;
    return cfg;
}

SemanticEmbedding tiny_semantic(Rng& rng) {
    SemanticEmbedding emb;
    emb.dim = 4;
    emb.scale_factors = {4};
    SemanticEmbedding::Scale sc;
    sc.features = Tensor::randn({3, 4}, rng);
    sc.pos_encoding = Tensor::randn({3, 4}, rng);
    sc.h = 3;
    sc.w = 1;
    emb.scales.push_back(sc);
    return emb;
}

ConditioningBundle tiny_cond(Rng& rng) {
    ConditioningBundle cond;
    cond.lr_latent = LatentTensor(Tensor::randn({1, 2, 4, 4}, rng), Space::latent);
    cond.prompt_tokens = Tensor::randn({2, 4}, rng);
    cond.semantic = tiny_semantic(rng);
    return cond;
}

// the head and the gates start at zero; give them signal so every path is live
void wake_zero_params(const nn::ParamRefs& ps, uint64_t seed) {
    Rng rng(seed);
    for (auto* p : ps) {
        bool all_zero = true;
        for (size_t i = 0; i < p->value.size() && all_zero; ++i)
            if (p->value[i] != 0.0) all_zero = false;
        if (all_zero)
            for (size_t i = 0; i < p->value.size(); ++i) p->value[i] = 0.05 * rng.normal();
    }
}

}  // namespace

TEST_CASE("config validation") {
    DenoiserConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.widths.clear();
    CHECK_THROWS(cfg.validate());
    cfg = DenoiserConfig();
    cfg.attention_levels = {5};  // out of range
    CHECK_THROWS(cfg.validate());
    cfg = DenoiserConfig();
    cfg.latent_channels = 0;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("zero-initialized head silences the network") {
    Denoiser den(tiny_config());
    Rng rng(3);
    ConditioningBundle cond = tiny_cond(rng);
    LatentTensor x(Tensor::randn({1, 2, 4, 4}, rng), Space::latent);
    LatentTensor eps = den.predict_noise(x, 5, cond);
    CHECK(eps.data.shape() == x.data.shape());
    for (size_t i = 0; i < eps.data.size(); ++i) CHECK(eps.data[i] == 0.0);
}

TEST_CASE("control branch toggling keeps the backbone identical") {
    DenoiserConfig on = tiny_config();
    DenoiserConfig off = on;
    off.control_branch = false;
    Denoiser a(on), b(off);

    // overwrite the shared trainable groups (attention + head) identically;
    // they trail the control group, and the control gates in `a` stay zero,
    // so the two outputs must still agree bit for bit
    nn::ParamRefs ta = a.trainable_parameters();
    nn::ParamRefs tb = b.trainable_parameters();
    REQUIRE(ta.size() > tb.size());
    size_t skip = ta.size() - tb.size();
    Rng wr(55);
    for (size_t i = 0; i < tb.size(); ++i) {
        REQUIRE(ta[skip + i]->value.size() == tb[i]->value.size());
        for (size_t j = 0; j < tb[i]->value.size(); ++j) {
            double v = 0.05 * wr.normal();
            ta[skip + i]->value[j] = v;
            tb[i]->value[j] = v;
        }
    }

    Rng rng(4);
    ConditioningBundle cond = tiny_cond(rng);
    LatentTensor x(Tensor::randn({1, 2, 4, 4}, rng), Space::latent);
    ConditioningBundle no_lr = cond;
    no_lr.lr_latent = LatentTensor();

    LatentTensor ea = a.predict_noise(x, 9, cond);
    LatentTensor eb = b.predict_noise(x, 9, no_lr);
    CHECK(ea.data.checksum() == eb.data.checksum());
}

TEST_CASE("control residuals are exactly zero at init") {
    DenoiserConfig cfg = tiny_config();
    Denoiser den(cfg);
    Rng rng(6);
    Tensor x = Tensor::randn({2, 4, 4}, rng);
    Tensor lr = Tensor::randn({2, 4, 4}, rng);
    std::vector<Tensor> res = den.control_branch_forward(x, 3, lr);
    REQUIRE(res.size() == cfg.widths.size());
    std::vector<size_t> sizes{4, 2};
    for (size_t l = 0; l < res.size(); ++l) {
        CHECK(res[l].shape() == std::vector<size_t>{cfg.widths[l], sizes[l], sizes[l]});
        for (size_t i = 0; i < res[l].size(); ++i) CHECK(res[l][i] == 0.0);
    }
}

TEST_CASE("control branch demands an LR latent") {
    Denoiser den(tiny_config());
    Rng rng(8);
    ConditioningBundle cond = tiny_cond(rng);
    cond.lr_latent = LatentTensor();
    LatentTensor x(Tensor::randn({1, 2, 4, 4}, rng), Space::latent);
    CHECK_THROWS(den.predict_noise(x, 1, cond));
}

TEST_CASE("attention rows are a probability distribution") {
    Rng rng(21);
    nn::CrossAttention attn(4, 4, 4, rng);
    Tensor feat = Tensor::randn({4, 2, 2}, rng);
    Tensor ctx = Tensor::randn({3, 4}, rng);
    Tensor pos = Tensor::randn({3, 4}, rng);
    attn.forward(feat, ctx, pos);
    const Tensor& w = attn.last_attention();
    REQUIRE(w.shape() == std::vector<size_t>{4, 3});
    for (size_t r = 0; r < 4; ++r) {
        double sum = 0.0;
        for (size_t ccol = 0; ccol < 3; ++ccol) {
            CHECK(w.at2(r, ccol) >= 0.0);
            sum += w.at2(r, ccol);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }

    // a single context token always receives weight one
    Tensor ctx1 = Tensor::randn({1, 4}, rng);
    Tensor pos1 = Tensor::randn({1, 4}, rng);
    attn.forward(feat, ctx1, pos1);
    const Tensor& w1 = attn.last_attention();
    for (size_t r = 0; r < w1.dim(0); ++r) CHECK(w1.at2(r, 0) == 1.0);
}

TEST_CASE("attention is invariant to context token order") {
    Rng rng(23);
    nn::CrossAttention attn(4, 4, 4, rng);
    for (auto* group : {&attn.wo}) {  // wake the zero-init output projection
        nn::ParamRefs ps;
        group->collect_params(ps);
        for (auto* p : ps)
            for (size_t i = 0; i < p->value.size(); ++i) p->value[i] = 0.1 * rng.normal();
    }
    Tensor feat = Tensor::randn({4, 2, 2}, rng);
    Tensor ctx = Tensor::randn({3, 4}, rng);
    Tensor pos = Tensor::randn({3, 4}, rng);
    Tensor out = attn.forward(feat, ctx, pos);

    std::vector<size_t> perm{2, 0, 1};
    Tensor ctx_p({3, 4}), pos_p({3, 4});
    for (size_t r = 0; r < 3; ++r)
        for (size_t d = 0; d < 4; ++d) {
            ctx_p.at2(r, d) = ctx.at2(perm[r], d);
            pos_p.at2(r, d) = pos.at2(perm[r], d);
        }
    Tensor out_p = attn.forward(feat, ctx_p, pos_p);
    for (size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out[i] - out_p[i]) < 1e-6);
}

TEST_CASE("attention matches a hand computation") {
    Rng rng(1);
    nn::CrossAttention attn(1, 1, 1, rng);
    auto set_all = [](nn::Linear& lin, double w, double b) {
        nn::ParamRefs ps;
        lin.collect_params(ps);
        for (auto* p : ps) {
            double v = (p->name == "b") ? b : w;
            for (size_t i = 0; i < p->value.size(); ++i) p->value[i] = v;
        }
    };
    set_all(attn.wq, 1.0, 0.0);  // query equals the (unit) feature
    set_all(attn.wk, 1.0, 0.0);  // keys pass ctx + pos through
    set_all(attn.wv, 1.0, 0.0);  // values pass the context through
    set_all(attn.wo, 1.0, 0.0);

    Tensor feat({1, 1, 1}, 1.0);
    Tensor ctx({2, 1});
    ctx.at2(0, 0) = 0.0;
    ctx.at2(1, 0) = 1.0;
    Tensor pos({2, 1});
    pos.at2(0, 0) = 0.0;
    pos.at2(1, 0) = std::log(3.0) - 1.0;  // keys [0, ln 3]; softmax = (1/4, 3/4)

    Tensor out = attn.forward(feat, ctx, pos);
    const Tensor& w = attn.last_attention();
    CHECK(w.at2(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(w.at2(0, 1) == doctest::Approx(0.75).epsilon(1e-12));
    // residual + attended value: 1 + (0.25*0 + 0.75*1)
    CHECK(out[0] == doctest::Approx(1.75).epsilon(1e-12));
}

TEST_CASE("trainable and frozen parameters partition the model") {
    Denoiser den(tiny_config());
    nn::ParamRefs all = den.parameters();
    nn::ParamRefs train = den.trainable_parameters();
    nn::ParamRefs frozen = den.frozen_parameters();
    CHECK(!train.empty());
    CHECK(!frozen.empty());
    CHECK(train.size() + frozen.size() == all.size());

    std::set<nn::Param*> seen;
    for (auto* p : train) seen.insert(p);
    for (auto* p : frozen) CHECK(seen.count(p) == 0);
    for (auto* p : frozen) seen.insert(p);
    for (auto* p : all) CHECK(seen.count(p) == 1);
}

TEST_CASE("the control branch steers the output") {
    Denoiser den(tiny_config());
    wake_zero_params(den.parameters(), 91);
    Rng rng(14);
    ConditioningBundle cond = tiny_cond(rng);
    LatentTensor x(Tensor::randn({1, 2, 4, 4}, rng), Space::latent);

    LatentTensor e1 = den.predict_noise(x, 11, cond);
    ConditioningBundle cond2 = cond;
    cond2.lr_latent = LatentTensor(Tensor::randn({1, 2, 4, 4}, rng), Space::latent);
    LatentTensor e2 = den.predict_noise(x, 11, cond2);
    CHECK(e1.data.checksum() != e2.data.checksum());

    Tensor lr3 = Tensor::randn({2, 4, 4}, rng);
    Tensor x3({2, 4, 4});
    for (size_t i = 0; i < x3.size(); ++i) x3[i] = x.data[i];
    std::vector<Tensor> res = den.control_branch_forward(x3, 11, lr3);
    bool any = false;
    for (const Tensor& r : res)
        for (size_t i = 0; i < r.size(); ++i)
            if (r[i] != 0.0) any = true;
    CHECK(any);
}

TEST_CASE("gradients match finite differences") {
    Denoiser den(tiny_config());
    wake_zero_params(den.parameters(), 101);
    Rng rng(33);
    ConditioningBundle cond = tiny_cond(rng);
    LatentTensor x(Tensor::randn({1, 2, 4, 4}, rng), Space::latent);
    Tensor g = Tensor::randn({2, 4, 4}, rng);

    auto loss_at = [&] {
        LatentTensor eps = den.predict_noise(x, 7, cond);
        double acc = 0.0;
        for (size_t i = 0; i < g.size(); ++i) acc += eps.data[i] * g[i];
        return acc;
    };

    for (auto* p : den.parameters()) p->zero_grad();
    den.predict_noise(x, 7, cond);
    den.backward(g);

    const double h = 1e-5;
    size_t checked = 0, nonzero = 0;
    for (auto* p : den.parameters()) {
        size_t n = p->value.size();
        for (size_t i = 0; i < n; i += std::max<size_t>(1, n / 2)) {
            double keep = p->value[i];
            p->value[i] = keep + h;
            double up = loss_at();
            p->value[i] = keep - h;
            double dn = loss_at();
            p->value[i] = keep;
            double fd = (up - dn) / (2.0 * h);
            double an = p->grad[i];
            if (std::abs(fd) < 1e-6 && std::abs(an) < 1e-6) continue;  // below FD noise
            double denom = std::max(std::abs(fd), std::abs(an));
            CHECK(std::abs(fd - an) / denom < 1e-4);
            if (std::abs(an) > 1e-8) ++nonzero;
            if (++checked >= 160) goto done;
        }
    }
done:
    CHECK(nonzero > 40);
}
