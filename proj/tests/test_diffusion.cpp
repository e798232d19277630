#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ugcsr/diffusion.hpp"
#include "ugcsr/rng.hpp"

using namespace ugcsr;

namespace {
LatentTensor scalar_latent(double v, Space s = Space::latent) {
    Tensor t({1, 1, 1, 1});
    t[0] = v;
    return LatentTensor(t, s);
}
}  // namespace

TEST_CASE("build_schedule basics") {
    auto s = build_schedule(1, 0.5, 0.5, ScheduleKind::linear);
    CHECK(s.betas.size() == 1);
    CHECK(s.betas[0] == doctest::Approx(0.5));
    CHECK(s.alpha_bars[0] == doctest::Approx(0.5));

    auto s2 = build_schedule(2, 0.1, 0.3, ScheduleKind::linear);
    CHECK(s2.alpha_bars[0] == doctest::Approx(0.9));
    CHECK(s2.alpha_bars[1] == doctest::Approx(0.63));  // 0.9 * 0.7

    auto s3 = build_schedule(1000, 1e-4, 0.02, ScheduleKind::linear);
    CHECK(s3.alpha_bars[999] < 1e-4);
    for (size_t t = 1; t < 1000; ++t) {
        CHECK(s3.alpha_bars[t] < s3.alpha_bars[t - 1]);
        // cumulative-product identity within 1e-12 relative error
        CHECK(std::abs(s3.alpha_bars[t] - s3.alpha_bars[t - 1] * s3.alphas[t]) <=
              1e-12 * s3.alpha_bars[t]);
        CHECK(s3.betas[t] > 0.0);
        CHECK(s3.betas[t] < 1.0);
    }
}

TEST_CASE("build_schedule rejects bad arguments") {
    CHECK_THROWS(build_schedule(0, 0.1, 0.2));
    CHECK_THROWS(build_schedule(10, 0.0, 0.2));
    CHECK_THROWS(build_schedule(10, 0.1, 1.0));
    CHECK_THROWS(build_schedule(10, 0.3, 0.1));
}

TEST_CASE("forward_step closed forms") {
    auto s = build_schedule(2, 1e-12, 0.25, ScheduleKind::linear);
    auto x = scalar_latent(3.0);
    auto n = scalar_latent(1.0);
    // beta ~ 0: output equals x_prev (to fp precision)
    CHECK(forward_step(x, 0, s, n).data[0] == doctest::Approx(3.0).epsilon(1e-6));
    // zero signal, beta = 0.25 -> 0.5 * noise
    auto z = scalar_latent(0.0);
    CHECK(forward_step(z, 1, s, n).data[0] == doctest::Approx(0.5));

    Tensor bad({1, 1, 2, 2});
    CHECK_THROWS(forward_step(x, 0, s, LatentTensor(bad, Space::latent)));
}

TEST_CASE("forward_marginal closed forms") {
    auto s = build_schedule(10, 0.1, 0.2, ScheduleKind::linear);
    auto n = scalar_latent(2.0);
    // x0 = 0 -> sqrt(1-abar) * noise
    auto z = scalar_latent(0.0);
    auto out = forward_marginal(z, 4, s, n);
    CHECK(out.data[0] == doctest::Approx(std::sqrt(1.0 - s.alpha_bar(4)) * 2.0));
    // near-zero beta limit -> identity
    auto s0 = build_schedule(3, 1e-14, 1e-14, ScheduleKind::linear);
    auto x = scalar_latent(1.75);
    CHECK(forward_marginal(x, 2, s0, n).data[0] == doctest::Approx(1.75).epsilon(1e-6));
}

TEST_CASE("iterated forward_step matches marginal in distribution") {
    // Monte Carlo oracle: iterate t = 0..499 vs closed form at t = 499.
    auto s = build_schedule(1000, 1e-4, 0.02, ScheduleKind::linear);
    const size_t kTrials = 100000;
    const double x0v = 0.7;
    Rng rng(42);
    auto x0 = scalar_latent(x0v);
    double it_sum = 0.0, it_sumsq = 0.0, mg_sum = 0.0, mg_sumsq = 0.0;
    for (size_t i = 0; i < kTrials; ++i) {
        LatentTensor x = x0;
        for (size_t t = 0; t < 500; ++t) x = forward_step(x, t, s, scalar_latent(rng.normal()));
        it_sum += x.data[0];
        it_sumsq += x.data[0] * x.data[0];
        double m = forward_marginal(x0, 499, s, scalar_latent(rng.normal())).data[0];
        mg_sum += m;
        mg_sumsq += m * m;
    }
    double it_mean = it_sum / kTrials, mg_mean = mg_sum / kTrials;
    double it_var = it_sumsq / kTrials - it_mean * it_mean;
    double mg_var = mg_sumsq / kTrials - mg_mean * mg_mean;
    CHECK(std::abs(it_mean - mg_mean) < 0.02);
    CHECK(it_var == doctest::Approx(mg_var).epsilon(0.02));
    CHECK(it_var == doctest::Approx(1.0 - s.alpha_bar(499)).epsilon(0.02));
}

TEST_CASE("reverse_step contracts") {
    // single-step toy: T=1, beta=0.25, x0=2, eps=1
    auto s = build_schedule(1, 0.25, 0.25, ScheduleKind::linear);
    auto x0 = scalar_latent(2.0);
    auto eps = scalar_latent(1.0);
    auto x1 = forward_marginal(x0, 0, s, eps);
    CHECK(x1.data[0] == doctest::Approx(std::sqrt(0.75) * 2.0 + 0.5));
    auto rec = reverse_step(x1, 0, eps, s, scalar_latent(99.0), 0.0);
    CHECK(rec.data[0] == doctest::Approx(2.0).epsilon(1e-9));

    // t = 0 ignores the injected-noise argument entirely
    auto a = reverse_step(x1, 0, eps, s, scalar_latent(1000.0));
    auto b = reverse_step(x1, 0, eps, s, scalar_latent(-1000.0));
    CHECK(a.data[0] == b.data[0]);

    auto s2 = build_schedule(4, 0.1, 0.2, ScheduleKind::linear);
    CHECK_THROWS(reverse_step(x1, 7, eps, s2, eps));
}

TEST_CASE("mean-step chain inverts forward_marginal") {
    auto s = build_schedule(200, 1e-4, 0.02, ScheduleKind::linear);
    Rng rng(7);
    Tensor x0t = Tensor::randn({1, 2, 3, 3}, rng);
    LatentTensor x0(x0t, Space::latent);
    Tensor epst = Tensor::randn({1, 2, 3, 3}, rng);
    LatentTensor eps(epst, Space::latent);
    for (size_t t0 : {size_t(0), size_t(50), size_t(100), size_t(199)}) {
        LatentTensor x = forward_marginal(x0, t0, s, eps);
        for (size_t t = t0 + 1; t-- > 0;) {
            // exact per-step noise for the current marginal
            LatentTensor true_eps = x;
            double ab = s.alpha_bar(t);
            for (size_t i = 0; i < x.data.size(); ++i)
                true_eps.data[i] = (x.data[i] - std::sqrt(ab) * x0.data[i]) / std::sqrt(1.0 - ab);
            x = reverse_step(x, t, true_eps, s, eps, 0.0);
        }
        for (size_t i = 0; i < x.data.size(); ++i)
            CHECK(x.data[i] == doctest::Approx(x0.data[i]).epsilon(1e-6));
    }
}

TEST_CASE("training_loss oracle cases") {
    auto s = build_schedule(10, 0.1, 0.2, ScheduleKind::linear);
    Rng rng(3);
    Tensor x0t = Tensor::randn({1, 1, 8, 8}, rng);
    LatentTensor x0(x0t, Space::latent);
    Tensor epst = Tensor::randn({1, 1, 8, 8}, rng);
    LatentTensor eps(epst, Space::latent);

    // perfect predictor
    NoisePredictor perfect = [&](const Tensor&, size_t) { return epst; };
    CHECK(training_loss(perfect, x0, 5, s, eps) == doctest::Approx(0.0));

    // zero predictor on large tensor -> E[eps^2] = 1 within 5%
    Tensor big_eps = Tensor::randn({1, 4, 64, 64}, rng);
    LatentTensor big_x0(Tensor({1, 4, 64, 64}), Space::latent);
    NoisePredictor zero = [](const Tensor& x, size_t) { return Tensor(x.shape()); };
    double loss = training_loss(zero, big_x0, 5, s, LatentTensor(big_eps, Space::latent));
    CHECK(loss == doctest::Approx(1.0).epsilon(0.05));

    // non-negativity and zero-only-at-exact
    NoisePredictor off = [&](const Tensor&, size_t) {
        Tensor t = epst;
        t[0] += 0.5;
        return t;
    };
    CHECK(training_loss(off, x0, 5, s, eps) > 0.0);
}

TEST_CASE("strided ladder is strictly decreasing to 0") {
    auto ladder = strided_timesteps(999, 50);
    CHECK(ladder.front() == 999);
    CHECK(ladder.back() == 0);
    for (size_t i = 1; i < ladder.size(); ++i) CHECK(ladder[i] < ladder[i - 1]);

    auto full = build_schedule(1000, 1e-4, 0.02);
    auto sub = sub_schedule(full, ladder);
    CHECK(sub.alpha_bars.front() == doctest::Approx(full.alpha_bar(0)).epsilon(1e-12));
    CHECK(sub.alpha_bars.back() == doctest::Approx(full.alpha_bar(999)).epsilon(1e-12));
    for (size_t i = 1; i < sub.T; ++i) CHECK(sub.alpha_bars[i] < sub.alpha_bars[i - 1]);
}
