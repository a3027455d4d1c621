#include <cmath>
#include <limits>
#include <random>

#include "test_support.hpp"
#include "thermalsr/diffusion.hpp"
#include "thermalsr/error.hpp"

using namespace thermalsr;

namespace {

LatentTensor random_latent(std::mt19937_64& gen, std::vector<std::size_t> shape) {
    std::normal_distribution<double> n(0.0, 1.0);
    LatentTensor t = LatentTensor::zeros(std::move(shape));
    for (auto& v : t.values)
        v = n(gen);
    return t;
}

double max_abs_diff(const LatentTensor& a, const LatentTensor& b) {
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d = std::max(d, std::abs(a.values[i] - b.values[i]));
    return d;
}

} // namespace

TEST_CASE("latent tensor shape invariant") {
    CHECK_THROWS_AS(LatentTensor({2, 3}, std::vector<double>(5)), ShapeError);
    CHECK(LatentTensor::zeros({2, 3, 4}).size() == 24);
    RngStream r(1);
    CHECK(LatentTensor::gaussian({5}, r).size() == 5);
}

TEST_CASE("schedule construction") {
    const NoiseSchedule one = build_schedule(1, 1e-4, 0.02);
    CHECK(one.timesteps() == 1);
    CHECK(one.alpha_bar(1) == 1.0 - 1e-4);

    const NoiseSchedule s = build_schedule();
    CHECK(s.timesteps() == 1000);
    CHECK(s.beta(1) == 1e-4);
    CHECK(s.beta(1000) == doctest::Approx(0.02).epsilon(1e-14));
    CHECK(s.alpha_bar(0) == 1.0);
    CHECK(s.alpha_bar(1000) < 1e-4);
    double prod = 1.0;
    for (int t = 1; t <= 1000; ++t) {
        prod *= 1.0 - (1e-4 + (0.02 - 1e-4) * (t - 1) / 999.0);
        REQUIRE(std::abs(s.alpha_bar(t) - prod) <= 1e-12 * prod);
        REQUIRE(std::abs(s.alpha_bar(t) / s.alpha_bar(t - 1) - s.alpha(t)) <= 1e-12);
        if (t > 1) {
            REQUIRE(s.alpha_bar(t) < s.alpha_bar(t - 1));
            REQUIRE(s.beta(t) > s.beta(t - 1));
        }
    }
    CHECK(check_schedule(s).passed());

    const NoiseSchedule geo = build_schedule(3, 0.5, 0.5);
    CHECK(geo.alpha_bar(1) == 0.5);
    CHECK(geo.alpha_bar(2) == 0.25);
    CHECK(geo.alpha_bar(3) == 0.125);
    CHECK(check_schedule(geo).passed());

    CHECK_THROWS_AS(build_schedule(0), ConfigError);
    CHECK_THROWS_AS(build_schedule(10, 0.0, 0.02), ConfigError);
    CHECK_THROWS_AS(build_schedule(10, 0.03, 0.02), ConfigError);
    CHECK_THROWS_AS(build_schedule(10, 0.01, 1.0), ConfigError);
    CHECK_THROWS_AS(s.alpha(0), ConfigError);
    CHECK_THROWS_AS(s.beta(1001), ConfigError);
}

TEST_CASE("schedule check flags broken schedules") {
    const NoiseSchedule bumpy = NoiseSchedule::from_betas({0.1, 0.05, 0.2});
    const ScheduleCheck c = check_schedule(bumpy);
    CHECK(!c.passed());
    bool flagged = false;
    for (const auto& item : c.items)
        if (item.name == "beta_non_decreasing")
            flagged = !item.passed;
    CHECK(flagged);
    CHECK_THROWS_AS(NoiseSchedule::from_betas({0.1, 1.0}), ConfigError);
    CHECK_THROWS_AS(NoiseSchedule::from_alpha_bars({0.9, 0.95}), ConfigError);
}

TEST_CASE("schedule JSON round trip is exact") {
    const NoiseSchedule s = build_schedule(50, 1e-3, 0.05);
    const NoiseSchedule back = schedule_from_json(to_json(s));
    CHECK(std::equal(s.betas().begin(), s.betas().end(), back.betas().begin()));
    CHECK(std::equal(s.alpha_bars().begin(), s.alpha_bars().end(), back.alpha_bars().begin()));

    const auto steps = subsample_steps(1000, 10);
    const NoiseSchedule r = respace(build_schedule(), steps);
    const NoiseSchedule rb = schedule_from_json(to_json(r));
    CHECK(std::equal(r.alpha_bars().begin(), r.alpha_bars().end(), rb.alpha_bars().begin()));
    CHECK(std::equal(r.labels().begin(), r.labels().end(), rb.labels().begin()));
    CHECK_THROWS_AS(schedule_from_json(nlohmann::json{{"beta", "nope"}}), DataError);
    CHECK_THROWS_AS(schedule_from_json(nlohmann::json::object()), DataError);
}

TEST_CASE("forward sample") {
    std::mt19937_64 gen(1);
    const LatentTensor z0 = random_latent(gen, {4, 4});
    const LatentTensor eps = random_latent(gen, {4, 4});
    // As abar -> 1 the sample collapses onto z0; the residual is the noise term.
    const NoiseSchedule tiny = build_schedule(10, 1e-12, 1e-12);
    double eps_max = 0;
    for (double e : eps.values)
        eps_max = std::max(eps_max, std::abs(e));
    CHECK(max_abs_diff(forward_sample(z0, 10, eps, tiny), z0) <= 1.01 * std::sqrt(1e-11) * eps_max);

    const NoiseSchedule s = build_schedule();
    const LatentTensor det = forward_sample(z0, 500, LatentTensor::zeros({4, 4}), s);
    for (std::size_t i = 0; i < z0.size(); ++i)
        CHECK(det.values[i] == std::sqrt(s.alpha_bar(500)) * z0.values[i]);
    CHECK_THROWS_AS(forward_sample(z0, 1, LatentTensor::zeros({16}), s), ShapeError);
    CHECK_THROWS_AS(forward_sample(z0, 0, eps, s), ConfigError);
    CHECK_THROWS_AS(forward_sample(z0, 1001, eps, s), ConfigError);
}

TEST_CASE("forward marginal moments by Monte Carlo") {
    const NoiseSchedule s = build_schedule();
    const LatentTensor z0({1}, {0.8});
    RngStream rng(2024);
    for (int t : {1, 500, 1000}) {
        const int n = 100000;
        double sum = 0, sum2 = 0;
        for (int i = 0; i < n; ++i) {
            const double v = forward_sample(z0, t, LatentTensor({1}, {rng.normal()}), s).values[0];
            sum += v;
            sum2 += v * v;
        }
        const double mean = sum / n;
        const double var = (sum2 - n * mean * mean) / (n - 1);
        const double want_var = 1.0 - s.alpha_bar(t);
        CHECK(std::abs(mean - std::sqrt(s.alpha_bar(t)) * 0.8) < 4.0 * std::sqrt(want_var / n));
        CHECK(std::abs(var - want_var) < 4.0 * want_var * std::sqrt(2.0 / (n - 1)));
    }
}

TEST_CASE("predict_z0 inverts forward_sample") {
    const NoiseSchedule s = build_schedule();
    std::mt19937_64 gen(3);
    double worst = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t a = 1 + gen() % 5, b = 1 + gen() % 7;
        const LatentTensor z0 = random_latent(gen, {a, b});
        const LatentTensor eps = random_latent(gen, {a, b});
        const int t = 1 + static_cast<int>(gen() % 1000);
        worst = std::max(worst, max_abs_diff(predict_z0(forward_sample(z0, t, eps, s), t, eps, s), z0));
    }
    CHECK(worst < 1e-8);
    const LatentTensor zt({2}, {1.0, -2.0});
    const LatentTensor p = predict_z0(zt, 300, LatentTensor::zeros({2}), s);
    CHECK(p.values[0] == doctest::Approx(1.0 / std::sqrt(s.alpha_bar(300))).epsilon(1e-15));

    const NoiseSchedule harsh = build_schedule(20, 0.9, 0.9);
    CHECK_THROWS_AS(predict_z0(zt, 20, LatentTensor::zeros({2}), harsh), ConfigError);
}

TEST_CASE("posterior mean") {
    std::mt19937_64 gen(4);
    const NoiseSchedule tiny = build_schedule(5, 1e-14, 1e-14);
    const LatentTensor zt = random_latent(gen, {3, 3});
    const LatentTensor eps = random_latent(gen, {3, 3});
    CHECK(max_abs_diff(posterior_mean(zt, 3, eps, tiny), zt) < 1e-6);

    const NoiseSchedule s = build_schedule();
    const LatentTensor z0 = random_latent(gen, {3, 3});
    const LatentTensor z1 = forward_sample(z0, 1, eps, s);
    CHECK(max_abs_diff(posterior_mean(z1, 1, eps, s), z0) < 1e-6);

    // Superposition: mu(a x1 + b x2, a e1 + b e2) = a mu(x1, e1) + b mu(x2, e2)
    // (the map is linear, so this holds with a + b arbitrary).
    for (int t : {2, 100, 999}) {
        const LatentTensor x1 = random_latent(gen, {6}), x2 = random_latent(gen, {6});
        const LatentTensor e1 = random_latent(gen, {6}), e2 = random_latent(gen, {6});
        const double a = 0.3, b = -1.7;
        LatentTensor xs = x1, es = e1;
        for (std::size_t i = 0; i < 6; ++i) {
            xs.values[i] = a * x1.values[i] + b * x2.values[i];
            es.values[i] = a * e1.values[i] + b * e2.values[i];
        }
        const LatentTensor lhs = posterior_mean(xs, t, es, s);
        const LatentTensor m1 = posterior_mean(x1, t, e1, s), m2 = posterior_mean(x2, t, e2, s);
        for (std::size_t i = 0; i < 6; ++i)
            CHECK(std::abs(lhs.values[i] - (a * m1.values[i] + b * m2.values[i])) < 1e-10);
    }
    CHECK_THROWS_AS(posterior_mean(zt, 0, eps, s), ConfigError);
}

TEST_CASE("reverse step") {
    const NoiseSchedule s = build_schedule();
    std::mt19937_64 gen(5);
    const LatentTensor zt = random_latent(gen, {8});
    RngStream rng(1);
    const OracleDenoiser oracle(random_latent(gen, {8}), s);
    const LatentTensor last = reverse_step(zt, 1, oracle, s, rng);
    CHECK(max_abs_diff(last, posterior_mean(zt, 1, oracle.predict_noise(zt, 1), s)) == 0.0);

    // Zero denoiser on z_t = 0 leaves pure sigma_t-scaled noise.
    const int t = 400;
    const ZeroDenoiser zero;
    const int n = 20000;
    double s1 = 0, s2 = 0;
    RngStream noise(9);
    const LatentTensor origin = LatentTensor::zeros({5});
    for (int i = 0; i < n; ++i) {
        for (double v : reverse_step(origin, t, zero, s, noise).values) {
            s1 += v;
            s2 += v * v;
        }
    }
    const double m = 5.0 * n;
    const double var = s2 / m - (s1 / m) * (s1 / m);
    CHECK(std::abs(var - s.beta(t)) < 4.0 * s.beta(t) * std::sqrt(2.0 / m));

    RngStream q(1);
    const LatentTensor quiet = reverse_step(zt, t, zero, s, q, 0.0);
    CHECK(max_abs_diff(quiet, posterior_mean(zt, t, LatentTensor::zeros({8}), s)) == 0.0);
}

TEST_CASE("oracle-denoised chain reconstructs the latent") {
    const NoiseSchedule s = build_schedule(200, 1e-4, 0.05);
    std::mt19937_64 gen(6);
    const LatentTensor z0 = random_latent(gen, {4, 4});
    const OracleDenoiser oracle(z0, s);
    RngStream start(3);
    const LatentTensor zT = forward_sample(z0, 200, LatentTensor::gaussian({4, 4}, start), s);
    // With exact noise predictions the final t = 1 step lands on z0 whatever
    // noise was injected along the way.
    for (double scale : {1.0, 0.5, 0.0}) {
        RngStream rng(11);
        CHECK(max_abs_diff(sample_chain(zT, oracle, s, rng, scale), z0) < 1e-9);
    }
}

TEST_CASE("noise loss") {
    std::mt19937_64 gen(7);
    const LatentTensor a = random_latent(gen, {3, 5}), b = random_latent(gen, {3, 5});
    CHECK(noise_loss(a, a) == 0.0);
    CHECK(noise_loss(LatentTensor({4}, {1, 1, 1, 1}), LatentTensor::zeros({4})) == 1.0);
    double naive = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        naive += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
    CHECK(std::abs(noise_loss(a, b) - naive / a.size()) < 1e-12);
    CHECK(noise_loss(a, b) > 0.0);
    CHECK_THROWS_AS(noise_loss(a, LatentTensor::zeros({15})), ShapeError);
}

TEST_CASE("inference step subsampling") {
    const auto all = subsample_steps(30, 30);
    for (int i = 0; i < 30; ++i)
        CHECK(all[i] == 30 - i);
    for (int n : {1, 7, 10, 20, 30, 40, 50, 333, 999, 1000}) {
        const auto st = subsample_steps(1000, n);
        REQUIRE(st.size() == static_cast<std::size_t>(n));
        CHECK(st.front() == 1000);
        CHECK(st.back() >= 1);
        for (std::size_t i = 1; i < st.size(); ++i) {
            REQUIRE(st[i] < st[i - 1]);
            REQUIRE(std::abs((st[i - 1] - st[i]) - 1000.0 / n) <= 1.0);
        }
    }
    CHECK_THROWS_AS(subsample_steps(10, 11), ConfigError);
    CHECK_THROWS_AS(subsample_steps(10, 0), ConfigError);
}

TEST_CASE("respaced schedule keeps cumulative noise and labels") {
    const NoiseSchedule base = build_schedule();
    const auto steps = subsample_steps(1000, 50);
    const NoiseSchedule r = respace(base, steps);
    CHECK(r.timesteps() == 50);
    for (int i = 1; i <= 50; ++i) {
        CHECK(r.alpha_bar(i) == base.alpha_bar(r.label(i)));
        CHECK(r.label(i) == steps[50 - i]);
    }
    CHECK(check_schedule(r).passed());
    const int dup[] = {5, 5};
    CHECK_THROWS_AS(respace(base, dup), ConfigError);
}
