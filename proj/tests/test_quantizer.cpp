#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "test_support.hpp"
#include "thermalsr/error.hpp"
#include "thermalsr/quantizer.hpp"

using namespace thermalsr;

namespace {

// Independent restatement of the interval-count rule, driven by the standard
// library generator rather than the toolkit's stream.
int reference_count(double z) {
    int k = static_cast<int>(std::lround(z));
    k = std::max(7, std::min(k, 27));
    k = k + (2 - (k - 7) % 2);
    return std::min(k, 27);
}

double ks_statistic(std::vector<double> sample, double (*cdf)(double)) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, f - i / n, (i + 1) / n - f});
    }
    return d;
}

double unit_cdf(double x) { return std::clamp(x, 0.0, 1.0); }
double normal17_cdf(double x) { return 0.5 * std::erfc(-(x - 17.0) / (2.0 * std::sqrt(2.0))); }

// 99th percentile of the KS statistic for n uniform draws, estimated by
// simulation with std::mt19937_64.
double simulated_ks_critical(std::size_t n, int reps) {
    std::mt19937_64 gen(20240607);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> stats;
    for (int r = 0; r < reps; ++r) {
        std::vector<double> s(n);
        for (auto& v : s)
            v = u(gen);
        stats.push_back(ks_statistic(std::move(s), unit_cdf));
    }
    std::sort(stats.begin(), stats.end());
    return stats[static_cast<std::size_t>(0.99 * reps)];
}

QuantizerConfig with_strategy(ProxyStrategy s) {
    QuantizerConfig c;
    c.strategy = s;
    return c;
}

} // namespace

TEST_CASE("gaussian pdf") {
    CHECK(gaussian_pdf(0.0, 0.0, 1.0) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
    for (double d : {0.1, 1.0, 2.5, 7.0})
        CHECK(gaussian_pdf(17.0 + d, 17.0, 2.0) == gaussian_pdf(17.0 - d, 17.0, 2.0));
    CHECK_THROWS_AS(gaussian_pdf(0.0, 0.0, 0.0), ConfigError);
    CHECK_THROWS_AS(gaussian_pdf(0.0, 0.0, -1.0), ConfigError);

    // Trapezoid rule over [mu - 6 sigma, mu + 6 sigma].
    for (double sigma : {0.5, 2.0, 30.0}) {
        const double mu = 17.0;
        const int n = 20000;
        const double a = mu - 6 * sigma, b = mu + 6 * sigma, h = (b - a) / n;
        double s = 0.5 * (gaussian_pdf(a, mu, sigma) + gaussian_pdf(b, mu, sigma));
        for (int i = 1; i < n; ++i)
            s += gaussian_pdf(a + i * h, mu, sigma);
        CHECK(std::abs(s * h - 1.0) < 1e-6);
    }
}

TEST_CASE("interval count from forced draws") {
    const QuantizerConfig cfg;
    CHECK(interval_count_from_draw(17.0, cfg) == 19);
    CHECK(interval_count_from_draw(100.0, cfg) == 27);
    CHECK(interval_count_from_draw(-100.0, cfg) == 9);
    CHECK(interval_count_from_draw(18.0, cfg) == 19);
    CHECK(interval_count_from_draw(std::numeric_limits<double>::infinity(), cfg) == 27);
    for (double z = -5.0; z <= 40.0; z += 0.01) {
        const int k = interval_count_from_draw(z, cfg);
        REQUIRE(k % 2 == 1);
        REQUIRE(k >= 9);
        REQUIRE(k <= 27);
        REQUIRE(k == reference_count(z));
    }
    QuantizerConfig flat;
    flat.count_min = flat.count_max = 3;
    CHECK(interval_count_from_draw(17.0, flat) == 3);
}

TEST_CASE("interval-count distribution matches an independent simulation") {
    const QuantizerConfig cfg;
    RngStream rng(99);
    const int n = 100000;
    std::map<int, double> ours, ref;
    for (int i = 0; i < n; ++i) {
        const int k = sample_interval_count(cfg, rng);
        REQUIRE(k % 2 == 1);
        REQUIRE(k >= 9);
        REQUIRE(k <= 27);
        ours[k] += 1.0 / n;
    }
    std::mt19937_64 gen(1);
    std::normal_distribution<double> nd(17.0, 2.0);
    for (int i = 0; i < n; ++i)
        ref[reference_count(nd(gen))] += 1.0 / n;
    std::set<int> keys;
    for (auto& [k, v] : ours)
        keys.insert(k);
    for (auto& [k, v] : ref)
        keys.insert(k);
    double tv = 0.0;
    for (int k : keys)
        tv += std::abs(ours[k] - ref[k]);
    tv *= 0.5;
    CHECK(tv < 0.01);
    auto mode = [](const std::map<int, double>& m) {
        return std::max_element(m.begin(), m.end(), [](auto& a, auto& b) { return a.second < b.second; })->first;
    };
    CHECK(mode(ours) == mode(ref));
    CHECK(mode(ours) == 19);
}

TEST_CASE("pre-clamp draws follow N(17, 4)") {
    RngStream rng(5);
    std::vector<double> draws(100000);
    for (auto& d : draws)
        d = rng.normal(17.0, 2.0);
    // Asymptotic 1% critical value of the one-sample KS statistic.
    CHECK(ks_statistic(draws, normal17_cdf) < 1.628 / std::sqrt(100000.0));
}

TEST_CASE("partition generation") {
    RngStream rng(1);
    SUBCASE("flat channel") {
        auto p = generate_partition({0, 42, 42}, 19, rng);
        CHECK(p.boundaries == std::vector<Sample>{42});
        CHECK(p.region_count() == 1);
        p = assign_proxies(p, ProxyStrategy::random, rng);
        CHECK(p.proxies == std::vector<Sample>{42});
    }
    SUBCASE("single interval") {
        const auto p = generate_partition({0, 3, 200}, 1, rng);
        CHECK(p.boundaries == std::vector<Sample>{3, 200});
        CHECK(p.region_count() == 1);
    }
    SUBCASE("15 intervals over 0..255") {
        const auto p = generate_partition({0, 0, 255}, 15, rng);
        CHECK(p.boundaries.front() == 0);
        CHECK(p.boundaries.back() == 255);
        CHECK(p.region_count() <= 15);
        CHECK(std::is_sorted(p.boundaries.begin(), p.boundaries.end()));
        CHECK(std::adjacent_find(p.boundaries.begin(), p.boundaries.end()) == p.boundaries.end());
        for (std::size_t i = 1; i + 1 < p.boundaries.size(); ++i) {
            CHECK(p.boundaries[i] > 0);
            CHECK(p.boundaries[i] < 255);
        }
    }
    SUBCASE("shrinks instead of redrawing duplicates") {
        const auto p = generate_partition({0, 10, 13}, 27, rng);
        CHECK(p.boundaries == std::vector<Sample>{10, 11, 12, 13});
        CHECK(p.drawn_count == 27);
    }
    SUBCASE("interior draws over many seeds are uniform") {
        std::vector<double> xs;
        for (int s = 0; s < 2000; ++s) {
            RngStream r(s);
            const auto p = generate_partition({0, 0, 60000}, 6, r);
            for (std::size_t i = 1; i + 1 < p.boundaries.size(); ++i)
                xs.push_back(p.boundaries[i] / 60000.0);
        }
        CHECK(ks_statistic(xs, unit_cdf) < 1.628 / std::sqrt(static_cast<double>(xs.size())));
    }
}

TEST_CASE("regions tile the value range exactly once") {
    std::mt19937_64 gen(8);
    for (int trial = 0; trial < 200; ++trial) {
        RngStream rng(trial);
        const Sample lo = static_cast<Sample>(gen() % 100);
        const Sample hi = static_cast<Sample>(lo + gen() % 200);
        const auto p = generate_partition({0, lo, hi}, 1 + static_cast<int>(gen() % 30), rng);
        std::vector<int> owners(hi - lo + 1, 0);
        for (std::size_t j = 0; j < p.region_count(); ++j) {
            const auto [a, b] = p.region_members(j);
            for (int v = a; v <= b; ++v)
                ++owners[v - lo];
        }
        for (int v = lo; v <= hi; ++v) {
            REQUIRE(owners[v - lo] == 1);
            // Linear-scan oracle for membership.
            std::size_t linear = 0;
            for (std::size_t j = 0; j < p.region_count(); ++j) {
                const auto [a, b] = p.region_members(j);
                if (v >= a && v <= b)
                    linear = j;
            }
            REQUIRE(p.region_of(static_cast<Sample>(v)) == linear);
        }
    }
}

TEST_CASE("worked proxy example") {
    CHECK(random_proxy(0.0, 20.0, 0.35) == doctest::Approx(7.0).epsilon(1e-15));
    CHECK(std::floor(random_proxy(0.0, 20.0, 0.35) + 0.5) == 7.0);
    ChannelPartition p;
    p.boundaries = {0, 20};
    RngStream rng(0);
    CHECK(assign_proxies(p, ProxyStrategy::middle, rng).proxies == std::vector<Sample>{10});
    CHECK(assign_proxies(p, ProxyStrategy::zero, rng).proxies == std::vector<Sample>{10});
}

TEST_CASE("random proxies are uniform on (lo, hi]") {
    ChannelPartition p;
    p.boundaries = {0, 20};
    RngStream rng(77);
    std::vector<double> xs;
    for (int i = 0; i < 10000; ++i) {
        const auto q = assign_proxies(p, ProxyStrategy::random, rng);
        REQUIRE(q.proxy_values[0] > 0.0);
        REQUIRE(q.proxy_values[0] <= 20.0);
        REQUIRE(q.proxies[0] <= 20);
        xs.push_back(q.proxy_values[0] / 20.0);
    }
    CHECK(ks_statistic(xs, unit_cdf) < simulated_ks_critical(10000, 400));
}

TEST_CASE("quantize_image properties on random images") {
    std::mt19937_64 gen(123);
    for (ProxyStrategy strategy : {ProxyStrategy::middle, ProxyStrategy::random}) {
        for (int trial = 0; trial < 30; ++trial) {
            const int channels = trial % 2 ? 3 : 1;
            const ImageBuffer img = testing::random_image(gen, 32, 24, channels, trial % 3 ? 8 : 16);
            const auto r = quantize_image(img, with_strategy(strategy), RngStream(trial));
            REQUIRE(r.partitions.size() == static_cast<std::size_t>(channels));
            CHECK(r.image.same_shape(img));
            CHECK(r.image.bit_depth() == img.bit_depth());
            for (int c = 0; c < channels; ++c) {
                const auto& p = r.partitions[c];
                CHECK(p.drawn_count % 2 == 1);
                CHECK(p.region_count() <= static_cast<std::size_t>(p.drawn_count));
                CHECK(distinct_values(r.image, c) <= p.region_count());
                const double widest = p.max_region_width();
                for (int y = 0; y < img.height(); ++y) {
                    for (int x = 0; x < img.width(); ++x) {
                        const Sample v = img.at(x, y, c);
                        const std::size_t j = p.region_of(v);
                        const auto [a, b] = p.region_members(j);
                        REQUIRE(r.image.at(x, y, c) == p.proxies[j]);
                        REQUIRE(p.proxies[j] >= a);
                        REQUIRE(p.proxies[j] <= b);
                        const double err = std::abs(double(v) - double(r.image.at(x, y, c)));
                        const double real_err = std::abs(double(v) - p.proxy_values[j]);
                        if (strategy == ProxyStrategy::middle) {
                            REQUIRE(real_err <= 0.5 * widest);
                            REQUIRE(err <= 0.5 * widest + 0.5);
                        } else {
                            REQUIRE(real_err <= widest);
                            REQUIRE(err <= widest);
                        }
                    }
                }
            }
        }
    }
}

TEST_CASE("constant images are fixed points") {
    for (ProxyStrategy s : {ProxyStrategy::middle, ProxyStrategy::random}) {
        const ImageBuffer img = testing::constant_image(9, 7, 3, 8, 77);
        CHECK(quantize_image(img, with_strategy(s), RngStream(4)).image == img);
    }
}

TEST_CASE("degenerate config leaves a flat image unchanged") {
    QuantizerConfig cfg = with_strategy(ProxyStrategy::middle);
    cfg.count_min = cfg.count_max = 3;
    const ImageBuffer img = testing::constant_image(5, 5, 1, 16, 1234);
    CHECK(quantize_image(img, cfg, RngStream(0)).image == img);
}

TEST_CASE("determinism and per-channel independence") {
    std::mt19937_64 gen(9);
    const ImageBuffer img = testing::random_image(gen, 40, 30, 3, 8);
    const auto a = quantize_image(img, QuantizerConfig{}, RngStream(55));
    const auto b = quantize_image(img, QuantizerConfig{}, RngStream(55));
    CHECK(a.image == b.image);
    const auto c = quantize_image(img, QuantizerConfig{}, RngStream(56));
    CHECK(!(a.image == c.image));

    // Changing channel 2 must not change how channels 0 and 1 are quantized.
    std::vector<Sample> s(img.samples().begin(), img.samples().end());
    for (std::size_t i = 2; i < s.size(); i += 3)
        s[i] = static_cast<Sample>(255 - s[i]);
    const ImageBuffer other(40, 30, 3, 8, s);
    const auto d = quantize_image(other, QuantizerConfig{}, RngStream(55));
    CHECK(d.image.channel(0) == a.image.channel(0));
    CHECK(d.image.channel(1) == a.image.channel(1));
}

TEST_CASE("middle strategy is idempotent under a fixed partition") {
    std::mt19937_64 gen(10);
    for (int trial = 0; trial < 10; ++trial) {
        const ImageBuffer img = testing::random_image(gen, 20, 20, 1 + 2 * (trial % 2), 8);
        const auto r = quantize_image(img, with_strategy(ProxyStrategy::middle), RngStream(trial));
        CHECK(requantize(r.image, r.partitions) == r.image);
        CHECK(requantize(img, r.partitions) == r.image);
    }
}

TEST_CASE("zero strategy drops pixels at the configured rate") {
    std::mt19937_64 gen(12);
    const ImageBuffer img = testing::random_image(gen, 100, 100, 1, 8, 1, 255);
    QuantizerConfig cfg = with_strategy(ProxyStrategy::zero);
    cfg.zero_keep_prob = 0.7;
    const auto r = quantize_image(img, cfg, RngStream(3));
    const auto middle = requantize(img, r.partitions);
    std::size_t zeros = 0;
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        if (r.image.samples()[i] == 0)
            ++zeros;
        else
            REQUIRE(r.image.samples()[i] == middle.samples()[i]);
    }
    const double n = static_cast<double>(img.pixel_count());
    CHECK(std::abs(zeros / n - 0.3) < 4.0 * std::sqrt(0.3 * 0.7 / n));

    cfg.zero_keep_prob = 1.0;
    CHECK(quantize_image(img, cfg, RngStream(3)).image == middle);
    cfg.zero_keep_prob = 0.0;
    const auto all = quantize_image(img, cfg, RngStream(3)).image;
    CHECK(std::all_of(all.samples().begin(), all.samples().end(), [](Sample v) { return v == 0; }));
}

TEST_CASE("config validation and JSON") {
    QuantizerConfig bad;
    bad.std = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = {};
    bad.count_min = 30;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = {};
    bad.step = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = {};
    bad.zero_keep_prob = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = {};
    bad.count_min = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(parse_strategy("median"), ConfigError);

    QuantizerConfig cfg;
    cfg.mean = 15;
    cfg.strategy = ProxyStrategy::zero;
    cfg.zero_keep_prob = 0.25;
    const auto j = to_json(cfg, 1234);
    for (const char* key : {"mean", "std", "count_min", "count_max", "step", "strategy", "zero_keep_prob", "seed"})
        CHECK(j.contains(key));
    const auto [back, seed] = quantizer_config_from_json(j);
    CHECK(back.mean == 15);
    CHECK(back.strategy == ProxyStrategy::zero);
    CHECK(back.zero_keep_prob == 0.25);
    CHECK(seed == std::optional<std::uint64_t>(1234));
    const auto [defaults, none] = quantizer_config_from_json(nlohmann::json::object());
    CHECK(defaults.count_max == 27);
    CHECK(!none);
}

TEST_CASE("uniform partition") {
    const auto p = uniform_partition({0, 0, 255}, 5);
    CHECK(p.boundaries == std::vector<Sample>{0, 51, 102, 153, 204, 255});
}
