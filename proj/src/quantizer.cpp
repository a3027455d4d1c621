#include "thermalsr/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "thermalsr/error.hpp"

namespace thermalsr {

std::string_view to_string(ProxyStrategy s) noexcept {
    switch (s) {
    case ProxyStrategy::middle: return "middle";
    case ProxyStrategy::random: return "random";
    case ProxyStrategy::zero: return "zero";
    }
    return "random";
}

ProxyStrategy parse_strategy(std::string_view name) {
    if (name == "middle")
        return ProxyStrategy::middle;
    if (name == "random")
        return ProxyStrategy::random;
    if (name == "zero")
        return ProxyStrategy::zero;
    throw ConfigError("unknown quantization strategy '" + std::string(name) + "' (expected middle|random|zero)");
}

void QuantizerConfig::validate() const {
    if (!(std > 0.0) || !std::isfinite(std))
        throw ConfigError("quantizer std must be > 0");
    if (!std::isfinite(mean))
        throw ConfigError("quantizer mean must be finite");
    if (count_min < 2)
        throw ConfigError("quantizer count_min must be >= 2");
    if (count_min > count_max)
        throw ConfigError("quantizer count_min must not exceed count_max");
    if (step < 1)
        throw ConfigError("quantizer step must be >= 1");
    if (!(zero_keep_prob >= 0.0 && zero_keep_prob <= 1.0))
        throw ConfigError("quantizer zero_keep_prob must lie in [0, 1]");
}

std::size_t ChannelPartition::region_of(Sample value) const noexcept {
    if (boundaries.size() <= 1)
        return 0;
    const auto it = std::lower_bound(boundaries.begin() + 1, boundaries.end(), value);
    const auto idx = static_cast<std::size_t>(it - (boundaries.begin() + 1));
    return std::min(idx, boundaries.size() - 2);
}

std::pair<Sample, Sample> ChannelPartition::region_members(std::size_t j) const noexcept {
    if (boundaries.size() <= 1)
        return {boundaries.front(), boundaries.front()};
    const Sample lo = j == 0 ? boundaries[0] : static_cast<Sample>(boundaries[j] + 1);
    return {lo, boundaries[j + 1]};
}

double ChannelPartition::region_width(std::size_t j) const noexcept {
    if (boundaries.size() <= 1)
        return 0.0;
    return static_cast<double>(boundaries[j + 1]) - static_cast<double>(boundaries[j]);
}

double ChannelPartition::max_region_width() const noexcept {
    double w = 0.0;
    for (std::size_t j = 0; j < region_count(); ++j)
        w = std::max(w, region_width(j));
    return w;
}

double gaussian_pdf(double x, double mean, double stddev) {
    if (!(stddev > 0.0))
        throw ConfigError("gaussian_pdf requires stddev > 0");
    const double d = x - mean;
    return std::exp(-(d * d) / (2.0 * stddev * stddev)) / std::sqrt(2.0 * std::numbers::pi * stddev * stddev);
}

int interval_count_from_draw(double z, const QuantizerConfig& cfg) noexcept {
    // Clamp in floating point first so huge or non-finite draws cannot overflow.
    double r = std::isnan(z) ? cfg.mean : std::round(z);
    r = std::clamp(r, static_cast<double>(cfg.count_min), static_cast<double>(cfg.count_max));
    int k = static_cast<int>(r);
    k += cfg.step - (k - cfg.count_min) % cfg.step;
    return std::min(k, cfg.count_max);
}

int sample_interval_count(const QuantizerConfig& cfg, RngStream& rng) {
    return interval_count_from_draw(rng.normal(cfg.mean, cfg.std), cfg);
}

ChannelPartition generate_partition(const PixelStats& stats, int count, RngStream& rng) {
    if (count < 1)
        throw ConfigError("interval count must be >= 1");
    ChannelPartition p;
    p.channel_index = stats.channel_index;
    p.drawn_count = count;
    p.boundaries.push_back(stats.min_value);
    if (stats.max_value == stats.min_value)
        return p;
    if (count >= 2 && stats.max_value - stats.min_value >= 2) {
        std::vector<Sample> interior;
        interior.reserve(static_cast<std::size_t>(count - 1));
        for (int i = 0; i < count - 1; ++i)
            interior.push_back(static_cast<Sample>(rng.uniform_int(stats.min_value + 1u, stats.max_value - 1u)));
        std::sort(interior.begin(), interior.end());
        interior.erase(std::unique(interior.begin(), interior.end()), interior.end());
        p.boundaries.insert(p.boundaries.end(), interior.begin(), interior.end());
    }
    p.boundaries.push_back(stats.max_value);
    return p;
}

ChannelPartition uniform_partition(const PixelStats& stats, int count) {
    if (count < 1)
        throw ConfigError("interval count must be >= 1");
    ChannelPartition p;
    p.channel_index = stats.channel_index;
    p.drawn_count = count;
    p.boundaries.push_back(stats.min_value);
    if (stats.max_value == stats.min_value)
        return p;
    const double width = static_cast<double>(stats.max_value - stats.min_value) / count;
    for (int i = 1; i < count; ++i) {
        const auto b = static_cast<Sample>(std::lround(stats.min_value + width * i));
        if (b > p.boundaries.back() && b < stats.max_value)
            p.boundaries.push_back(b);
    }
    p.boundaries.push_back(stats.max_value);
    return p;
}

double random_proxy(double lo, double hi, double p) noexcept {
    return lo + (hi - lo) * p;
}

ChannelPartition assign_proxies(ChannelPartition partition, ProxyStrategy strategy, RngStream& rng) {
    const std::size_t n = partition.region_count();
    partition.proxy_values.assign(n, 0.0);
    partition.proxies.assign(n, 0);
    for (std::size_t j = 0; j < n; ++j) {
        const double lo = partition.boundaries[std::min(j, partition.boundaries.size() - 1)];
        const double hi = partition.boundaries[std::min(j + 1, partition.boundaries.size() - 1)];
        double raw = 0.5 * (lo + hi);
        if (strategy == ProxyStrategy::random && hi > lo)
            raw = random_proxy(lo, hi, rng.uniform_open_left());
        const auto [first, last] = partition.region_members(j);
        const double snapped = std::clamp(std::floor(raw + 0.5), static_cast<double>(first), static_cast<double>(last));
        partition.proxy_values[j] = raw;
        partition.proxies[j] = static_cast<Sample>(snapped);
    }
    return partition;
}

std::vector<Sample> apply_partition(const ImageBuffer& img, const ChannelPartition& partition, ProxyStrategy strategy,
                                    double zero_keep_prob, RngStream* rng) {
    if (!partition.has_proxies())
        throw ConfigError("partition has no proxies assigned");
    if (strategy == ProxyStrategy::zero && !rng)
        throw ConfigError("strategy zero needs a random stream");
    const Sample vmin = partition.boundaries.front();
    const Sample vmax = partition.boundaries.back();
    // Lookup table over the partition's value range; each entry is located by
    // binary search over the boundaries.
    std::vector<Sample> lut(static_cast<std::size_t>(vmax - vmin) + 1);
    for (std::size_t v = 0; v < lut.size(); ++v)
        lut[v] = partition.proxies[partition.region_of(static_cast<Sample>(vmin + v))];

    const int c = partition.channel_index;
    const int nc = img.channels();
    const auto s = img.samples();
    std::vector<Sample> out(img.pixel_count());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const Sample v = std::clamp(s[i * nc + c], vmin, vmax);
        Sample q = lut[v - vmin];
        if (strategy == ProxyStrategy::zero && rng->uniform() >= zero_keep_prob)
            q = 0;
        out[i] = q;
    }
    return out;
}

QuantizeResult quantize_image(const ImageBuffer& img, const QuantizerConfig& cfg, const RngStream& rng) {
    cfg.validate();
    const auto stats = channel_stats(img);
    std::vector<ChannelPartition> partitions;
    std::vector<std::vector<Sample>> planes;
    for (int c = 0; c < img.channels(); ++c) {
        RngStream stream = rng.derive(static_cast<std::uint64_t>(c));
        const int k = sample_interval_count(cfg, stream);
        auto partition = assign_proxies(generate_partition(stats[c], k, stream), cfg.strategy, stream);
        planes.push_back(apply_partition(img, partition, cfg.strategy, cfg.zero_keep_prob, &stream));
        partitions.push_back(std::move(partition));
    }
    return {from_planes(img.width(), img.height(), img.bit_depth(), planes), std::move(partitions)};
}

ImageBuffer requantize(const ImageBuffer& img, std::span<const ChannelPartition> partitions) {
    if (static_cast<int>(partitions.size()) != img.channels())
        throw ShapeError("need one partition per channel");
    std::vector<std::vector<Sample>> planes;
    for (int c = 0; c < img.channels(); ++c) {
        ChannelPartition p = partitions[c];
        p.channel_index = c;
        planes.push_back(apply_partition(img, p));
    }
    return from_planes(img.width(), img.height(), img.bit_depth(), planes);
}

nlohmann::json to_json(const QuantizerConfig& cfg, std::uint64_t seed) {
    return {{"mean", cfg.mean},
            {"std", cfg.std},
            {"count_min", cfg.count_min},
            {"count_max", cfg.count_max},
            {"step", cfg.step},
            {"strategy", std::string(to_string(cfg.strategy))},
            {"zero_keep_prob", cfg.zero_keep_prob},
            {"seed", seed}};
}

std::pair<QuantizerConfig, std::optional<std::uint64_t>> quantizer_config_from_json(const nlohmann::json& j) {
    if (!j.is_object())
        throw ConfigError("quantizer config must be a JSON object");
    QuantizerConfig cfg;
    try {
        cfg.mean = j.value("mean", cfg.mean);
        cfg.std = j.value("std", cfg.std);
        cfg.count_min = j.value("count_min", cfg.count_min);
        cfg.count_max = j.value("count_max", cfg.count_max);
        cfg.step = j.value("step", cfg.step);
        if (j.contains("strategy"))
            cfg.strategy = parse_strategy(j.at("strategy").get<std::string>());
        cfg.zero_keep_prob = j.value("zero_keep_prob", cfg.zero_keep_prob);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("quantizer config: ") + e.what());
    }
    cfg.validate();
    std::optional<std::uint64_t> seed;
    if (j.contains("seed") && !j.at("seed").is_null())
        seed = j.at("seed").get<std::uint64_t>();
    return {cfg, seed};
}

nlohmann::json to_json(const ChannelPartition& p) {
    return {{"channel", p.channel_index},
            {"drawn_count", p.drawn_count},
            {"region_count", p.region_count()},
            {"boundaries", p.boundaries},
            {"proxies", p.proxies},
            {"proxy_values", p.proxy_values}};
}

} // namespace thermalsr
