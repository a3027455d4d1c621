#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "thermalsr/image.hpp"
#include "thermalsr/rng.hpp"

namespace thermalsr {

enum class ProxyStrategy { middle, random, zero };

std::string_view to_string(ProxyStrategy s) noexcept;
/// Throws ConfigError for unknown names.
ProxyStrategy parse_strategy(std::string_view name);

struct QuantizerConfig {
    double mean = 17.0;
    double std = 2.0;
    int count_min = 7;
    int count_max = 27;
    int step = 2;
    ProxyStrategy strategy = ProxyStrategy::random;
    double zero_keep_prob = 0.5;

    /// Throws ConfigError if any invariant is violated.
    void validate() const;
};

/// Boundaries a_1 < ... < a_n with a_1 = v_min and a_n = v_max. Region 0 is
/// the closed interval [a_1, a_2]; region j > 0 is the half-open (a_j, a_{j+1}].
/// A flat channel (v_min == v_max) is represented by the single boundary
/// {v_min} and one degenerate region.
struct ChannelPartition {
    int channel_index = 0;
    std::vector<Sample> boundaries;
    /// Proxy per region before snapping to the sample grid.
    std::vector<double> proxy_values;
    /// Proxy per region on the integer sample grid, always inside its region.
    std::vector<Sample> proxies;
    /// Interval count drawn for this channel (may exceed region_count()).
    int drawn_count = 0;

    std::size_t region_count() const noexcept {
        return boundaries.size() <= 1 ? 1 : boundaries.size() - 1;
    }
    bool has_proxies() const noexcept { return proxies.size() == region_count(); }

    /// Index of the region containing `value` (binary search). `value` must lie
    /// in [boundaries.front(), boundaries.back()].
    std::size_t region_of(Sample value) const noexcept;

    /// Smallest and largest sample value belonging to region j.
    std::pair<Sample, Sample> region_members(std::size_t j) const noexcept;
    /// a_{j+1} - a_j; zero for the degenerate region.
    double region_width(std::size_t j) const noexcept;
    double max_region_width() const noexcept;
};

double gaussian_pdf(double x, double mean, double stddev);

/// The interval-count rule applied to an already drawn value:
/// round, clamp to [count_min, count_max], push to the next step, re-clamp.
int interval_count_from_draw(double z, const QuantizerConfig& cfg) noexcept;

int sample_interval_count(const QuantizerConfig& cfg, RngStream& rng);

/// K-1 interior boundaries drawn uniformly from the integers strictly inside
/// (v_min, v_max), deduplicated and sorted.
ChannelPartition generate_partition(const PixelStats& stats, int count, RngStream& rng);

/// K equal-width regions (boundaries rounded to the sample grid). Used for
/// controlled degradation sweeps.
ChannelPartition uniform_partition(const PixelStats& stats, int count);

/// Proxy a_lo + (a_hi - a_lo) * p for p in (0, 1].
double random_proxy(double lo, double hi, double p) noexcept;

/// Fills proxies. `zero` uses midpoints here; its pixel dropout happens in
/// apply_partition.
ChannelPartition assign_proxies(ChannelPartition partition, ProxyStrategy strategy, RngStream& rng);

/// Maps every sample of channel `partition.channel_index` to its region proxy.
/// With strategy zero each pixel is replaced by 0 with probability
/// 1 - zero_keep_prob, drawing from `rng` in raster order.
std::vector<Sample> apply_partition(const ImageBuffer& img, const ChannelPartition& partition,
                                    ProxyStrategy strategy = ProxyStrategy::middle,
                                    double zero_keep_prob = 1.0, RngStream* rng = nullptr);

struct QuantizeResult {
    ImageBuffer image;
    std::vector<ChannelPartition> partitions;
};

/// Gaussian probability-guided quantization. Channel c consumes the substream
/// `rng.derive(c)`, so the result depends only on (rng key, cfg, img).
QuantizeResult quantize_image(const ImageBuffer& img, const QuantizerConfig& cfg, const RngStream& rng);

/// Quantize with a fixed set of partitions (one per channel).
ImageBuffer requantize(const ImageBuffer& img, std::span<const ChannelPartition> partitions);

nlohmann::json to_json(const QuantizerConfig& cfg, std::uint64_t seed);
/// Missing keys take defaults. Returns the config and the optional seed.
std::pair<QuantizerConfig, std::optional<std::uint64_t>> quantizer_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ChannelPartition& p);

} // namespace thermalsr
