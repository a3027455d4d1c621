#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "thermalsr/image.hpp"
#include "thermalsr/manifest.hpp"
#include "thermalsr/quantizer.hpp"

namespace thermalsr {

enum class ResampleKernel { bicubic, box, nearest };
enum class DegradationOrder { quantize_first, downsample_first };

std::string_view to_string(ResampleKernel k) noexcept;
std::string_view to_string(DegradationOrder o) noexcept;
ResampleKernel parse_kernel(std::string_view name);
DegradationOrder parse_order(std::string_view name);

/// Separable resize to an arbitrary size. Bicubic uses the a = -0.5 cubic and
/// widens its support by the scale factor when shrinking (antialiasing);
/// out-of-image taps are dropped and the remaining weights renormalised.
ImageBuffer resize(const ImageBuffer& img, int out_width, int out_height, ResampleKernel kernel);

/// Integer-factor reduction. Dimensions must be divisible by `scale`.
ImageBuffer downsample(const ImageBuffer& img, int scale, ResampleKernel kernel);

/// Integer-factor enlargement; the naive SR baseline.
ImageBuffer upsample(const ImageBuffer& img, int scale, ResampleKernel kernel = ResampleKernel::bicubic);

struct DegradationRecipe {
    int scale = 4;
    ResampleKernel kernel = ResampleKernel::bicubic;
    std::optional<QuantizerConfig> quantizer = QuantizerConfig{};
    DegradationOrder order = DegradationOrder::quantize_first;
    std::uint64_t seed = 0;

    void validate() const;
};

nlohmann::json to_json(const DegradationRecipe& r);
DegradationRecipe recipe_from_json(const nlohmann::json& j);

struct DegradedPair {
    ImageBuffer lr;
    ImageBuffer hr;
    /// Interval count drawn per channel; empty when quantization is disabled.
    std::vector<int> k_per_channel;
};

/// `rng` is the per-image substream; quantization of channel c uses rng.derive(c).
DegradedPair make_pair(const ImageBuffer& hr, const DegradationRecipe& recipe, const RngStream& rng);
/// Convenience overload using RngStream(recipe.seed) directly.
DegradedPair make_pair(const ImageBuffer& hr, const DegradationRecipe& recipe);

struct DegradationEntry {
    std::string id;
    std::uint64_t substream = 0;
    std::vector<int> k_per_channel;
    std::string lr_path;
    std::string hr_path;
};

struct DegradationReport {
    DegradationRecipe recipe;
    std::vector<DegradationEntry> images;
    /// Manifest ids that failed, with the reason.
    std::vector<std::pair<std::string, std::string>> skipped;
};

nlohmann::json to_json(const DegradationReport& r);

struct BatchOptions {
    unsigned threads = 1;
    /// Merged into the written report under "provenance".
    nlohmann::json provenance = nlohmann::json::object();
    std::string report_name = "degradation_report.json";
};

/// Writes out_dir/lr/<id>.<ext> and out_dir/hr/<id>.<ext> for every manifest
/// entry plus a JSON report. Image i (in manifest order) uses the substream
/// RngStream(recipe.seed).derive(i). A failing image leaves no files behind and
/// is listed under "skipped". An empty manifest writes nothing.
DegradationReport batch_degrade(const DatasetManifest& manifest, const DegradationRecipe& recipe,
                                const std::filesystem::path& out_dir, const BatchOptions& options = {});

} // namespace thermalsr
