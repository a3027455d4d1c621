#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "thermalsr/image.hpp"

namespace thermalsr {

/// Real-valued single-channel plane.
struct Plane {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    double at(int x, int y) const noexcept { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Grayscale plane in sample units; 3-channel input is reduced with the
/// BT.601 luma weights (0.299, 0.587, 0.114).
Plane to_luma(const ImageBuffer& img);

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    /// Defaults to 2^bit_depth - 1.
    std::optional<double> dynamic_range;
};

struct MsSsimParams {
    SsimParams ssim;
    std::vector<double> weights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    /// Drop (and renormalise) trailing scales that do not fit instead of throwing.
    bool auto_reduce_scales = false;
};

/// Mean squared difference in unit-interval representation.
double l2_loss(const ImageBuffer& a, const ImageBuffer& b);

struct PsnrValue {
    double db = 0.0;
    bool infinite = false;
};

PsnrValue psnr(const ImageBuffer& a, const ImageBuffer& b);

/// Mean local SSIM over the valid window positions (no padding).
double ssim(const ImageBuffer& a, const ImageBuffer& b, const SsimParams& params = {});
double ssim(const Plane& a, const Plane& b, double dynamic_range, const SsimParams& params = {});

/// Product of per-scale contrast-structure terms and the coarsest-scale SSIM,
/// 2x2 mean pooling between scales. Negative terms are clamped to 0.
double ms_ssim(const ImageBuffer& a, const ImageBuffer& b, const MsSsimParams& params = {});

struct FsimValue {
    double score = 0.0;
    /// Both phase-congruency maps vanish (constant inputs). The score is then
    /// 1 for identical images and NaN otherwise.
    bool degenerate = false;
};

/// Feature similarity from phase congruency (log-Gabor bank, 4 scales x 4
/// orientations) and Scharr gradient magnitude, computed on luma scaled to
/// the 8-bit range.
FsimValue fsim(const ImageBuffer& a, const ImageBuffer& b);

/// Phase congruency map of a plane (exposed for tests).
Plane phase_congruency(const Plane& img);

enum MetricMask : unsigned {
    metric_psnr = 1u << 0,
    metric_ssim = 1u << 1,
    metric_ms_ssim = 1u << 2,
    metric_fsim = 1u << 3,
    metric_all = metric_psnr | metric_ssim | metric_ms_ssim | metric_fsim,
};

/// Parses "psnr,ssim,ms-ssim,fsim" style lists. Throws ConfigError.
unsigned parse_metric_list(const std::string& list);

struct MetricReport {
    std::string pair_id;
    std::optional<PsnrValue> psnr;
    std::optional<double> ssim;
    std::optional<double> ms_ssim;
    std::optional<double> fsim;
    bool fsim_degenerate = false;
    /// Optional externally supplied perceptual score (lower is better).
    std::optional<double> lpips;
    /// SSIM/MS-SSIM/FSIM ran on luma of a 3-channel pair.
    bool luma = false;
};

struct EvalOptions {
    unsigned metrics = metric_all;
    SsimParams ssim;
    MsSsimParams ms_ssim;
};

/// All requested metrics, or a ShapeError before any is computed.
MetricReport evaluate_pair(const ImageBuffer& gt, const ImageBuffer& pred, std::string pair_id = {},
                           const EvalOptions& options = {});

nlohmann::json to_json(const MetricReport& r);
MetricReport metric_report_from_json(const nlohmann::json& j);

} // namespace thermalsr
