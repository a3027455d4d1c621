#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "thermalsr/manifest.hpp"
#include "thermalsr/metrics.hpp"

namespace thermalsr {

struct MetricMeans {
    std::size_t count = 0;
    /// Mean over finite PSNR values; pairs flagged infinite are counted apart.
    std::optional<double> psnr_db;
    std::size_t psnr_infinite = 0;
    std::optional<double> ssim;
    std::optional<double> ms_ssim;
    std::optional<double> fsim;
    std::optional<double> lpips;
};

MetricMeans aggregate(std::span<const MetricReport> reports);

struct BenchmarkResult {
    std::string method;
    int scale = 0;
    std::vector<MetricReport> per_image;
    MetricMeans means;
    /// Ids with no usable prediction. A non-empty list excludes the method
    /// from ranking.
    std::vector<std::string> missing;

    bool complete() const noexcept { return missing.empty(); }
};

nlohmann::json to_json(const BenchmarkResult& r);
BenchmarkResult benchmark_result_from_json(const nlohmann::json& j);

/// First existing `dir/<id>.<ext>` over the supported extensions.
std::optional<std::filesystem::path> find_image(const std::filesystem::path& dir, const std::string& id);

struct BenchmarkOptions {
    EvalOptions eval;
    unsigned threads = 1;
};

/// Evaluates every test-split entry of `manifest` (all entries if none is
/// assigned to test) against each method's predictions. Both images are
/// cropped to a multiple of `scale` before comparison.
std::vector<BenchmarkResult> run_benchmark(const DatasetManifest& manifest, const std::filesystem::path& gt_dir,
                                           const std::map<std::string, std::filesystem::path>& pred_dirs, int scale,
                                           const BenchmarkOptions& options = {});

enum class ReportFormat { markdown, json, csv };
ReportFormat parse_report_format(std::string_view name);

/// Dense ranks (1 = best, ties share) of `values`; nullopt entries and
/// excluded rows get rank 0.
std::vector<int> dense_ranks(std::span<const std::optional<double>> values, bool higher_is_better,
                             std::span<const bool> excluded = {});

/// One row per method. Markdown marks the best value per column in bold and
/// the second best in italics; incomplete methods are listed but unranked.
std::string render_report(std::span<const BenchmarkResult> results, ReportFormat format);

/// Per-pair CSV with a trailing mean row.
std::string render_pairs_csv(const BenchmarkResult& result, unsigned metrics = metric_all);

} // namespace thermalsr
