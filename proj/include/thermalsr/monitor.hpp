#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace thermalsr {

struct CurvePoint {
    std::int64_t step = 0;
    double val_loss = 0.0;
    std::optional<double> val_psnr;
};

struct TrainingCurve {
    std::string run_id;
    std::vector<CurvePoint> points;
};

/// A divergence is W consecutive evaluations above (1 + rel_threshold) times
/// the running minimum, seen once at least `min_history` evaluations exist.
struct DivergencePolicy {
    int window = 5;
    double rel_threshold = 0.02;
    int min_history = 3;

    void validate() const;
};

/// Parses one JSON-lines record {"step":int,"val_loss":float,"val_psnr":float?}.
CurvePoint parse_curve_line(std::string_view line, std::size_t line_number);

/// Blank lines are ignored. Throws DataError on malformed records, duplicate or
/// decreasing steps, and empty input.
TrainingCurve ingest_curve(std::istream& in, std::string run_id = {});

/// Incremental detector; feeding a curve point by point gives the same
/// answer as detect_divergence on the whole curve.
class DivergenceMonitor {
public:
    explicit DivergenceMonitor(DivergencePolicy policy = {});

    /// Throws DataError if `p.step` does not increase. Returns true exactly
    /// once: on the point that triggers detection.
    bool push(const CurvePoint& p);

    std::optional<std::int64_t> divergence_step() const noexcept { return divergence_; }
    std::int64_t best_step() const noexcept { return best_step_; }
    double best_loss() const noexcept { return best_loss_; }
    std::optional<double> best_psnr() const noexcept { return best_psnr_; }
    std::size_t size() const noexcept { return seen_; }

private:
    DivergencePolicy policy_;
    std::size_t seen_ = 0;
    std::int64_t last_step_ = 0;
    std::int64_t best_step_ = 0;
    double best_loss_ = 0.0;
    std::optional<double> best_psnr_;
    int above_ = 0;
    std::optional<std::int64_t> divergence_;
};

std::optional<std::int64_t> detect_divergence(const TrainingCurve& curve, const DivergencePolicy& policy = {});

/// Step of the minimum validation loss; ties go to the earliest step.
std::int64_t recommend_stop(const TrainingCurve& curve);

struct RunSummary {
    std::string run_id;
    std::optional<std::int64_t> divergence_step;
    std::int64_t best_step = 0;
    double best_val_loss = 0.0;
    std::optional<double> best_val_psnr;
    /// 1-based; tied runs share a rank.
    int rank = 0;
};

struct RunComparison {
    /// Ordered by (diverged, best_val_loss), stable on input order.
    std::vector<RunSummary> ranked;
    /// Groups of run ids that compare equal.
    std::vector<std::vector<std::string>> ties;
};

RunComparison compare_runs(std::span<const TrainingCurve> curves, const DivergencePolicy& policy = {});

/// {"diverged", "divergence_step", "recommended_stop", "best_val_loss", ...}
nlohmann::json verdict_json(const TrainingCurve& curve, const DivergencePolicy& policy = {});
nlohmann::json to_json(const RunComparison& c);

} // namespace thermalsr
