#include "thermalsr/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "thermalsr/error.hpp"

namespace thermalsr {

void DivergencePolicy::validate() const {
    if (window < 1)
        throw ConfigError("divergence window must be >= 1");
    if (!(rel_threshold > 0.0) || !std::isfinite(rel_threshold))
        throw ConfigError("divergence threshold must be > 0");
    if (min_history < 0)
        throw ConfigError("min_history must be >= 0");
}

CurvePoint parse_curve_line(std::string_view line, std::size_t line_number) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("malformed JSON: ") + e.what(), line_number);
    }
    if (!j.is_object())
        throw DataError("expected a JSON object", line_number);
    if (!j.contains("step") || !j.at("step").is_number_integer())
        throw DataError("missing or non-integer 'step'", line_number);
    if (!j.contains("val_loss") || !j.at("val_loss").is_number())
        throw DataError("missing or non-numeric 'val_loss'", line_number);
    CurvePoint p;
    p.step = j.at("step").get<std::int64_t>();
    p.val_loss = j.at("val_loss").get<double>();
    if (!std::isfinite(p.val_loss) || p.val_loss < 0.0)
        throw DataError("'val_loss' must be finite and >= 0", line_number);
    if (j.contains("val_psnr") && !j.at("val_psnr").is_null()) {
        if (!j.at("val_psnr").is_number())
            throw DataError("non-numeric 'val_psnr'", line_number);
        p.val_psnr = j.at("val_psnr").get<double>();
    }
    return p;
}

TrainingCurve ingest_curve(std::istream& in, std::string run_id) {
    TrainingCurve curve{std::move(run_id), {}};
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        CurvePoint p = parse_curve_line(line, n);
        if (!curve.points.empty()) {
            const std::int64_t prev = curve.points.back().step;
            if (p.step == prev)
                throw DataError("duplicate step " + std::to_string(p.step), n);
            if (p.step < prev)
                throw DataError("step " + std::to_string(p.step) + " is out of order (after " +
                                    std::to_string(prev) + ")",
                                n);
        }
        curve.points.push_back(p);
    }
    if (curve.points.empty())
        throw DataError("curve '" + curve.run_id + "' has no evaluations");
    return curve;
}

DivergenceMonitor::DivergenceMonitor(DivergencePolicy policy) : policy_(policy) { policy_.validate(); }

bool DivergenceMonitor::push(const CurvePoint& p) {
    if (seen_ > 0 && p.step <= last_step_)
        throw DataError("step " + std::to_string(p.step) + " does not increase past " + std::to_string(last_step_));
    last_step_ = p.step;
    ++seen_;
    if (seen_ == 1 || p.val_loss < best_loss_) {
        best_loss_ = p.val_loss;
        best_step_ = p.step;
        best_psnr_ = p.val_psnr;
        above_ = 0;
    } else if (p.val_loss > (1.0 + policy_.rel_threshold) * best_loss_) {
        ++above_;
    } else {
        above_ = 0;
    }
    if (!divergence_ && above_ >= policy_.window && seen_ >= static_cast<std::size_t>(policy_.min_history)) {
        divergence_ = best_step_;
        return true;
    }
    return false;
}

std::optional<std::int64_t> detect_divergence(const TrainingCurve& curve, const DivergencePolicy& policy) {
    DivergenceMonitor m(policy);
    for (const CurvePoint& p : curve.points)
        if (m.push(p))
            break;
    return m.divergence_step();
}

std::int64_t recommend_stop(const TrainingCurve& curve) {
    if (curve.points.empty())
        throw DataError("empty curve");
    const auto it = std::min_element(curve.points.begin(), curve.points.end(),
                                     [](const CurvePoint& a, const CurvePoint& b) { return a.val_loss < b.val_loss; });
    return it->step;
}

namespace {

RunSummary summarize(const TrainingCurve& curve, const DivergencePolicy& policy) {
    if (curve.points.empty())
        throw DataError("curve '" + curve.run_id + "' has no evaluations");
    RunSummary s;
    s.run_id = curve.run_id;
    s.divergence_step = detect_divergence(curve, policy);
    const auto it = std::min_element(curve.points.begin(), curve.points.end(),
                                     [](const CurvePoint& a, const CurvePoint& b) { return a.val_loss < b.val_loss; });
    s.best_step = it->step;
    s.best_val_loss = it->val_loss;
    for (const CurvePoint& p : curve.points)
        if (p.val_psnr && (!s.best_val_psnr || *p.val_psnr > *s.best_val_psnr))
            s.best_val_psnr = p.val_psnr;
    return s;
}

bool same_standing(const RunSummary& a, const RunSummary& b) {
    return a.divergence_step.has_value() == b.divergence_step.has_value() && a.best_val_loss == b.best_val_loss;
}

} // namespace

RunComparison compare_runs(std::span<const TrainingCurve> curves, const DivergencePolicy& policy) {
    if (curves.size() < 2)
        throw ConfigError("compare_runs needs at least 2 curves");
    RunComparison out;
    for (const auto& c : curves)
        out.ranked.push_back(summarize(c, policy));
    std::stable_sort(out.ranked.begin(), out.ranked.end(), [](const RunSummary& a, const RunSummary& b) {
        const bool da = a.divergence_step.has_value();
        const bool db = b.divergence_step.has_value();
        if (da != db)
            return !da;
        return a.best_val_loss < b.best_val_loss;
    });
    for (std::size_t i = 0; i < out.ranked.size();) {
        std::size_t j = i + 1;
        while (j < out.ranked.size() && same_standing(out.ranked[i], out.ranked[j]))
            ++j;
        std::vector<std::string> group;
        for (std::size_t k = i; k < j; ++k) {
            out.ranked[k].rank = static_cast<int>(i) + 1;
            group.push_back(out.ranked[k].run_id);
        }
        if (group.size() > 1)
            out.ties.push_back(std::move(group));
        i = j;
    }
    return out;
}

nlohmann::json verdict_json(const TrainingCurve& curve, const DivergencePolicy& policy) {
    const RunSummary s = summarize(curve, policy);
    nlohmann::json j{{"diverged", s.divergence_step.has_value()},
                     {"divergence_step", s.divergence_step ? nlohmann::json(*s.divergence_step) : nlohmann::json(nullptr)},
                     {"recommended_stop", s.best_step},
                     {"best_val_loss", s.best_val_loss}};
    if (!curve.run_id.empty())
        j["run_id"] = curve.run_id;
    if (s.best_val_psnr)
        j["best_val_psnr"] = *s.best_val_psnr;
    j["evaluations"] = curve.points.size();
    j["policy"] = {{"window", policy.window}, {"rel_threshold", policy.rel_threshold}, {"min_history", policy.min_history}};
    return j;
}

nlohmann::json to_json(const RunComparison& c) {
    nlohmann::json runs = nlohmann::json::array();
    for (const RunSummary& s : c.ranked) {
        nlohmann::json r{{"run_id", s.run_id},
                         {"rank", s.rank},
                         {"diverged", s.divergence_step.has_value()},
                         {"divergence_step", s.divergence_step ? nlohmann::json(*s.divergence_step) : nlohmann::json(nullptr)},
                         {"best_step", s.best_step},
                         {"best_val_loss", s.best_val_loss}};
        if (s.best_val_psnr)
            r["best_val_psnr"] = *s.best_val_psnr;
        runs.push_back(std::move(r));
    }
    return {{"runs", runs}, {"ties", c.ties}};
}

} // namespace thermalsr
