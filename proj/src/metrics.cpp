#include "thermalsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "thermalsr/error.hpp"
#include "thermalsr/util.hpp"

namespace thermalsr {

namespace {

void require_same_shape(const ImageBuffer& a, const ImageBuffer& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " + std::to_string(a.width()) + "x" +
                         std::to_string(a.height()) + "x" + std::to_string(a.channels()) + " vs " +
                         std::to_string(b.width()) + "x" + std::to_string(b.height()) + "x" +
                         std::to_string(b.channels()));
}

void require_same_depth(const ImageBuffer& a, const ImageBuffer& b, const char* what) {
    if (a.bit_depth() != b.bit_depth())
        throw ShapeError(std::string(what) + ": bit depth mismatch");
}

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(size);
    const double r = (size - 1) / 2.0;
    double total = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - r;
        w[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
        total += w[i];
    }
    for (double& x : w)
        x /= total;
    return w;
}

// Separable "valid" correlation with a symmetric 1-D window.
Plane filter_valid(const Plane& p, const std::vector<double>& w) {
    const int k = static_cast<int>(w.size());
    const int ow = p.width - k + 1;
    const int oh = p.height - k + 1;
    std::vector<double> tmp(static_cast<std::size_t>(ow) * p.height);
    for (int y = 0; y < p.height; ++y) {
        const double* row = p.values.data() + static_cast<std::size_t>(y) * p.width;
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < k; ++i)
                acc += w[i] * row[x + i];
            tmp[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    }
    Plane out{ow, oh, std::vector<double>(static_cast<std::size_t>(ow) * oh)};
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < k; ++i)
                acc += w[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
            out.values[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    }
    return out;
}

Plane elementwise(const Plane& a, const Plane& b) {
    Plane out{a.width, a.height, std::vector<double>(a.values.size())};
    for (std::size_t i = 0; i < a.values.size(); ++i)
        out.values[i] = a.values[i] * b.values[i];
    return out;
}

struct SsimTerms {
    double ssim = 0.0;
    double cs = 0.0;
};

SsimTerms ssim_terms(const Plane& a, const Plane& b, double range, const SsimParams& p) {
    if (a.width != b.width || a.height != b.height)
        throw ShapeError("ssim: shape mismatch");
    if (std::min(a.width, a.height) < p.window)
        throw ShapeError("ssim: image " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                         " is smaller than the " + std::to_string(p.window) + "-pixel window");
    const auto w = gaussian_window(p.window, p.sigma);
    const Plane mu_a = filter_valid(a, w);
    const Plane mu_b = filter_valid(b, w);
    const Plane e_aa = filter_valid(elementwise(a, a), w);
    const Plane e_bb = filter_valid(elementwise(b, b), w);
    const Plane e_ab = filter_valid(elementwise(a, b), w);
    const double c1 = (p.k1 * range) * (p.k1 * range);
    const double c2 = (p.k2 * range) * (p.k2 * range);
    const std::size_t n = mu_a.values.size();
    std::vector<double> s(n), cs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double ma = mu_a.values[i];
        const double mb = mu_b.values[i];
        const double va = e_aa.values[i] - ma * ma;
        const double vb = e_bb.values[i] - mb * mb;
        const double cov = e_ab.values[i] - ma * mb;
        const double contrast = (2.0 * cov + c2) / (va + vb + c2);
        s[i] = (2.0 * (ma * mb) + c1) / (ma * ma + mb * mb + c1) * contrast;
        cs[i] = contrast;
    }
    return {pairwise_mean(s), pairwise_mean(cs)};
}

// 2x2 mean pooling; a trailing odd row/column is dropped.
Plane halve(const Plane& p) {
    const int w = p.width / 2;
    const int h = p.height / 2;
    Plane out{w, h, std::vector<double>(static_cast<std::size_t>(w) * h)};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.values[static_cast<std::size_t>(y) * w + x] =
                0.25 * (p.at(2 * x, 2 * y) + p.at(2 * x + 1, 2 * y) + p.at(2 * x, 2 * y + 1) + p.at(2 * x + 1, 2 * y + 1));
    return out;
}

double range_for(const ImageBuffer& img, const std::optional<double>& override_range) {
    return override_range ? *override_range : static_cast<double>(img.max_value());
}

} // namespace

Plane to_luma(const ImageBuffer& img) {
    Plane p{img.width(), img.height(), std::vector<double>(img.pixel_count())};
    const auto s = img.samples();
    if (img.channels() == 1) {
        for (std::size_t i = 0; i < p.values.size(); ++i)
            p.values[i] = s[i];
    } else {
        for (std::size_t i = 0; i < p.values.size(); ++i)
            p.values[i] = 0.299 * s[3 * i] + 0.587 * s[3 * i + 1] + 0.114 * s[3 * i + 2];
    }
    return p;
}

double l2_loss(const ImageBuffer& a, const ImageBuffer& b) {
    require_same_shape(a, b, "l2_loss");
    const auto sa = a.samples();
    const auto sb = b.samples();
    const double na = a.max_value();
    const double nb = b.max_value();
    std::vector<double> sq(sa.size());
    for (std::size_t i = 0; i < sa.size(); ++i) {
        const double d = sa[i] / na - sb[i] / nb;
        sq[i] = d * d;
    }
    return pairwise_mean(sq);
}

PsnrValue psnr(const ImageBuffer& a, const ImageBuffer& b) {
    require_same_shape(a, b, "psnr");
    require_same_depth(a, b, "psnr");
    const auto sa = a.samples();
    const auto sb = b.samples();
    std::vector<double> sq(sa.size());
    for (std::size_t i = 0; i < sa.size(); ++i) {
        const double d = static_cast<double>(sa[i]) - static_cast<double>(sb[i]);
        sq[i] = d * d;
    }
    const double mse = pairwise_mean(sq);
    if (mse == 0.0)
        return {std::numeric_limits<double>::infinity(), true};
    const double peak = a.max_value();
    return {10.0 * std::log10(peak * peak / mse), false};
}

double ssim(const Plane& a, const Plane& b, double dynamic_range, const SsimParams& params) {
    return ssim_terms(a, b, dynamic_range, params).ssim;
}

double ssim(const ImageBuffer& a, const ImageBuffer& b, const SsimParams& params) {
    require_same_shape(a, b, "ssim");
    require_same_depth(a, b, "ssim");
    return ssim(to_luma(a), to_luma(b), range_for(a, params.dynamic_range), params);
}

double ms_ssim(const ImageBuffer& a, const ImageBuffer& b, const MsSsimParams& params) {
    require_same_shape(a, b, "ms_ssim");
    require_same_depth(a, b, "ms_ssim");
    if (params.weights.empty())
        throw ConfigError("ms_ssim needs at least one scale weight");
    std::vector<double> weights = params.weights;
    const int min_dim = std::min(a.width(), a.height());
    auto fits = [&](std::size_t scales) {
        return static_cast<long long>(min_dim) >= static_cast<long long>(params.ssim.window) << (scales - 1);
    };
    if (!fits(weights.size())) {
        if (!params.auto_reduce_scales)
            throw ShapeError("ms_ssim: min dimension " + std::to_string(min_dim) + " < " +
                             std::to_string(params.ssim.window << (weights.size() - 1)) + " required for " +
                             std::to_string(weights.size()) + " scales");
        while (weights.size() > 1 && !fits(weights.size()))
            weights.pop_back();
        if (!fits(weights.size()))
            throw ShapeError("ms_ssim: image smaller than the SSIM window");
        double total = 0.0;
        for (double w : weights)
            total += w;
        for (double& w : weights)
            w /= total;
    }
    const double range = range_for(a, params.ssim.dynamic_range);
    Plane pa = to_luma(a);
    Plane pb = to_luma(b);
    double result = 1.0;
    for (std::size_t s = 0; s < weights.size(); ++s) {
        if (s > 0) {
            pa = halve(pa);
            pb = halve(pb);
        }
        const SsimTerms t = ssim_terms(pa, pb, range, params.ssim);
        const double term = s + 1 == weights.size() ? t.ssim : t.cs;
        result *= std::pow(std::max(term, 0.0), weights[s]);
    }
    return result;
}

unsigned parse_metric_list(const std::string& list) {
    unsigned mask = 0;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (item == "psnr")
            mask |= metric_psnr;
        else if (item == "ssim")
            mask |= metric_ssim;
        else if (item == "ms-ssim" || item == "ms_ssim" || item == "msssim")
            mask |= metric_ms_ssim;
        else if (item == "fsim")
            mask |= metric_fsim;
        else if (!item.empty())
            throw ConfigError("unknown metric '" + item + "' (expected psnr,ssim,ms-ssim,fsim)");
    }
    if (mask == 0)
        throw ConfigError("empty metric list");
    return mask;
}

MetricReport evaluate_pair(const ImageBuffer& gt, const ImageBuffer& pred, std::string pair_id,
                           const EvalOptions& options) {
    require_same_shape(gt, pred, "evaluate_pair");
    require_same_depth(gt, pred, "evaluate_pair");
    MetricReport r;
    r.pair_id = std::move(pair_id);
    r.luma = gt.channels() == 3;
    if (options.metrics & metric_psnr)
        r.psnr = psnr(gt, pred);
    if (options.metrics & metric_ssim)
        r.ssim = ssim(gt, pred, options.ssim);
    if (options.metrics & metric_ms_ssim)
        r.ms_ssim = ms_ssim(gt, pred, options.ms_ssim);
    if (options.metrics & metric_fsim) {
        const FsimValue f = fsim(gt, pred);
        r.fsim = f.score;
        r.fsim_degenerate = f.degenerate;
    }
    return r;
}

namespace {

nlohmann::json finite_or_null(double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

std::optional<double> optional_number(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null())
        return std::nullopt;
    return j.at(key).get<double>();
}

} // namespace

nlohmann::json to_json(const MetricReport& r) {
    nlohmann::json j{{"pair_id", r.pair_id}};
    if (r.psnr) {
        j["psnr_db"] = r.psnr->infinite ? nlohmann::json(nullptr) : nlohmann::json(r.psnr->db);
        j["psnr_infinite"] = r.psnr->infinite;
    }
    if (r.ssim)
        j["ssim"] = finite_or_null(*r.ssim);
    if (r.ms_ssim)
        j["ms_ssim"] = finite_or_null(*r.ms_ssim);
    if (r.fsim) {
        j["fsim"] = finite_or_null(*r.fsim);
        if (r.fsim_degenerate)
            j["fsim_degenerate"] = true;
    }
    if (r.lpips)
        j["lpips"] = *r.lpips;
    if (r.luma)
        j["luma"] = true;
    return j;
}

MetricReport metric_report_from_json(const nlohmann::json& j) {
    MetricReport r;
    try {
        r.pair_id = j.value("pair_id", std::string{});
        if (j.contains("psnr_infinite") || j.contains("psnr_db")) {
            PsnrValue p;
            p.infinite = j.value("psnr_infinite", false);
            p.db = p.infinite ? std::numeric_limits<double>::infinity()
                              : optional_number(j, "psnr_db").value_or(std::numeric_limits<double>::quiet_NaN());
            r.psnr = p;
        }
        const double nan = std::numeric_limits<double>::quiet_NaN();
        if (j.contains("ssim"))
            r.ssim = optional_number(j, "ssim").value_or(nan);
        if (j.contains("ms_ssim"))
            r.ms_ssim = optional_number(j, "ms_ssim").value_or(nan);
        if (j.contains("fsim"))
            r.fsim = optional_number(j, "fsim").value_or(nan);
        r.fsim_degenerate = j.value("fsim_degenerate", false);
        r.lpips = optional_number(j, "lpips");
        r.luma = j.value("luma", false);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("metric report: ") + e.what());
    }
    return r;
}

} // namespace thermalsr
