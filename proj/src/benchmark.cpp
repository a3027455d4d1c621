#include "thermalsr/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <sstream>

#include "thermalsr/error.hpp"
#include "thermalsr/image_io.hpp"
#include "thermalsr/util.hpp"

namespace thermalsr {

namespace fs = std::filesystem;

namespace {

std::optional<double> mean_of(const std::vector<double>& v) {
    if (v.empty())
        return std::nullopt;
    return pairwise_mean(v);
}

void collect(std::vector<double>& out, const std::optional<double>& v) {
    if (v && std::isfinite(*v))
        out.push_back(*v);
}

std::string fmt(double v, int precision) {
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    if (std::isnan(v))
        return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

std::string exact(double v) {
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    if (std::isnan(v))
        return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::json optional_json(const std::optional<double>& v) {
    return v && std::isfinite(*v) ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null())
        return std::nullopt;
    return j.at(key).get<double>();
}

struct Column {
    const char* header;
    const char* key;
    bool higher_is_better;
    int precision;
    std::optional<double> (*value)(const MetricMeans&);
};

// PSNR of a method whose every pair is identical to the ground truth ranks as +inf.
std::optional<double> psnr_rank_value(const MetricMeans& m) {
    if (m.psnr_db)
        return m.psnr_db;
    if (m.count > 0 && m.psnr_infinite == m.count)
        return std::numeric_limits<double>::infinity();
    return std::nullopt;
}

const Column kColumns[] = {
    {"PSNR↑", "psnr", true, 2, psnr_rank_value},
    {"SSIM↑", "ssim", true, 4, [](const MetricMeans& m) { return m.ssim; }},
    {"FSIM↑", "fsim", true, 4, [](const MetricMeans& m) { return m.fsim; }},
    {"MS-SSIM↑", "ms_ssim", true, 4, [](const MetricMeans& m) { return m.ms_ssim; }},
    {"LPIPS↓", "lpips", false, 4, [](const MetricMeans& m) { return m.lpips; }},
};

} // namespace

MetricMeans aggregate(std::span<const MetricReport> reports) {
    MetricMeans m;
    m.count = reports.size();
    std::vector<double> psnr, ssim, ms, fs, lp;
    for (const MetricReport& r : reports) {
        if (r.psnr) {
            if (r.psnr->infinite)
                ++m.psnr_infinite;
            else
                collect(psnr, r.psnr->db);
        }
        collect(ssim, r.ssim);
        collect(ms, r.ms_ssim);
        collect(fs, r.fsim);
        collect(lp, r.lpips);
    }
    m.psnr_db = mean_of(psnr);
    m.ssim = mean_of(ssim);
    m.ms_ssim = mean_of(ms);
    m.fsim = mean_of(fs);
    m.lpips = mean_of(lp);
    return m;
}

nlohmann::json to_json(const BenchmarkResult& r) {
    nlohmann::json per = nlohmann::json::array();
    for (const MetricReport& m : r.per_image)
        per.push_back(to_json(m));
    nlohmann::json means{{"count", r.means.count},
                         {"psnr_db", optional_json(r.means.psnr_db)},
                         {"psnr_infinite", r.means.psnr_infinite},
                         {"ssim", optional_json(r.means.ssim)},
                         {"ms_ssim", optional_json(r.means.ms_ssim)},
                         {"fsim", optional_json(r.means.fsim)}};
    if (r.means.lpips)
        means["lpips"] = *r.means.lpips;
    return {{"method", r.method}, {"scale", r.scale},    {"complete", r.complete()},
            {"missing", r.missing}, {"means", means}, {"per_image", per}};
}

BenchmarkResult benchmark_result_from_json(const nlohmann::json& j) {
    BenchmarkResult r;
    try {
        r.method = j.at("method").get<std::string>();
        r.scale = j.value("scale", 0);
        r.missing = j.value("missing", std::vector<std::string>{});
        if (j.contains("per_image"))
            for (const auto& p : j.at("per_image"))
                r.per_image.push_back(metric_report_from_json(p));
        r.means = aggregate(r.per_image);
        // Externally supplied means (e.g. LPIPS computed elsewhere) fill gaps.
        if (j.contains("means")) {
            const auto& m = j.at("means");
            if (r.per_image.empty()) {
                r.means.count = m.value("count", std::size_t{0});
                r.means.psnr_db = optional_from(m, "psnr_db");
                r.means.psnr_infinite = m.value("psnr_infinite", std::size_t{0});
                r.means.ssim = optional_from(m, "ssim");
                r.means.ms_ssim = optional_from(m, "ms_ssim");
                r.means.fsim = optional_from(m, "fsim");
            }
            if (!r.means.lpips)
                r.means.lpips = optional_from(m, "lpips");
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("benchmark result: ") + e.what());
    }
    return r;
}

std::optional<fs::path> find_image(const fs::path& dir, const std::string& id) {
    for (const char* ext : {".png", ".pgm", ".ppm", ".pnm"}) {
        fs::path p = dir / (id + ext);
        std::error_code ec;
        if (fs::is_regular_file(p, ec))
            return p;
    }
    return std::nullopt;
}

std::vector<BenchmarkResult> run_benchmark(const DatasetManifest& manifest, const fs::path& gt_dir,
                                           const std::map<std::string, fs::path>& pred_dirs, int scale,
                                           const BenchmarkOptions& options) {
    if (scale < 1)
        throw ConfigError("benchmark scale must be >= 1");
    if (pred_dirs.empty())
        throw ConfigError("benchmark needs at least one method");
    std::vector<ManifestEntry> entries = manifest.in_split(Split::test);
    if (entries.empty())
        entries = manifest.entries;

    std::vector<std::string> methods;
    std::vector<fs::path> dirs;
    for (const auto& [name, dir] : pred_dirs) {
        methods.push_back(name);
        dirs.push_back(dir);
    }

    const std::size_t n_img = entries.size();
    std::vector<std::optional<MetricReport>> slots(methods.size() * n_img);
    parallel_for(slots.size(), options.threads, [&](std::size_t k) {
        const std::size_t m = k / n_img;
        const ManifestEntry& e = entries[k % n_img];
        try {
            const auto gt_path = find_image(gt_dir, e.id);
            const auto pred_path = find_image(dirs[m], e.id);
            if (!gt_path || !pred_path)
                return;
            const ImageBuffer gt = crop_to_multiple(load_image(*gt_path), scale);
            const ImageBuffer pred = crop_to_multiple(load_image(*pred_path), scale);
            slots[k] = evaluate_pair(gt, pred, e.id, options.eval);
        } catch (const Error&) {
            // Unreadable or mismatched pairs count as missing predictions.
        }
    });

    std::vector<BenchmarkResult> out;
    for (std::size_t m = 0; m < methods.size(); ++m) {
        BenchmarkResult r;
        r.method = methods[m];
        r.scale = scale;
        for (std::size_t i = 0; i < n_img; ++i) {
            auto& slot = slots[m * n_img + i];
            if (slot)
                r.per_image.push_back(std::move(*slot));
            else
                r.missing.push_back(entries[i].id);
        }
        r.means = aggregate(r.per_image);
        out.push_back(std::move(r));
    }
    return out;
}

ReportFormat parse_report_format(std::string_view name) {
    if (name == "markdown" || name == "md")
        return ReportFormat::markdown;
    if (name == "json")
        return ReportFormat::json;
    if (name == "csv")
        return ReportFormat::csv;
    throw ConfigError("unknown report format '" + std::string(name) + "' (expected markdown|json|csv)");
}

std::vector<int> dense_ranks(std::span<const std::optional<double>> values, bool higher_is_better,
                             std::span<const bool> excluded) {
    auto usable = [&](std::size_t i) {
        return values[i] && !std::isnan(*values[i]) && (excluded.empty() || !excluded[i]);
    };
    std::vector<double> distinct;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (usable(i))
            distinct.push_back(*values[i]);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (higher_is_better)
        std::reverse(distinct.begin(), distinct.end());
    std::vector<int> ranks(values.size(), 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!usable(i))
            continue;
        const auto it = std::find(distinct.begin(), distinct.end(), *values[i]);
        ranks[i] = static_cast<int>(it - distinct.begin()) + 1;
    }
    return ranks;
}

std::string render_report(std::span<const BenchmarkResult> results, ReportFormat format) {
    if (results.empty())
        throw ConfigError("report needs at least one result");
    const bool with_lpips =
        std::any_of(results.begin(), results.end(), [](const BenchmarkResult& r) { return r.means.lpips.has_value(); });
    std::vector<const Column*> cols;
    for (const Column& c : kColumns)
        if (std::string_view(c.key) != "lpips" || with_lpips)
            cols.push_back(&c);

    auto excluded = std::make_unique<bool[]>(results.size());
    for (std::size_t i = 0; i < results.size(); ++i)
        excluded[i] = !results[i].complete();
    const std::span<const bool> ex(excluded.get(), results.size());

    std::vector<std::vector<std::optional<double>>> values(cols.size());
    std::vector<std::vector<int>> ranks(cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) {
        for (const auto& r : results)
            values[c].push_back(cols[c]->value(r.means));
        ranks[c] = dense_ranks(values[c], cols[c]->higher_is_better, ex);
    }

    std::ostringstream os;
    if (format == ReportFormat::markdown) {
        os << "| Method | Scale |";
        for (const Column* c : cols)
            os << ' ' << c->header << " |";
        os << " N |\n|---|---|";
        for (std::size_t c = 0; c < cols.size(); ++c)
            os << "---|";
        os << "---|\n";
        for (std::size_t i = 0; i < results.size(); ++i) {
            const auto& r = results[i];
            os << "| " << r.method << (r.complete() ? "" : " (incomplete)") << " | x" << r.scale << " |";
            for (std::size_t c = 0; c < cols.size(); ++c) {
                const auto& v = values[c][i];
                std::string cell = v ? fmt(*v, cols[c]->precision) : "-";
                if (c == 0 && r.means.psnr_infinite > 0 && r.means.psnr_db)
                    cell += " (+" + std::to_string(r.means.psnr_infinite) + " inf)";
                if (ranks[c][i] == 1)
                    cell = "**" + cell + "**";
                else if (ranks[c][i] == 2)
                    cell = "*" + cell + "*";
                os << ' ' << cell << " |";
            }
            os << ' ' << r.means.count << " |\n";
        }
        os << "\nBold: best per column. Italic: second best. Ties share a rank.\n";
        return os.str();
    }

    if (format == ReportFormat::json) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < results.size(); ++i) {
            const auto& r = results[i];
            nlohmann::json row{{"method", r.method},
                               {"scale", r.scale},
                               {"count", r.means.count},
                               {"complete", r.complete()},
                               {"missing", r.missing},
                               {"psnr_infinite", r.means.psnr_infinite}};
            nlohmann::json rk = nlohmann::json::object();
            for (std::size_t c = 0; c < cols.size(); ++c) {
                const auto& v = values[c][i];
                row[cols[c]->key] = v && std::isfinite(*v) ? nlohmann::json(*v) : nlohmann::json(nullptr);
                rk[cols[c]->key] = ranks[c][i] ? nlohmann::json(ranks[c][i]) : nlohmann::json(nullptr);
            }
            row["rank"] = rk;
            rows.push_back(std::move(row));
        }
        return nlohmann::json{{"results", rows}}.dump(2) + "\n";
    }

    os << "method,scale,count,complete,psnr_infinite";
    for (const Column* c : cols)
        os << ',' << c->key;
    for (const Column* c : cols)
        os << ",rank_" << c->key;
    os << '\n';
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        os << r.method << ',' << r.scale << ',' << r.means.count << ',' << (r.complete() ? "true" : "false") << ','
           << r.means.psnr_infinite;
        for (std::size_t c = 0; c < cols.size(); ++c)
            os << ',' << (values[c][i] ? exact(*values[c][i]) : "");
        for (std::size_t c = 0; c < cols.size(); ++c)
            os << ',' << (ranks[c][i] ? std::to_string(ranks[c][i]) : "");
        os << '\n';
    }
    return os.str();
}

std::string render_pairs_csv(const BenchmarkResult& result, unsigned metrics) {
    std::ostringstream os;
    os << "pair_id";
    if (metrics & metric_psnr)
        os << ",psnr_db";
    if (metrics & metric_ssim)
        os << ",ssim";
    if (metrics & metric_ms_ssim)
        os << ",ms_ssim";
    if (metrics & metric_fsim)
        os << ",fsim";
    os << '\n';
    auto cell = [](const std::optional<double>& v) { return v ? exact(*v) : std::string{}; };
    for (const MetricReport& r : result.per_image) {
        os << r.pair_id;
        if (metrics & metric_psnr)
            os << ',' << (r.psnr ? (r.psnr->infinite ? std::string("inf") : exact(r.psnr->db)) : std::string{});
        if (metrics & metric_ssim)
            os << ',' << cell(r.ssim);
        if (metrics & metric_ms_ssim)
            os << ',' << cell(r.ms_ssim);
        if (metrics & metric_fsim)
            os << ',' << cell(r.fsim);
        os << '\n';
    }
    const MetricMeans& m = result.means;
    os << "mean";
    if (metrics & metric_psnr)
        os << ',' << (m.psnr_db ? exact(*m.psnr_db) : (m.psnr_infinite ? std::string("inf") : std::string{}));
    if (metrics & metric_ssim)
        os << ',' << cell(m.ssim);
    if (metrics & metric_ms_ssim)
        os << ',' << cell(m.ms_ssim);
    if (metrics & metric_fsim)
        os << ',' << cell(m.fsim);
    os << '\n';
    return os.str();
}

} // namespace thermalsr
