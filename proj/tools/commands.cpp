#include "commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "thermalsr/benchmark.hpp"
#include "thermalsr/degradation.hpp"
#include "thermalsr/diffusion.hpp"
#include "thermalsr/error.hpp"
#include "thermalsr/image_io.hpp"
#include "thermalsr/manifest.hpp"
#include "thermalsr/metrics.hpp"
#include "thermalsr/monitor.hpp"
#include "thermalsr/quantizer.hpp"
#include "thermalsr/util.hpp"

namespace thermalsr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    unsigned threads = default_thread_count();
    int verbose = 0;
    bool quiet = false;
    CLI::Option* seed_option = nullptr;
    std::vector<std::string> argv;

    bool seed_given() const { return seed_option && seed_option->count() > 0; }
};

json provenance(const Globals& g) {
    return {{"tool_version", tool_version()}, {"seed", g.seed}, {"argv", g.argv}};
}

void info(const Globals& g, const std::string& msg) {
    if (!g.quiet)
        std::cerr << msg << '\n';
}

void debug(const Globals& g, const std::string& msg) {
    if (g.verbose > 0 && !g.quiet)
        std::cerr << msg << '\n';
}

void warn(const std::string& msg) {
    std::cerr << "warning: " << msg << '\n';
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

void list_skipped(const Globals& g, const std::vector<std::pair<std::string, std::string>>& skipped) {
    for (const auto& [what, why] : skipped)
        info(g, "skipped " + what + ": " + why);
}

json skipped_json(const std::vector<std::pair<std::string, std::string>>& skipped) {
    json out = json::array();
    for (const auto& [what, why] : skipped)
        out.push_back({{"path", what}, {"reason", why}});
    return out;
}

void emit_json(const json& j, const std::optional<fs::path>& out) {
    if (out)
        write_json_file(*out, j);
    else
        std::cout << j.dump(2) << '\n';
}

void emit_text(const std::string& text, const std::optional<fs::path>& out) {
    if (out)
        write_text_file(*out, text);
    else
        std::cout << text;
}

// ---------------------------------------------------------------- quantizer

struct QuantizerFlags {
    QuantizerConfig cfg;
    std::string strategy = "random";

    void add(CLI::App* app) {
        app->add_option("--mean", cfg.mean, "Mean of the interval-count distribution")->capture_default_str();
        app->add_option("--std", cfg.std, "Standard deviation of the interval-count distribution")
            ->capture_default_str();
        app->add_option("--count-min", cfg.count_min, "Smallest interval count")->capture_default_str();
        app->add_option("--count-max", cfg.count_max, "Largest interval count")->capture_default_str();
        app->add_option("--step", cfg.step, "Interval-count step")->capture_default_str();
        app->add_option("--strategy", strategy, "Proxy strategy")
            ->check(CLI::IsMember({"random", "middle", "zero"}))
            ->capture_default_str();
        app->add_option("--zero-keep-prob", cfg.zero_keep_prob,
                        "Probability that a pixel keeps its proxy under the zero strategy")
            ->capture_default_str();
    }

    QuantizerConfig resolve() {
        cfg.strategy = parse_strategy(strategy);
        cfg.validate();
        return cfg;
    }
};

// ---------------------------------------------------------------- quantize

struct QuantizeArgs {
    fs::path input;
    fs::path output;
    QuantizerFlags q;
    bool dump_partitions = false;
};

int cmd_quantize(const Globals& g, QuantizeArgs& a) {
    const QuantizerConfig cfg = a.q.resolve();
    const DatasetManifest m = scan_dataset(a.input, std::nullopt);
    list_skipped(g, m.skipped);
    fs::create_directories(a.output);

    const RngStream master(g.seed);
    const std::size_t n = m.entries.size();
    std::vector<std::optional<json>> done(n);
    std::vector<std::string> failures(n);
    parallel_for(n, g.threads, [&](std::size_t i) {
        const ManifestEntry& e = m.entries[i];
        const fs::path rel = fs::path(e.path).lexically_relative(a.input);
        const fs::path out = a.output / rel;
        try {
            const ImageBuffer img = load_image(e.path);
            const QuantizeResult r = quantize_image(img, cfg, master.derive(i));
            fs::create_directories(out.parent_path());
            save_image(r.image, out);
            json entry{{"id", e.id}, {"substream", i}, {"output", rel.generic_string()}};
            json ks = json::array(), regions = json::array();
            for (const auto& p : r.partitions) {
                ks.push_back(p.drawn_count);
                regions.push_back(p.region_count());
            }
            entry["k_per_channel"] = ks;
            entry["regions_per_channel"] = regions;
            if (a.dump_partitions) {
                json parts = json::array();
                for (const auto& p : r.partitions)
                    parts.push_back(to_json(p));
                fs::path audit = out;
                audit += ".partitions.json";
                write_json_file(audit, {{"id", e.id}, {"partitions", parts}, {"provenance", provenance(g)}});
            }
            done[i] = std::move(entry);
        } catch (const std::exception& ex) {
            std::error_code ec;
            fs::remove(out, ec);
            failures[i] = ex.what();
        }
    });

    json images = json::array();
    auto skipped = m.skipped;
    for (std::size_t i = 0; i < n; ++i) {
        if (done[i])
            images.push_back(std::move(*done[i]));
        else
            skipped.emplace_back(m.entries[i].path, failures[i]);
    }
    for (std::size_t i = m.skipped.size(); i < skipped.size(); ++i)
        info(g, "skipped " + skipped[i].first + ": " + skipped[i].second);
    write_json_file(a.output / "quantize_report.json", {{"config", to_json(cfg, g.seed)},
                                                        {"images", images},
                                                        {"skipped", skipped_json(skipped)},
                                                        {"provenance", provenance(g)}});
    info(g, "quantized " + std::to_string(images.size()) + " of " + std::to_string(n + m.skipped.size()) +
                " images into " + a.output.string());
    return skipped.empty() ? exit_ok : exit_partial;
}

// ---------------------------------------------------------------- degrade

struct DegradeArgs {
    fs::path input;
    fs::path output;
    int scale = 4;
    std::string kernel = "bicubic";
    std::string order = "quantize-first";
    bool no_quantize = false;
    QuantizerFlags q;
};

int cmd_degrade(const Globals& g, DegradeArgs& a) {
    DegradationRecipe recipe;
    recipe.scale = a.scale;
    recipe.kernel = parse_kernel(a.kernel);
    recipe.order = parse_order(a.order);
    recipe.seed = g.seed;
    if (a.no_quantize)
        recipe.quantizer.reset();
    else
        recipe.quantizer = a.q.resolve();
    recipe.validate();
    if (a.scale != 3 && a.scale != 4 && a.scale != 6)
        warn("scale " + std::to_string(a.scale) + " is outside the studied set {3, 4, 6}");

    const DatasetManifest m = scan_dataset(a.input, std::nullopt);
    list_skipped(g, m.skipped);
    BatchOptions opts;
    opts.threads = g.threads;
    opts.provenance = provenance(g);
    const DegradationReport report = batch_degrade(m, recipe, a.output, opts);
    for (const auto& [id, why] : report.skipped)
        info(g, "skipped " + id + ": " + why);
    info(g, "degraded " + std::to_string(report.images.size()) + " images into " + a.output.string());
    return report.skipped.empty() && m.skipped.empty() ? exit_ok : exit_partial;
}

// ---------------------------------------------------------------- upsample

struct UpsampleArgs {
    fs::path input;
    fs::path output;
    int scale = 4;
    std::string kernel = "bicubic";
};

int cmd_upsample(const Globals& g, UpsampleArgs& a) {
    if (a.scale < 1)
        throw ConfigError("--scale must be >= 1");
    const ResampleKernel kernel = parse_kernel(a.kernel);
    const DatasetManifest m = scan_dataset(a.input, std::nullopt);
    list_skipped(g, m.skipped);
    const std::size_t n = m.entries.size();
    std::vector<std::string> failures(n);
    std::vector<char> ok(n, 0);
    parallel_for(n, g.threads, [&](std::size_t i) {
        const ManifestEntry& e = m.entries[i];
        const fs::path out = a.output / fs::path(e.path).lexically_relative(a.input);
        try {
            const ImageBuffer up = upsample(load_image(e.path), a.scale, kernel);
            fs::create_directories(out.parent_path());
            save_image(up, out);
            ok[i] = 1;
        } catch (const std::exception& ex) {
            failures[i] = ex.what();
        }
    });
    auto skipped = m.skipped;
    json images = json::array();
    for (std::size_t i = 0; i < n; ++i) {
        if (ok[i])
            images.push_back(m.entries[i].id);
        else {
            skipped.emplace_back(m.entries[i].path, failures[i]);
            info(g, "skipped " + m.entries[i].path + ": " + failures[i]);
        }
    }
    write_json_file(a.output / "upsample_report.json", {{"scale", a.scale},
                                                        {"kernel", to_string(kernel)},
                                                        {"images", images},
                                                        {"skipped", skipped_json(skipped)},
                                                        {"provenance", provenance(g)}});
    info(g, "upsampled " + std::to_string(images.size()) + " images into " + a.output.string());
    return skipped.empty() ? exit_ok : exit_partial;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    fs::path gt;
    fs::path pred;
    std::string metrics = "psnr,ssim,ms-ssim,fsim";
    std::optional<fs::path> out;
    std::optional<fs::path> csv;
    std::string method;
};

std::string summary_line(const BenchmarkResult& r) {
    std::string s = r.method + ": " + std::to_string(r.means.count) + " pairs";
    if (r.means.psnr_db)
        s += ", PSNR " + fmt("%.4f", *r.means.psnr_db) + " dB";
    if (r.means.psnr_infinite)
        s += ", " + std::to_string(r.means.psnr_infinite) + " identical (PSNR inf)";
    if (r.means.ssim)
        s += ", SSIM " + fmt("%.6f", *r.means.ssim);
    if (r.means.ms_ssim)
        s += ", MS-SSIM " + fmt("%.6f", *r.means.ms_ssim);
    if (r.means.fsim)
        s += ", FSIM " + fmt("%.6f", *r.means.fsim);
    return s;
}

int cmd_eval(const Globals& g, EvalArgs& a) {
    BenchmarkOptions opts;
    opts.eval.metrics = parse_metric_list(a.metrics);
    opts.threads = g.threads;
    const DatasetManifest gt = scan_dataset(a.gt, std::nullopt);
    const DatasetManifest pred = scan_dataset(a.pred, std::nullopt);
    std::vector<std::string> extra;
    for (const auto& e : pred.entries)
        if (!gt.find(e.id))
            extra.push_back(e.id);

    const std::string method = a.method.empty() ? fs::absolute(a.pred).lexically_normal().filename().string() : a.method;
    auto results = run_benchmark(gt, a.gt, {{method, a.pred}}, 1, opts);
    BenchmarkResult& r = results.front();

    json j = to_json(r);
    j["metrics"] = a.metrics;
    j["unmatched_pred"] = extra;
    j["provenance"] = provenance(g);
    emit_json(j, a.out);
    if (a.csv)
        write_text_file(*a.csv, render_pairs_csv(r, opts.eval.metrics));

    for (const auto& id : r.missing)
        info(g, "unmatched ground truth: " + id);
    for (const auto& id : extra)
        info(g, "unmatched prediction: " + id);
    info(g, summary_line(r));
    return r.missing.empty() && extra.empty() ? exit_ok : exit_partial;
}

// ---------------------------------------------------------------- benchmark

struct BenchmarkArgs {
    fs::path manifest;
    fs::path gt;
    std::vector<std::string> methods;
    int scale = 4;
    std::string metrics = "psnr,ssim,ms-ssim,fsim";
    std::optional<fs::path> out;
    std::string format = "markdown";
};

int cmd_benchmark(const Globals& g, BenchmarkArgs& a) {
    const ReportFormat format = parse_report_format(a.format);
    std::map<std::string, fs::path> dirs;
    for (const auto& spec : a.methods) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
            throw ConfigError("--method expects NAME=DIR, got '" + spec + "'");
        dirs[spec.substr(0, eq)] = spec.substr(eq + 1);
    }
    BenchmarkOptions opts;
    opts.eval.metrics = parse_metric_list(a.metrics);
    opts.threads = g.threads;
    const DatasetManifest m = load_manifest(a.manifest);
    const auto results = run_benchmark(m, a.gt, dirs, a.scale, opts);

    json all = json::array();
    for (const auto& r : results)
        all.push_back(to_json(r));
    if (a.out)
        write_json_file(*a.out, {{"results", all}, {"provenance", provenance(g)}});
    std::cout << render_report(results, format);
    bool complete = true;
    for (const auto& r : results) {
        info(g, summary_line(r));
        if (!r.complete()) {
            complete = false;
            info(g, r.method + " is missing " + std::to_string(r.missing.size()) + " predictions");
        }
    }
    return complete ? exit_ok : exit_partial;
}

// ---------------------------------------------------------------- monitor

struct MonitorArgs {
    std::vector<fs::path> logs;
    DivergencePolicy policy;
    bool follow = false;
    int poll_ms = 200;
    int max_idle_ms = 0;
};

TrainingCurve load_curve(const fs::path& p) {
    std::ifstream in(p);
    if (!in)
        throw IoError("cannot open log " + p.string());
    try {
        return ingest_curve(in, p.stem().string());
    } catch (const DataError& e) {
        throw DataError(p.string() + ": " + e.what());
    }
}

int follow_log(const Globals& g, const MonitorArgs& a) {
    const fs::path& path = a.logs.front();
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open log " + path.string());
    DivergenceMonitor monitor(a.policy);
    TrainingCurve curve{path.stem().string(), {}};
    std::string partial;
    std::size_t line_no = 0;
    int idle = 0;

    auto handle = [&](const std::string& line) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            return;
        try {
            const CurvePoint p = parse_curve_line(line, line_no);
            if (monitor.push(p)) {
                std::cout << json{{"event", "divergence"},
                                  {"divergence_step", *monitor.divergence_step()},
                                  {"detected_at_step", p.step},
                                  {"best_val_loss", monitor.best_loss()}}
                                 .dump()
                          << std::endl;
            }
            curve.points.push_back(p);
        } catch (const DataError& e) {
            warn(path.string() + ": " + e.what());
        }
    };

    for (;;) {
        bool progressed = false;
        std::string chunk;
        while (std::getline(in, chunk)) {
            progressed = true;
            if (in.eof()) {
                partial += chunk;
                break;
            }
            handle(partial + chunk);
            partial.clear();
        }
        in.clear();
        if (progressed) {
            idle = 0;
            continue;
        }
        if (a.max_idle_ms > 0 && idle >= a.max_idle_ms)
            break;
        std::this_thread::sleep_for(std::chrono::milliseconds(a.poll_ms));
        idle += a.poll_ms;
    }
    if (!partial.empty())
        handle(partial);
    debug(g, "follow mode stopped after " + std::to_string(a.max_idle_ms) + " ms without new lines");
    if (curve.points.empty())
        throw DataError(path.string() + ": no evaluations");
    json v = verdict_json(curve, a.policy);
    v["provenance"] = provenance(g);
    std::cout << v.dump() << '\n';
    return exit_ok;
}

int cmd_monitor(const Globals& g, MonitorArgs& a) {
    a.policy.validate();
    if (a.poll_ms < 1)
        throw ConfigError("--poll-ms must be >= 1");
    if (a.follow) {
        if (a.logs.size() != 1)
            throw ConfigError("--follow takes exactly one --log");
        return follow_log(g, a);
    }
    std::vector<TrainingCurve> curves;
    for (const auto& p : a.logs)
        curves.push_back(load_curve(p));
    json out;
    if (curves.size() == 1) {
        out = verdict_json(curves.front(), a.policy);
        info(g, out.at("diverged").get<bool>()
                    ? "divergence after step " + std::to_string(out.at("divergence_step").get<long long>())
                    : "no divergence detected");
    } else {
        out = to_json(compare_runs(curves, a.policy));
    }
    out["provenance"] = provenance(g);
    std::cout << out.dump(2) << '\n';
    return exit_ok;
}

// ---------------------------------------------------------------- split

struct SplitArgs {
    fs::path root;
    std::optional<fs::path> spec;
    fs::path manifest;
    std::vector<std::string> class_rule;
};

int cmd_split(const Globals& g, SplitArgs& a) {
    SplitSpec spec;
    std::optional<std::uint64_t> file_seed;
    if (a.spec) {
        const json j = read_json_file(*a.spec);
        spec = split_spec_from_json(j);
        if (j.contains("seed"))
            file_seed = spec.seed;
    }
    // An explicit --seed (or THERMALSR_SEED) wins over the spec file.
    if (g.seed_given() || !file_seed)
        spec.seed = g.seed;

    ClassRule rule = default_class_rule();
    if (!a.class_rule.empty()) {
        rule.clear();
        for (const auto& item : a.class_rule) {
            const auto eq = item.find('=');
            if (eq == std::string::npos)
                throw ConfigError("--class-rule expects DIR=CLASS, got '" + item + "'");
            rule[item.substr(0, eq)] = parse_source_class(item.substr(eq + 1));
        }
    }
    const DatasetManifest scanned = scan_dataset(a.root, rule);
    list_skipped(g, scanned.skipped);
    const DatasetManifest m = split_dataset(scanned, spec);
    json prov = provenance(g);
    prov["seed"] = spec.seed;
    save_manifest(m, a.manifest, prov);

    std::map<std::string, std::map<std::string, int>> counts;
    for (const auto& e : m.entries)
        ++counts[std::string(to_string(e.split))][std::string(to_string(e.source_class))];
    for (const auto& [split, per] : counts) {
        std::string line = split + ":";
        for (const auto& [cls, c] : per)
            line += " " + cls + "=" + std::to_string(c);
        info(g, line);
    }
    return exit_ok;
}

// ---------------------------------------------------------------- report

struct ReportArgs {
    std::vector<fs::path> inputs;
    std::string format = "markdown";
    std::optional<fs::path> out;
};

int cmd_report(const Globals& g, ReportArgs& a) {
    const ReportFormat format = parse_report_format(a.format);
    std::vector<BenchmarkResult> results;
    for (const auto& p : a.inputs) {
        const json j = read_json_file(p);
        try {
            if (j.contains("results"))
                for (const auto& r : j.at("results"))
                    results.push_back(benchmark_result_from_json(r));
            else
                results.push_back(benchmark_result_from_json(j));
        } catch (const DataError& e) {
            throw DataError(p.string() + ": " + e.what());
        }
    }
    std::string text = render_report(results, format);
    const json prov = provenance(g);
    if (format == ReportFormat::json) {
        json j = json::parse(text);
        j["provenance"] = prov;
        text = j.dump(2) + "\n";
    } else if (format == ReportFormat::markdown) {
        text += "\n<!-- provenance: " + prov.dump() + " -->\n";
    } else {
        text = "# provenance: " + prov.dump() + "\n" + text;
    }
    emit_text(text, a.out);
    return exit_ok;
}

// ---------------------------------------------------------------- schedule

struct ScheduleArgs {
    int timesteps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    bool check = false;
    std::optional<fs::path> dump;
    std::optional<fs::path> load;
};

int cmd_schedule(const Globals& g, ScheduleArgs& a) {
    const NoiseSchedule s =
        a.load ? schedule_from_json(read_json_file(*a.load)) : build_schedule(a.timesteps, a.beta_start, a.beta_end);
    if (a.dump) {
        json j = to_json(s);
        j["provenance"] = provenance(g);
        write_json_file(*a.dump, j);
    }
    if (!a.check) {
        if (!a.dump) {
            json j = to_json(s);
            j["provenance"] = provenance(g);
            std::cout << j.dump(2) << '\n';
        }
        return exit_ok;
    }
    const ScheduleCheck c = check_schedule(s);
    json items = json::array();
    for (const auto& it : c.items) {
        items.push_back({{"name", it.name}, {"passed", it.passed}, {"detail", it.detail}});
        info(g, std::string(it.passed ? "PASS " : "FAIL ") + it.name + (it.passed ? "" : ": " + it.detail));
    }
    const int T = s.timesteps();
    std::cout << json{{"passed", c.passed()},
                      {"timesteps", T},
                      {"alpha_bar_1", s.alpha_bar(1)},
                      {"alpha_bar_T", s.alpha_bar(T)},
                      {"checks", items},
                      {"provenance", provenance(g)}}
                     .dump(2)
              << '\n';
    return c.passed() ? exit_ok : exit_data;
}

} // namespace

int run(int argc, char** argv) {
    Globals g;
    for (int i = 0; i < argc; ++i)
        g.argv.emplace_back(argv[i]);

    CLI::App app{"Thermal image super-resolution toolkit: degradation, metrics, diffusion checks, "
                 "training monitoring and benchmarking",
                 "thermalsr"};
    app.set_version_flag("--version", tool_version());
    app.require_subcommand(1);
    app.fallthrough();
    g.seed_option = app.add_option("--seed", g.seed, "Random seed (falls back to THERMALSR_SEED)")
                        ->envname("THERMALSR_SEED")
                        ->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads for batch commands")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_flag("-v,--verbose", g.verbose, "More diagnostics on stderr");
    app.add_flag("-q,--quiet", g.quiet, "Only errors on stderr");

    std::function<int()> action;

    QuantizeArgs qa;
    auto* quantize = app.add_subcommand("quantize", "Randomized per-channel quantization of an image tree");
    quantize->add_option("--input", qa.input, "Input directory")->required()->check(CLI::ExistingDirectory);
    quantize->add_option("--output", qa.output, "Output directory")->required();
    qa.q.add(quantize);
    quantize->add_flag("--dump-partitions", qa.dump_partitions, "Write <image>.partitions.json audits");
    quantize->callback([&] { action = [&] { return cmd_quantize(g, qa); }; });

    DegradeArgs da;
    auto* degrade = app.add_subcommand("degrade", "Build LR/HR training pairs");
    degrade->add_option("--input", da.input, "HR image directory")->required()->check(CLI::ExistingDirectory);
    degrade->add_option("--output", da.output, "Output directory (lr/, hr/, report)")->required();
    degrade->add_option("--scale", da.scale, "Downsampling factor")->required()->check(CLI::PositiveNumber);
    degrade->add_option("--kernel", da.kernel, "Resampling kernel")
        ->check(CLI::IsMember({"bicubic", "box", "nearest"}))
        ->capture_default_str();
    degrade->add_option("--order", da.order, "Stage order")
        ->check(CLI::IsMember({"quantize-first", "downsample-first"}))
        ->capture_default_str();
    degrade->add_flag("--no-quantize", da.no_quantize, "Skip the quantization stage");
    da.q.add(degrade);
    degrade->callback([&] { action = [&] { return cmd_degrade(g, da); }; });

    UpsampleArgs ua;
    auto* up = app.add_subcommand("upsample", "Interpolation baseline: enlarge every image by --scale");
    up->add_option("--input", ua.input, "LR image directory")->required()->check(CLI::ExistingDirectory);
    up->add_option("--output", ua.output, "Output directory")->required();
    up->add_option("--scale", ua.scale, "Enlargement factor")->required()->check(CLI::PositiveNumber);
    up->add_option("--kernel", ua.kernel, "Resampling kernel")
        ->check(CLI::IsMember({"bicubic", "box", "nearest"}))
        ->capture_default_str();
    up->callback([&] { action = [&] { return cmd_upsample(g, ua); }; });

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "Full-reference metrics for matching files of two directories");
    eval->add_option("--gt", ea.gt, "Ground-truth directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--pred", ea.pred, "Prediction directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--metrics", ea.metrics, "Comma-separated subset of psnr,ssim,ms-ssim,fsim")
        ->capture_default_str();
    eval->add_option("--out", ea.out, "Report JSON path (default: stdout)");
    eval->add_option("--csv", ea.csv, "Per-pair CSV path");
    eval->add_option("--method", ea.method, "Method name recorded in the report (default: prediction dir name)");
    eval->callback([&] { action = [&] { return cmd_eval(g, ea); }; });

    BenchmarkArgs ba;
    auto* bench = app.add_subcommand("benchmark", "Evaluate several methods on a manifest's test split");
    bench->add_option("--manifest", ba.manifest, "Manifest JSON")->required()->check(CLI::ExistingFile);
    bench->add_option("--gt", ba.gt, "Ground-truth directory")->required()->check(CLI::ExistingDirectory);
    bench->add_option("--method", ba.methods, "NAME=DIR, repeatable")->required();
    bench->add_option("--scale", ba.scale, "Scale factor used for crop alignment")
        ->required()
        ->check(CLI::PositiveNumber);
    bench->add_option("--metrics", ba.metrics, "Comma-separated subset of psnr,ssim,ms-ssim,fsim")
        ->capture_default_str();
    bench->add_option("--out", ba.out, "Write all results as JSON");
    bench->add_option("--format", ba.format, "Table format on stdout")
        ->check(CLI::IsMember({"markdown", "json", "csv"}))
        ->capture_default_str();
    bench->callback([&] { action = [&] { return cmd_benchmark(g, ba); }; });

    MonitorArgs ma;
    auto* monitor = app.add_subcommand("monitor", "Divergence detection on validation-curve logs");
    monitor->add_option("--log", ma.logs, "JSON-lines log; repeat to compare runs")->required();
    monitor->add_option("--window", ma.policy.window, "Consecutive evaluations above threshold")
        ->capture_default_str();
    monitor->add_option("--rel-threshold", ma.policy.rel_threshold, "Relative rise over the running minimum")
        ->capture_default_str();
    monitor->add_option("--min-history", ma.policy.min_history, "Evaluations required before detection")
        ->capture_default_str();
    monitor->add_flag("--follow", ma.follow, "Keep reading as lines are appended");
    monitor->add_option("--poll-ms", ma.poll_ms, "Polling interval in follow mode")->capture_default_str();
    monitor->add_option("--max-idle-ms", ma.max_idle_ms, "Stop following after this long without new lines (0 = never)")
        ->capture_default_str();
    monitor->callback([&] { action = [&] { return cmd_monitor(g, ma); }; });

    SplitArgs sa;
    auto* split = app.add_subcommand("split", "Scan a dataset and assign train/val/test");
    split->add_option("--root", sa.root, "Dataset root")->required()->check(CLI::ExistingDirectory);
    split->add_option("--spec", sa.spec, "Split spec JSON (default: 150/50 train, 30/20 val, 50 test)")
        ->check(CLI::ExistingFile);
    split->add_option("--manifest", sa.manifest, "Output manifest JSON")->required();
    split->add_option("--class-rule", sa.class_rule, "DIR=CLASS mapping, repeatable (default aerial/ ground/)");
    split->callback([&] { action = [&] { return cmd_split(g, sa); }; });

    ReportArgs ra;
    auto* report = app.add_subcommand("report", "Render benchmark results as a comparison table");
    report->add_option("--inputs", ra.inputs, "Result JSON files")->required()->check(CLI::ExistingFile);
    report->add_option("--format", ra.format, "Output format")
        ->check(CLI::IsMember({"markdown", "json", "csv"}))
        ->capture_default_str();
    report->add_option("--out", ra.out, "Output path (default: stdout)");
    report->callback([&] { action = [&] { return cmd_report(g, ra); }; });

    ScheduleArgs sca;
    auto* schedule = app.add_subcommand("schedule", "Build, dump, load and verify noise schedules");
    schedule->add_option("--timesteps", sca.timesteps, "Number of timesteps")->capture_default_str();
    schedule->add_option("--beta-start", sca.beta_start, "First beta")->capture_default_str();
    schedule->add_option("--beta-end", sca.beta_end, "Last beta")->capture_default_str();
    schedule->add_flag("--check", sca.check, "Verify the schedule invariants; exit 0 iff all hold");
    schedule->add_option("--dump", sca.dump, "Write the schedule as JSON");
    schedule->add_option("--load", sca.load, "Read a schedule JSON instead of building one")
        ->check(CLI::ExistingFile);
    schedule->callback([&] { action = [&] { return cmd_schedule(g, sca); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\nRun with --help for usage.\n";
        return exit_usage;
    }

    try {
        return action ? action() : exit_usage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_data;
    }
}

} // namespace thermalsr::cli
