#include "thermalsr/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <mutex>

#include "thermalsr/error.hpp"
#include "thermalsr/image_io.hpp"
#include "thermalsr/util.hpp"

namespace thermalsr {

namespace fs = std::filesystem;

std::string_view to_string(ResampleKernel k) noexcept {
    switch (k) {
    case ResampleKernel::bicubic: return "bicubic";
    case ResampleKernel::box: return "box";
    case ResampleKernel::nearest: return "nearest";
    }
    return "bicubic";
}

std::string_view to_string(DegradationOrder o) noexcept {
    return o == DegradationOrder::quantize_first ? "quantize-first" : "downsample-first";
}

ResampleKernel parse_kernel(std::string_view name) {
    if (name == "bicubic")
        return ResampleKernel::bicubic;
    if (name == "box")
        return ResampleKernel::box;
    if (name == "nearest")
        return ResampleKernel::nearest;
    throw ConfigError("unknown kernel '" + std::string(name) + "' (expected bicubic|box|nearest)");
}

DegradationOrder parse_order(std::string_view name) {
    if (name == "quantize-first")
        return DegradationOrder::quantize_first;
    if (name == "downsample-first")
        return DegradationOrder::downsample_first;
    throw ConfigError("unknown order '" + std::string(name) + "' (expected quantize-first|downsample-first)");
}

namespace {

double cubic(double x) noexcept {
    constexpr double a = -0.5;
    x = std::abs(x);
    if (x < 1.0)
        return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0)
        return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
    return 0.0;
}

struct Taps {
    int first = 0;
    std::vector<double> weights;
};

// Per output index: the contributing input range and normalised weights.
std::vector<Taps> axis_taps(int in, int out, ResampleKernel kernel) {
    const double scale = static_cast<double>(in) / out;
    const double stretch = std::max(scale, 1.0);
    std::vector<Taps> taps(out);
    for (int i = 0; i < out; ++i) {
        const double center = (i + 0.5) * scale;
        Taps& t = taps[i];
        if (kernel == ResampleKernel::nearest) {
            t.first = std::clamp(static_cast<int>(std::floor(center)), 0, in - 1);
            t.weights = {1.0};
            continue;
        }
        const double support = (kernel == ResampleKernel::bicubic ? 2.0 : 0.5) * stretch;
        const int lo = std::max(0, static_cast<int>(std::floor(center - support)));
        const int hi = std::min(in - 1, static_cast<int>(std::ceil(center + support)));
        t.first = lo;
        double total = 0.0;
        for (int k = lo; k <= hi; ++k) {
            const double x = (k + 0.5 - center) / stretch;
            double w;
            if (kernel == ResampleKernel::bicubic)
                w = cubic(x);
            else
                w = (x >= -0.5 && x < 0.5) ? 1.0 : 0.0;
            t.weights.push_back(w);
            total += w;
        }
        // Trim zero-weight ends so `first` points at a real tap.
        while (!t.weights.empty() && t.weights.front() == 0.0) {
            t.weights.erase(t.weights.begin());
            ++t.first;
        }
        while (!t.weights.empty() && t.weights.back() == 0.0)
            t.weights.pop_back();
        if (t.weights.empty() || total == 0.0) {
            t.first = std::clamp(static_cast<int>(std::floor(center)), 0, in - 1);
            t.weights = {1.0};
            continue;
        }
        for (double& w : t.weights)
            w /= total;
    }
    return taps;
}

} // namespace

ImageBuffer resize(const ImageBuffer& img, int out_w, int out_h, ResampleKernel kernel) {
    if (out_w < 1 || out_h < 1)
        throw ShapeError("resize target must be at least 1x1");
    if (out_w == img.width() && out_h == img.height())
        return img;
    const int in_w = img.width();
    const int in_h = img.height();
    const int nc = img.channels();
    const auto xt = axis_taps(in_w, out_w, kernel);
    const auto yt = axis_taps(in_h, out_h, kernel);
    const auto src = img.samples();
    const double top = img.max_value();

    // Horizontal pass into a real buffer, then vertical pass with rounding.
    std::vector<double> tmp(static_cast<std::size_t>(out_w) * in_h * nc);
    for (int y = 0; y < in_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            const Taps& t = xt[x];
            for (int c = 0; c < nc; ++c) {
                double acc = 0.0;
                for (std::size_t k = 0; k < t.weights.size(); ++k)
                    acc += t.weights[k] * src[(static_cast<std::size_t>(y) * in_w + t.first + k) * nc + c];
                tmp[(static_cast<std::size_t>(y) * out_w + x) * nc + c] = acc;
            }
        }
    }
    std::vector<Sample> out(static_cast<std::size_t>(out_w) * out_h * nc);
    for (int y = 0; y < out_h; ++y) {
        const Taps& t = yt[y];
        for (int x = 0; x < out_w; ++x) {
            for (int c = 0; c < nc; ++c) {
                double acc = 0.0;
                for (std::size_t k = 0; k < t.weights.size(); ++k)
                    acc += t.weights[k] * tmp[((t.first + k) * out_w + x) * nc + c];
                out[(static_cast<std::size_t>(y) * out_w + x) * nc + c] =
                    static_cast<Sample>(std::clamp(std::floor(acc + 0.5), 0.0, top));
            }
        }
    }
    return ImageBuffer(out_w, out_h, nc, img.bit_depth(), std::move(out));
}

ImageBuffer downsample(const ImageBuffer& img, int scale, ResampleKernel kernel) {
    if (scale < 1)
        throw ConfigError("scale must be >= 1");
    if (img.width() % scale != 0 || img.height() % scale != 0)
        throw ShapeError("image " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                         " is not divisible by scale " + std::to_string(scale));
    return resize(img, img.width() / scale, img.height() / scale, kernel);
}

ImageBuffer upsample(const ImageBuffer& img, int scale, ResampleKernel kernel) {
    if (scale < 1)
        throw ConfigError("scale must be >= 1");
    return resize(img, img.width() * scale, img.height() * scale, kernel);
}

void DegradationRecipe::validate() const {
    if (scale < 1)
        throw ConfigError("recipe scale must be >= 1");
    if (quantizer)
        quantizer->validate();
}

nlohmann::json to_json(const DegradationRecipe& r) {
    return {{"scale", r.scale},
            {"kernel", std::string(to_string(r.kernel))},
            {"order", std::string(to_string(r.order))},
            {"seed", r.seed},
            {"quantizer", r.quantizer ? to_json(*r.quantizer, r.seed) : nlohmann::json(nullptr)}};
}

DegradationRecipe recipe_from_json(const nlohmann::json& j) {
    DegradationRecipe r;
    try {
        r.scale = j.value("scale", r.scale);
        if (j.contains("kernel"))
            r.kernel = parse_kernel(j.at("kernel").get<std::string>());
        if (j.contains("order"))
            r.order = parse_order(j.at("order").get<std::string>());
        r.seed = j.value("seed", r.seed);
        if (j.contains("quantizer")) {
            if (j.at("quantizer").is_null())
                r.quantizer.reset();
            else
                r.quantizer = quantizer_config_from_json(j.at("quantizer")).first;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("recipe: ") + e.what());
    }
    r.validate();
    return r;
}

DegradedPair make_pair(const ImageBuffer& hr, const DegradationRecipe& recipe, const RngStream& rng) {
    recipe.validate();
    const ImageBuffer cropped = crop_to_multiple(hr, recipe.scale);
    DegradedPair out{cropped, cropped, {}};
    auto quantize = [&](const ImageBuffer& img) {
        auto q = quantize_image(img, *recipe.quantizer, rng);
        for (const auto& p : q.partitions)
            out.k_per_channel.push_back(p.drawn_count);
        return std::move(q.image);
    };
    if (recipe.quantizer && recipe.order == DegradationOrder::quantize_first) {
        out.lr = downsample(quantize(out.hr), recipe.scale, recipe.kernel);
    } else {
        out.lr = downsample(out.hr, recipe.scale, recipe.kernel);
        if (recipe.quantizer)
            out.lr = quantize(out.lr);
    }
    return out;
}

DegradedPair make_pair(const ImageBuffer& hr, const DegradationRecipe& recipe) {
    return make_pair(hr, recipe, RngStream(recipe.seed));
}

nlohmann::json to_json(const DegradationReport& r) {
    nlohmann::json images = nlohmann::json::array();
    for (const auto& e : r.images)
        images.push_back({{"id", e.id},
                          {"substream", e.substream},
                          {"k_per_channel", e.k_per_channel},
                          {"lr_path", e.lr_path},
                          {"hr_path", e.hr_path}});
    nlohmann::json skipped = nlohmann::json::array();
    for (const auto& [id, why] : r.skipped)
        skipped.push_back({{"id", id}, {"reason", why}});
    return {{"recipe", to_json(r.recipe)}, {"images", images}, {"skipped", skipped}};
}

DegradationReport batch_degrade(const DatasetManifest& manifest, const DegradationRecipe& recipe,
                                const fs::path& out_dir, const BatchOptions& options) {
    recipe.validate();
    DegradationReport report;
    report.recipe = recipe;
    if (manifest.entries.empty())
        return report;

    std::error_code ec;
    fs::create_directories(out_dir / "lr", ec);
    if (!ec)
        fs::create_directories(out_dir / "hr", ec);
    if (ec)
        throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

    const RngStream master(recipe.seed);
    const std::size_t n = manifest.entries.size();
    std::vector<std::optional<DegradationEntry>> done(n);
    std::vector<std::string> failures(n);

    parallel_for(n, options.threads, [&](std::size_t i) {
        const ManifestEntry& e = manifest.entries[i];
        std::string ext = fs::path(e.path).extension().string();
        if (!is_supported_image(fs::path("x" + ext)))
            ext = ".png";
        const std::string lr_rel = "lr/" + e.id + ext;
        const std::string hr_rel = "hr/" + e.id + ext;
        const fs::path lr_path = out_dir / lr_rel;
        const fs::path hr_path = out_dir / hr_rel;
        try {
            const ImageBuffer hr = load_image(e.path);
            const auto pair = make_pair(hr, recipe, master.derive(i));
            fs::create_directories(lr_path.parent_path());
            fs::create_directories(hr_path.parent_path());
            save_image(pair.lr, lr_path);
            save_image(pair.hr, hr_path);
            done[i] = DegradationEntry{e.id, i, pair.k_per_channel, lr_rel, hr_rel};
        } catch (const std::exception& ex) {
            std::error_code rm;
            fs::remove(lr_path, rm);
            fs::remove(hr_path, rm);
            failures[i] = ex.what();
        }
    });

    for (std::size_t i = 0; i < n; ++i) {
        if (done[i])
            report.images.push_back(std::move(*done[i]));
        else
            report.skipped.emplace_back(manifest.entries[i].id, failures[i]);
    }
    nlohmann::json j = to_json(report);
    if (!options.provenance.empty())
        j["provenance"] = options.provenance;
    write_json_file(out_dir / options.report_name, j);
    return report;
}

} // namespace thermalsr
