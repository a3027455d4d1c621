#include "thermalsr/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "thermalsr/error.hpp"
#include "thermalsr/util.hpp"

namespace thermalsr {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i)
        s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
}

void require_same(const LatentTensor& a, const LatentTensor& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape " + shape_string(a.shape) + " vs " + shape_string(b.shape));
}

void require_timestep(int t, const NoiseSchedule& s, const char* what) {
    if (t < 1 || t > s.timesteps())
        throw ConfigError(std::string(what) + ": timestep " + std::to_string(t) + " outside [1, " +
                          std::to_string(s.timesteps()) + "]");
}

bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

std::vector<int> default_labels(std::size_t n) {
    std::vector<int> labels(n);
    std::iota(labels.begin(), labels.end(), 1);
    return labels;
}

} // namespace

LatentTensor::LatentTensor(std::vector<std::size_t> shape_, std::vector<double> values_)
    : shape(std::move(shape_)), values(std::move(values_)) {
    if (values.size() != shape_product(shape))
        throw ShapeError("latent tensor: " + std::to_string(values.size()) + " values for shape " +
                         shape_string(shape));
}

LatentTensor LatentTensor::zeros(std::vector<std::size_t> shape) {
    const std::size_t n = shape_product(shape);
    return LatentTensor(std::move(shape), std::vector<double>(n, 0.0));
}

LatentTensor LatentTensor::gaussian(std::vector<std::size_t> shape, RngStream& rng) {
    LatentTensor t = zeros(std::move(shape));
    for (double& v : t.values)
        v = rng.normal();
    return t;
}

std::size_t NoiseSchedule::index(int t) const {
    if (t < 1 || t > timesteps())
        throw ConfigError("timestep " + std::to_string(t) + " outside [1, " + std::to_string(timesteps()) + "]");
    return static_cast<std::size_t>(t - 1);
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
    if (betas.empty())
        throw ConfigError("schedule needs at least one timestep");
    NoiseSchedule s;
    double running = 1.0;
    for (double b : betas) {
        if (!(b > 0.0 && b < 1.0))
            throw ConfigError("beta " + std::to_string(b) + " outside (0, 1)");
        s.alpha_.push_back(1.0 - b);
        running *= 1.0 - b;
        s.alpha_bar_.push_back(running);
    }
    s.label_ = default_labels(betas.size());
    s.beta_ = std::move(betas);
    return s;
}

NoiseSchedule NoiseSchedule::from_alpha_bars(std::vector<double> alpha_bars, std::vector<int> labels) {
    if (alpha_bars.empty())
        throw ConfigError("schedule needs at least one timestep");
    if (labels.empty())
        labels = default_labels(alpha_bars.size());
    if (labels.size() != alpha_bars.size())
        throw ConfigError("schedule labels and alpha_bar lengths differ");
    NoiseSchedule s;
    double prev = 1.0;
    for (double ab : alpha_bars) {
        if (!(ab > 0.0 && ab < prev))
            throw ConfigError("alpha_bar must be strictly decreasing in (0, 1)");
        const double a = ab / prev;
        s.alpha_.push_back(a);
        s.beta_.push_back(1.0 - a);
        prev = ab;
    }
    s.alpha_bar_ = std::move(alpha_bars);
    s.label_ = std::move(labels);
    return s;
}

NoiseSchedule NoiseSchedule::from_parts(std::vector<double> betas, std::vector<double> alpha_bars,
                                        std::vector<int> labels) {
    if (betas.size() != alpha_bars.size() || (!labels.empty() && labels.size() != betas.size()))
        throw ConfigError("schedule arrays have different lengths");
    NoiseSchedule s = from_betas(betas);
    for (std::size_t i = 0; i < alpha_bars.size(); ++i) {
        if (!close_rel(alpha_bars[i], s.alpha_bar_[i], 1e-9))
            throw ConfigError("alpha_bar[" + std::to_string(i + 1) + "] disagrees with the beta product");
        if (i > 0 && !(alpha_bars[i] < alpha_bars[i - 1]))
            throw ConfigError("alpha_bar must be strictly decreasing");
    }
    s.alpha_bar_ = std::move(alpha_bars);
    if (!labels.empty())
        s.label_ = std::move(labels);
    return s;
}

NoiseSchedule build_schedule(int timesteps, double beta_start, double beta_end) {
    if (timesteps < 1)
        throw ConfigError("schedule timesteps must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw ConfigError("schedule needs 0 < beta_start <= beta_end < 1");
    std::vector<double> betas(static_cast<std::size_t>(timesteps));
    for (int i = 0; i < timesteps; ++i) {
        const double f = timesteps == 1 ? 0.0 : static_cast<double>(i) / (timesteps - 1);
        betas[static_cast<std::size_t>(i)] = beta_start + (beta_end - beta_start) * f;
    }
    return NoiseSchedule::from_betas(std::move(betas));
}

bool ScheduleCheck::passed() const noexcept {
    return std::all_of(items.begin(), items.end(), [](const Item& i) { return i.passed; });
}

ScheduleCheck check_schedule(const NoiseSchedule& s) {
    ScheduleCheck out;
    const auto b = s.betas();
    const auto a = s.alphas();
    const auto ab = s.alpha_bars();
    const int T = s.timesteps();

    auto first_failure = [&](auto&& ok) -> int {
        for (int t = 1; t <= T; ++t)
            if (!ok(static_cast<std::size_t>(t - 1)))
                return t;
        return 0;
    };
    auto add = [&](std::string name, int bad, const std::string& what) {
        out.items.push_back({std::move(name), bad == 0, bad == 0 ? "ok" : what + " at t=" + std::to_string(bad)});
    };

    add("beta_in_unit_interval", first_failure([&](std::size_t i) { return b[i] > 0.0 && b[i] < 1.0; }),
        "beta outside (0, 1)");
    add("beta_non_decreasing", first_failure([&](std::size_t i) { return i == 0 || b[i] >= b[i - 1]; }),
        "beta decreases");
    add("alpha_in_unit_interval", first_failure([&](std::size_t i) { return a[i] > 0.0 && a[i] < 1.0; }),
        "alpha outside (0, 1)");
    add("alpha_bar_strictly_decreasing",
        first_failure([&](std::size_t i) { return i == 0 ? ab[i] < 1.0 : ab[i] < ab[i - 1]; }),
        "alpha_bar does not decrease");
    double running = 1.0;
    add("alpha_bar_is_product", first_failure([&](std::size_t i) {
            running *= a[i];
            return close_rel(ab[i], running, 1e-12);
        }),
        "alpha_bar differs from the alpha product");
    add("alpha_bar_ratio_is_alpha", first_failure([&](std::size_t i) {
            const double prev = i == 0 ? 1.0 : ab[i - 1];
            return close_rel(ab[i] / prev, a[i], 1e-12);
        }),
        "alpha_bar[t]/alpha_bar[t-1] differs from alpha[t]");
    return out;
}

nlohmann::json to_json(const NoiseSchedule& s) {
    const auto b = s.betas();
    const auto a = s.alphas();
    const auto ab = s.alpha_bars();
    const auto l = s.labels();
    return {{"timesteps", s.timesteps()},
            {"beta", std::vector<double>(b.begin(), b.end())},
            {"alpha", std::vector<double>(a.begin(), a.end())},
            {"alpha_bar", std::vector<double>(ab.begin(), ab.end())},
            {"labels", std::vector<int>(l.begin(), l.end())}};
}

NoiseSchedule schedule_from_json(const nlohmann::json& j) {
    try {
        std::vector<int> labels;
        if (j.contains("labels"))
            labels = j.at("labels").get<std::vector<int>>();
        NoiseSchedule s;
        if (j.contains("beta") && j.contains("alpha_bar"))
            s = NoiseSchedule::from_parts(j.at("beta").get<std::vector<double>>(),
                                          j.at("alpha_bar").get<std::vector<double>>(), labels);
        else if (j.contains("beta")) {
            s = NoiseSchedule::from_betas(j.at("beta").get<std::vector<double>>());
            if (!labels.empty())
                s = NoiseSchedule::from_parts(std::vector<double>(s.betas().begin(), s.betas().end()),
                                              std::vector<double>(s.alpha_bars().begin(), s.alpha_bars().end()),
                                              labels);
        } else if (j.contains("alpha_bar"))
            s = NoiseSchedule::from_alpha_bars(j.at("alpha_bar").get<std::vector<double>>(), labels);
        else
            throw DataError("schedule JSON needs a 'beta' or 'alpha_bar' array");
        if (j.contains("timesteps") && j.at("timesteps").get<int>() != s.timesteps())
            throw DataError("schedule 'timesteps' disagrees with array length");
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("schedule JSON: ") + e.what());
    } catch (const ConfigError& e) {
        throw DataError(std::string("schedule JSON: ") + e.what());
    }
}

LatentTensor forward_sample(const LatentTensor& z0, int t, const LatentTensor& eps, const NoiseSchedule& s) {
    require_same(z0, eps, "forward_sample");
    require_timestep(t, s, "forward_sample");
    const double ab = s.alpha_bar(t);
    const double c0 = std::sqrt(ab);
    const double c1 = std::sqrt(1.0 - ab);
    LatentTensor out = z0;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = c0 * z0.values[i] + c1 * eps.values[i];
    return out;
}

LatentTensor predict_z0(const LatentTensor& zt, int t, const LatentTensor& eps_pred, const NoiseSchedule& s) {
    require_same(zt, eps_pred, "predict_z0");
    require_timestep(t, s, "predict_z0");
    const double ab = s.alpha_bar(t);
    if (ab < 1e-12)
        throw ConfigError("predict_z0: alpha_bar(" + std::to_string(t) + ") = " + std::to_string(ab) +
                          " below the 1e-12 underflow guard");
    const double c1 = std::sqrt(1.0 - ab);
    const double inv = 1.0 / std::sqrt(ab);
    LatentTensor out = zt;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = (zt.values[i] - c1 * eps_pred.values[i]) * inv;
    return out;
}

LatentTensor posterior_mean(const LatentTensor& zt, int t, const LatentTensor& eps_pred, const NoiseSchedule& s) {
    require_same(zt, eps_pred, "posterior_mean");
    require_timestep(t, s, "posterior_mean");
    const double a = s.alpha(t);
    const double ab = s.alpha_bar(t);
    const double coef = (1.0 - a) / std::sqrt(1.0 - ab);
    const double inv = 1.0 / std::sqrt(a);
    LatentTensor out = zt;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = inv * (zt.values[i] - coef * eps_pred.values[i]);
    return out;
}

LatentTensor ZeroDenoiser::predict_noise(const LatentTensor& zt, int) const {
    return LatentTensor::zeros(zt.shape);
}

OracleDenoiser::OracleDenoiser(LatentTensor z0, NoiseSchedule reference)
    : z0_(std::move(z0)), reference_(std::move(reference)) {}

LatentTensor OracleDenoiser::predict_noise(const LatentTensor& zt, int timestep) const {
    require_same(zt, z0_, "oracle denoiser");
    const double ab = reference_.alpha_bar(timestep);
    LatentTensor out = LatentTensor::zeros(zt.shape);
    if (ab >= 1.0)
        return out;
    const double c0 = std::sqrt(ab);
    const double inv = 1.0 / std::sqrt(1.0 - ab);
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = (zt.values[i] - c0 * z0_.values[i]) * inv;
    return out;
}

LatentTensor reverse_step(const LatentTensor& zt, int t, const Denoiser& denoiser, const NoiseSchedule& s,
                          RngStream& rng, double noise_scale) {
    require_timestep(t, s, "reverse_step");
    const LatentTensor eps = denoiser.predict_noise(zt, s.label(t));
    if (!eps.same_shape(zt))
        throw ShapeError("denoiser changed the latent shape from " + shape_string(zt.shape) + " to " +
                         shape_string(eps.shape));
    LatentTensor out = posterior_mean(zt, t, eps, s);
    if (t > 1) {
        const double sigma = noise_scale * std::sqrt(s.beta(t));
        for (double& v : out.values)
            v += sigma * rng.normal();
    }
    return out;
}

LatentTensor sample_chain(LatentTensor zt, const Denoiser& denoiser, const NoiseSchedule& s, RngStream& rng,
                          double noise_scale) {
    for (int t = s.timesteps(); t >= 1; --t)
        zt = reverse_step(zt, t, denoiser, s, rng, noise_scale);
    return zt;
}

double noise_loss(const LatentTensor& eps, const LatentTensor& eps_pred) {
    require_same(eps, eps_pred, "noise_loss");
    std::vector<double> sq(eps.values.size());
    for (std::size_t i = 0; i < sq.size(); ++i) {
        const double d = eps.values[i] - eps_pred.values[i];
        sq[i] = d * d;
    }
    return pairwise_mean(sq);
}

std::vector<int> subsample_steps(int timesteps, int n) {
    if (timesteps < 1)
        throw ConfigError("timesteps must be >= 1");
    if (n < 1 || n > timesteps)
        throw ConfigError("inference steps " + std::to_string(n) + " outside [1, " + std::to_string(timesteps) + "]");
    std::vector<int> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] =
            timesteps - static_cast<int>(static_cast<long long>(i) * timesteps / n);
    return out;
}

NoiseSchedule respace(const NoiseSchedule& base, std::span<const int> steps) {
    if (steps.empty())
        throw ConfigError("respace needs at least one timestep");
    std::vector<int> sorted(steps.begin(), steps.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ConfigError("respace timesteps must be unique");
    std::vector<double> abar;
    std::vector<int> labels;
    for (int t : sorted) {
        abar.push_back(base.alpha_bar(t));
        labels.push_back(base.label(t));
    }
    return NoiseSchedule::from_alpha_bars(std::move(abar), std::move(labels));
}

} // namespace thermalsr
