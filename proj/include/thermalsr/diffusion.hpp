#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "thermalsr/rng.hpp"

namespace thermalsr {

/// Real tensor with explicit shape; values in row-major order.
struct LatentTensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    LatentTensor() = default;
    /// Throws ShapeError unless values.size() == product(shape).
    LatentTensor(std::vector<std::size_t> shape, std::vector<double> values);
    static LatentTensor zeros(std::vector<std::size_t> shape);
    /// Filled with independent N(0, 1) draws from `rng`.
    static LatentTensor gaussian(std::vector<std::size_t> shape, RngStream& rng);

    std::size_t size() const noexcept { return values.size(); }
    bool same_shape(const LatentTensor& o) const noexcept { return shape == o.shape; }
};

/// Timestep-indexed variance plan. Timesteps run 1..T; alpha_bar(0) == 1.
/// Each step also carries the timestep label passed to the denoiser, which
/// differs from the index once the schedule has been respaced.
class NoiseSchedule {
public:
    static NoiseSchedule from_betas(std::vector<double> betas);
    /// alpha_bars must be strictly decreasing in (0, 1]; labels default to 1..T.
    static NoiseSchedule from_alpha_bars(std::vector<double> alpha_bars, std::vector<int> labels = {});
    /// Exact reconstruction (e.g. from a dump); alpha_bars must agree with
    /// the running product of 1 - beta within 1e-9 relative.
    static NoiseSchedule from_parts(std::vector<double> betas, std::vector<double> alpha_bars, std::vector<int> labels);

    int timesteps() const noexcept { return static_cast<int>(beta_.size()); }
    double beta(int t) const { return beta_.at(index(t)); }
    double alpha(int t) const { return alpha_.at(index(t)); }
    double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bar_.at(index(t)); }
    int label(int t) const { return label_.at(index(t)); }

    std::span<const double> betas() const noexcept { return beta_; }
    std::span<const double> alphas() const noexcept { return alpha_; }
    std::span<const double> alpha_bars() const noexcept { return alpha_bar_; }
    std::span<const int> labels() const noexcept { return label_; }

private:
    std::size_t index(int t) const;

    std::vector<double> beta_;
    std::vector<double> alpha_;
    std::vector<double> alpha_bar_;
    std::vector<int> label_;
};

/// Linear beta schedule.
NoiseSchedule build_schedule(int timesteps = 1000, double beta_start = 1e-4, double beta_end = 0.02);

struct ScheduleCheck {
    struct Item {
        std::string name;
        bool passed = false;
        std::string detail;
    };
    std::vector<Item> items;
    bool passed() const noexcept;
};

ScheduleCheck check_schedule(const NoiseSchedule& s);

nlohmann::json to_json(const NoiseSchedule& s);
NoiseSchedule schedule_from_json(const nlohmann::json& j);

/// sqrt(abar_t) z0 + sqrt(1 - abar_t) eps.
LatentTensor forward_sample(const LatentTensor& z0, int t, const LatentTensor& eps, const NoiseSchedule& s);

/// (z_t - sqrt(1 - abar_t) eps_pred) / sqrt(abar_t). Throws ConfigError when
/// abar_t < 1e-12.
LatentTensor predict_z0(const LatentTensor& zt, int t, const LatentTensor& eps_pred, const NoiseSchedule& s);

/// (1 / sqrt(alpha_t)) (z_t - (1 - alpha_t) / sqrt(1 - abar_t) eps_pred).
LatentTensor posterior_mean(const LatentTensor& zt, int t, const LatentTensor& eps_pred, const NoiseSchedule& s);

/// Noise predictor eps_theta(z_t, t). `timestep` is the schedule label.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual LatentTensor predict_noise(const LatentTensor& zt, int timestep) const = 0;
};

class ZeroDenoiser final : public Denoiser {
public:
    LatentTensor predict_noise(const LatentTensor& zt, int timestep) const override;
};

/// Knows the clean latent and returns the exact noise implied by z_t under a
/// reference schedule: (z_t - sqrt(abar) z0) / sqrt(1 - abar).
class OracleDenoiser final : public Denoiser {
public:
    OracleDenoiser(LatentTensor z0, NoiseSchedule reference);
    LatentTensor predict_noise(const LatentTensor& zt, int timestep) const override;

private:
    LatentTensor z0_;
    NoiseSchedule reference_;
};

/// z_{t-1} = posterior_mean + noise_scale * sqrt(beta_t) xi, with xi = 0 at t = 1.
LatentTensor reverse_step(const LatentTensor& zt, int t, const Denoiser& denoiser, const NoiseSchedule& s,
                          RngStream& rng, double noise_scale = 1.0);

/// Full reverse chain from t = T down to 1.
LatentTensor sample_chain(LatentTensor zt, const Denoiser& denoiser, const NoiseSchedule& s, RngStream& rng,
                          double noise_scale = 1.0);

double noise_loss(const LatentTensor& eps, const LatentTensor& eps_pred);

/// n strictly decreasing timesteps in [1, T], first = T, gaps floor or ceil of T/n.
std::vector<int> subsample_steps(int timesteps, int n);

/// Schedule over a subset of timesteps (any order). Step i of the result has
/// alpha_bar equal to `base.alpha_bar(steps_i)` and label steps_i, with steps
/// sorted ascending.
NoiseSchedule respace(const NoiseSchedule& base, std::span<const int> steps);

} // namespace thermalsr
