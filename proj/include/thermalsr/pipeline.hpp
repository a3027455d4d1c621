#pragma once

#include <cstdint>
#include <string>

#include "thermalsr/diffusion.hpp"
#include "thermalsr/error.hpp"
#include "thermalsr/image.hpp"

namespace thermalsr {

/// An image-to-image restoration stage (coarse network, denoising module...).
class Restorer {
public:
    virtual ~Restorer() = default;
    virtual std::string name() const = 0;
    virtual ImageBuffer restore(const ImageBuffer& input) const = 0;
};

class IdentityRestorer final : public Restorer {
public:
    std::string name() const override { return "identity"; }
    ImageBuffer restore(const ImageBuffer& input) const override { return input; }
};

/// Maps images into a latent space and back.
class LatentCodec {
public:
    virtual ~LatentCodec() = default;
    virtual LatentTensor encode(const ImageBuffer& img) const = 0;
    /// `like` supplies the bit depth (and, for shape-preserving codecs, size).
    virtual ImageBuffer decode(const LatentTensor& z, const ImageBuffer& like) const = 0;
};

/// Latent = unit-interval samples with shape {channels, height, width}.
/// decode(encode(x)) == x exactly.
class IdentityCodec final : public LatentCodec {
public:
    LatentTensor encode(const ImageBuffer& img) const override;
    ImageBuffer decode(const LatentTensor& z, const ImageBuffer& like) const override;
};

class PipelineError : public Error {
public:
    PipelineError(std::string stage, const std::string& what)
        : Error("stage '" + stage + "': " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct PipelineConfig {
    /// Reverse diffusion steps; 0 bypasses the latent stage entirely.
    int steps = 50;
    NoiseSchedule schedule = build_schedule();
    std::uint64_t seed = 0;
    /// Scales the per-step injected noise (0 = deterministic chain).
    double noise_scale = 1.0;
};

/// coarse -> [encode -> noise to the top subsampled timestep -> reverse chain
/// -> decode] -> post. Codec and denoiser may be null when steps == 0;
/// otherwise their absence is a ConfigError raised before any stage runs.
/// Exceptions from a stage are rethrown as PipelineError naming the stage.
ImageBuffer run_pipeline(const ImageBuffer& input, const Restorer& coarse, const LatentCodec* codec,
                         const Denoiser* denoiser, const Restorer& post, const PipelineConfig& config);

} // namespace thermalsr
