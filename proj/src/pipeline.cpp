#include "thermalsr/pipeline.hpp"

#include <cmath>
#include <utility>

namespace thermalsr {

LatentTensor IdentityCodec::encode(const ImageBuffer& img) const {
    const std::size_t c = img.channels();
    const std::size_t h = img.height();
    const std::size_t w = img.width();
    std::vector<double> v(c * h * w);
    const double scale = 1.0 / img.max_value();
    const auto s = img.samples();
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < h * w; ++i)
            v[ch * h * w + i] = s[i * c + ch] * scale;
    return LatentTensor({c, h, w}, std::move(v));
}

ImageBuffer IdentityCodec::decode(const LatentTensor& z, const ImageBuffer& like) const {
    const std::vector<std::size_t> expect{static_cast<std::size_t>(like.channels()),
                                          static_cast<std::size_t>(like.height()),
                                          static_cast<std::size_t>(like.width())};
    if (z.shape != expect)
        throw ShapeError("identity codec: latent shape does not match the reference image");
    const std::size_t c = expect[0];
    const std::size_t hw = expect[1] * expect[2];
    const double maxv = like.max_value();
    std::vector<Sample> out(c * hw);
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t i = 0; i < hw; ++i) {
            double v = std::floor(z.values[ch * hw + i] * maxv + 0.5);
            if (!(v >= 0.0))
                v = 0.0;
            if (v > maxv)
                v = maxv;
            out[i * c + ch] = static_cast<Sample>(v);
        }
    }
    return ImageBuffer(like.width(), like.height(), like.channels(), like.bit_depth(), std::move(out));
}

namespace {

template <class F>
auto run_stage(const char* stage, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const PipelineError&) {
        throw;
    } catch (const std::exception& e) {
        throw PipelineError(stage, e.what());
    }
}

} // namespace

ImageBuffer run_pipeline(const ImageBuffer& input, const Restorer& coarse, const LatentCodec* codec,
                         const Denoiser* denoiser, const Restorer& post, const PipelineConfig& config) {
    if (config.steps < 0)
        throw ConfigError("pipeline steps must be >= 0");
    if (config.steps > 0) {
        if (!codec)
            throw ConfigError("pipeline with " + std::to_string(config.steps) + " diffusion steps needs a latent codec");
        if (!denoiser)
            throw ConfigError("pipeline with " + std::to_string(config.steps) + " diffusion steps needs a denoiser");
        if (config.steps > config.schedule.timesteps())
            throw ConfigError("pipeline steps exceed the schedule length");
    }

    const ImageBuffer coarse_out = run_stage("coarse", [&] { return coarse.restore(input); });
    ImageBuffer refined = coarse_out;
    if (config.steps > 0) {
        const LatentTensor z0 = run_stage("encode", [&] { return codec->encode(coarse_out); });
        const LatentTensor z = run_stage("diffusion", [&] {
            const auto steps = subsample_steps(config.schedule.timesteps(), config.steps);
            const NoiseSchedule spaced = respace(config.schedule, steps);
            RngStream rng(config.seed);
            const LatentTensor eps = LatentTensor::gaussian(z0.shape, rng);
            LatentTensor zt = forward_sample(z0, spaced.timesteps(), eps, spaced);
            return sample_chain(std::move(zt), *denoiser, spaced, rng, config.noise_scale);
        });
        refined = run_stage("decode", [&] { return codec->decode(z, coarse_out); });
    }
    return run_stage("post", [&] { return post.restore(refined); });
}

} // namespace thermalsr
