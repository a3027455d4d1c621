#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace thermalsr {

using Sample = std::uint16_t;

/// Row-major H x W x C grid of unsigned integer samples with an explicit bit
/// depth. Immutable once constructed; every constructor validates the
/// invariants (dimensions >= 1, 1 or 3 channels, 8 or 16 bits, samples in
/// [0, 2^bit_depth - 1]).
class ImageBuffer {
public:
    /// Zero-filled image.
    ImageBuffer(int width, int height, int channels, int bit_depth);
    ImageBuffer(int width, int height, int channels, int bit_depth, std::vector<Sample> samples);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }
    int bit_depth() const noexcept { return bit_depth_; }
    Sample max_value() const noexcept { return static_cast<Sample>((1u << bit_depth_) - 1u); }

    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
    }
    std::span<const Sample> samples() const noexcept { return samples_; }

    Sample at(int x, int y, int c = 0) const noexcept {
        return samples_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    /// Interleaved samples of one channel, copied out in raster order.
    std::vector<Sample> channel(int c) const;

    bool same_shape(const ImageBuffer& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }

    friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

private:
    int width_;
    int height_;
    int channels_;
    int bit_depth_;
    std::vector<Sample> samples_;
};

struct PixelStats {
    int channel_index = 0;
    Sample min_value = 0;
    Sample max_value = 0;
};

std::vector<PixelStats> channel_stats(const ImageBuffer& img);

/// Top-left crop to the largest width/height that are multiples of `factor`.
ImageBuffer crop_to_multiple(const ImageBuffer& img, int factor);

ImageBuffer crop(const ImageBuffer& img, int x0, int y0, int width, int height);

/// Assemble an image from per-channel planes (each width*height long).
ImageBuffer from_planes(int width, int height, int bit_depth, std::span<const std::vector<Sample>> planes);

/// Number of distinct sample values in channel `c`.
std::size_t distinct_values(const ImageBuffer& img, int c);

} // namespace thermalsr
