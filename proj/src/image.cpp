#include "thermalsr/image.hpp"

#include <algorithm>
#include <string>

#include "thermalsr/error.hpp"

namespace thermalsr {

namespace {

void check_geometry(int width, int height, int channels, int bit_depth) {
    if (width < 1 || height < 1)
        throw ShapeError("image dimensions must be >= 1, got " + std::to_string(width) + "x" + std::to_string(height));
    if (channels != 1 && channels != 3)
        throw ShapeError("image must have 1 or 3 channels, got " + std::to_string(channels));
    if (bit_depth != 8 && bit_depth != 16)
        throw ShapeError("bit depth must be 8 or 16, got " + std::to_string(bit_depth));
}

} // namespace

ImageBuffer::ImageBuffer(int width, int height, int channels, int bit_depth)
    : width_(width), height_(height), channels_(channels), bit_depth_(bit_depth) {
    check_geometry(width, height, channels, bit_depth);
    samples_.assign(pixel_count() * static_cast<std::size_t>(channels), 0);
}

ImageBuffer::ImageBuffer(int width, int height, int channels, int bit_depth, std::vector<Sample> samples)
    : width_(width), height_(height), channels_(channels), bit_depth_(bit_depth), samples_(std::move(samples)) {
    check_geometry(width, height, channels, bit_depth);
    if (samples_.size() != pixel_count() * static_cast<std::size_t>(channels))
        throw ShapeError("sample count " + std::to_string(samples_.size()) + " does not match " +
                         std::to_string(width) + "x" + std::to_string(height) + "x" + std::to_string(channels));
    const Sample top = max_value();
    if (bit_depth_ < 16) {
        auto bad = std::find_if(samples_.begin(), samples_.end(), [top](Sample s) { return s > top; });
        if (bad != samples_.end())
            throw ShapeError("sample value " + std::to_string(*bad) + " exceeds " + std::to_string(top));
    }
}

std::vector<Sample> ImageBuffer::channel(int c) const {
    std::vector<Sample> out(pixel_count());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = samples_[i * channels_ + c];
    return out;
}

std::vector<PixelStats> channel_stats(const ImageBuffer& img) {
    std::vector<PixelStats> stats(img.channels());
    const auto s = img.samples();
    const int nc = img.channels();
    for (int c = 0; c < nc; ++c) {
        stats[c].channel_index = c;
        stats[c].min_value = s[c];
        stats[c].max_value = s[c];
    }
    for (std::size_t i = 0; i < s.size(); i += nc) {
        for (int c = 0; c < nc; ++c) {
            const Sample v = s[i + c];
            stats[c].min_value = std::min(stats[c].min_value, v);
            stats[c].max_value = std::max(stats[c].max_value, v);
        }
    }
    return stats;
}

ImageBuffer crop(const ImageBuffer& img, int x0, int y0, int width, int height) {
    if (x0 < 0 || y0 < 0 || width < 1 || height < 1 || x0 + width > img.width() || y0 + height > img.height())
        throw ShapeError("crop window outside image");
    const int nc = img.channels();
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(width) * height * nc);
    const auto s = img.samples();
    for (int y = y0; y < y0 + height; ++y) {
        const auto row = s.begin() + (static_cast<std::ptrdiff_t>(y) * img.width() + x0) * nc;
        out.insert(out.end(), row, row + static_cast<std::ptrdiff_t>(width) * nc);
    }
    return ImageBuffer(width, height, nc, img.bit_depth(), std::move(out));
}

ImageBuffer crop_to_multiple(const ImageBuffer& img, int factor) {
    if (factor < 1)
        throw ConfigError("crop factor must be >= 1");
    if (img.width() < factor || img.height() < factor)
        throw ShapeError("image " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                         " is smaller than factor " + std::to_string(factor));
    const int w = img.width() / factor * factor;
    const int h = img.height() / factor * factor;
    if (w == img.width() && h == img.height())
        return img;
    return crop(img, 0, 0, w, h);
}

ImageBuffer from_planes(int width, int height, int bit_depth, std::span<const std::vector<Sample>> planes) {
    const int nc = static_cast<int>(planes.size());
    const std::size_t n = static_cast<std::size_t>(width) * height;
    std::vector<Sample> out(n * nc);
    for (int c = 0; c < nc; ++c) {
        if (planes[c].size() != n)
            throw ShapeError("plane size mismatch");
        for (std::size_t i = 0; i < n; ++i)
            out[i * nc + c] = planes[c][i];
    }
    return ImageBuffer(width, height, nc, bit_depth, std::move(out));
}

std::size_t distinct_values(const ImageBuffer& img, int c) {
    std::vector<bool> seen(static_cast<std::size_t>(img.max_value()) + 1, false);
    std::size_t count = 0;
    const auto s = img.samples();
    for (std::size_t i = static_cast<std::size_t>(c); i < s.size(); i += img.channels()) {
        if (!seen[s[i]]) {
            seen[s[i]] = true;
            ++count;
        }
    }
    return count;
}

} // namespace thermalsr
