#pragma once

#include <filesystem>
#include <string>

#include "thermalsr/image.hpp"

namespace thermalsr {

enum class ImageFormat { png, pnm };

struct ImageHeader {
    ImageFormat format = ImageFormat::png;
    int width = 0;
    int height = 0;
    int channels = 0;
    int bit_depth = 0;
};

/// Loads 8/16-bit PNG (gray or RGB; alpha is rejected) or binary PGM/PPM
/// (P5/P6). Throws IoError or FormatError.
ImageBuffer load_image(const std::filesystem::path& path);

/// Writes PNG or binary PNM depending on the extension (.png / .pgm .ppm .pnm).
/// The file is written to a temporary sibling and renamed, so a failed save
/// never leaves a partial file behind.
void save_image(const ImageBuffer& img, const std::filesystem::path& path);

/// Reads only the header; used by dataset scans.
ImageHeader read_image_header(const std::filesystem::path& path);

bool is_supported_image(const std::filesystem::path& path);

} // namespace thermalsr
