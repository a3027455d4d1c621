#include "thermalsr/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <system_error>

#include "thermalsr/error.hpp"

namespace thermalsr {

namespace fs = std::filesystem;

namespace {

std::string lower_ext(const fs::path& p) {
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return e;
}

ImageFormat format_for_extension(const fs::path& p) {
    const std::string e = lower_ext(p);
    if (e == ".png")
        return ImageFormat::png;
    if (e == ".pgm" || e == ".ppm" || e == ".pnm")
        return ImageFormat::pnm;
    throw FormatError("unsupported image extension '" + e + "' for " + p.string());
}

std::vector<unsigned char> read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad())
        throw IoError("read failed for " + path.string());
    return data;
}

// ---- PNM ---------------------------------------------------------------

struct PnmHeader {
    int channels = 0;
    int width = 0;
    int height = 0;
    int maxval = 0;
    std::size_t data_offset = 0;
};

PnmHeader parse_pnm_header(std::span<const unsigned char> data, const fs::path& path) {
    if (data.size() < 2 || data[0] != 'P' || (data[1] != '5' && data[1] != '6'))
        throw FormatError(path.string() + ": not a binary PGM/PPM (P5/P6)");
    PnmHeader h;
    h.channels = data[1] == '5' ? 1 : 3;
    std::size_t pos = 2;
    auto next_int = [&]() -> long {
        for (;;) {
            while (pos < data.size() && std::isspace(data[pos]))
                ++pos;
            if (pos < data.size() && data[pos] == '#') {
                while (pos < data.size() && data[pos] != '\n')
                    ++pos;
                continue;
            }
            break;
        }
        if (pos >= data.size() || !std::isdigit(data[pos]))
            throw FormatError(path.string() + ": corrupt PNM header");
        long v = 0;
        while (pos < data.size() && std::isdigit(data[pos])) {
            v = v * 10 + (data[pos] - '0');
            if (v > 1'000'000'000)
                throw FormatError(path.string() + ": corrupt PNM header");
            ++pos;
        }
        return v;
    };
    h.width = static_cast<int>(next_int());
    h.height = static_cast<int>(next_int());
    h.maxval = static_cast<int>(next_int());
    if (pos >= data.size() || !std::isspace(data[pos]))
        throw FormatError(path.string() + ": corrupt PNM header");
    h.data_offset = pos + 1;
    if (h.width < 1 || h.height < 1 || h.maxval < 1 || h.maxval > 65535)
        throw FormatError(path.string() + ": corrupt PNM header");
    return h;
}

ImageBuffer decode_pnm(std::span<const unsigned char> data, const fs::path& path) {
    const PnmHeader h = parse_pnm_header(data, path);
    const int bytes = h.maxval > 255 ? 2 : 1;
    const std::size_t count = static_cast<std::size_t>(h.width) * h.height * h.channels;
    if (data.size() - h.data_offset < count * bytes)
        throw FormatError(path.string() + ": truncated PNM data");
    std::vector<Sample> samples(count);
    const unsigned char* p = data.data() + h.data_offset;
    for (std::size_t i = 0; i < count; ++i) {
        const Sample v = bytes == 2 ? static_cast<Sample>((p[2 * i] << 8) | p[2 * i + 1]) : p[i];
        if (v > h.maxval)
            throw FormatError(path.string() + ": sample " + std::to_string(v) + " exceeds declared maxval " +
                              std::to_string(h.maxval));
        samples[i] = v;
    }
    return ImageBuffer(h.width, h.height, h.channels, bytes == 2 ? 16 : 8, std::move(samples));
}

std::vector<unsigned char> encode_pnm(const ImageBuffer& img) {
    const std::string header = std::string(img.channels() == 1 ? "P5" : "P6") + "\n" + std::to_string(img.width()) +
                               " " + std::to_string(img.height()) + "\n" + std::to_string(img.max_value()) + "\n";
    const auto s = img.samples();
    std::vector<unsigned char> out(header.begin(), header.end());
    if (img.bit_depth() == 8) {
        out.insert(out.end(), s.begin(), s.end());
    } else {
        out.reserve(out.size() + s.size() * 2);
        for (Sample v : s) {
            out.push_back(static_cast<unsigned char>(v >> 8));
            out.push_back(static_cast<unsigned char>(v & 0xff));
        }
    }
    return out;
}

// ---- PNG ---------------------------------------------------------------

struct MemReader {
    std::span<const unsigned char> data;
    std::size_t pos = 0;
};

void png_read_mem(png_structp png, png_bytep out, png_size_t n) {
    auto* r = static_cast<MemReader*>(png_get_io_ptr(png));
    if (r->pos + n > r->data.size())
        png_error(png, "unexpected end of PNG data");
    std::memcpy(out, r->data.data() + r->pos, n);
    r->pos += n;
}

void png_write_mem(png_structp png, png_bytep in, png_size_t n) {
    auto* v = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(png));
    v->insert(v->end(), in, in + n);
}

void png_flush_noop(png_structp) {}

void png_error_throw(png_structp png, png_const_charp msg) {
    auto* err = static_cast<std::string*>(png_get_error_ptr(png));
    if (err)
        *err = msg;
    png_longjmp(png, 1);
}

void png_warning_ignore(png_structp, png_const_charp) {}

bool is_png_signature(std::span<const unsigned char> data) {
    return data.size() >= 8 && png_sig_cmp(data.data(), 0, 8) == 0;
}

ImageBuffer decode_png(std::span<const unsigned char> data, const fs::path& path) {
    std::string err;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_throw, png_warning_ignore);
    if (!png)
        throw FormatError("libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw FormatError("libpng initialisation failed");
    }
    MemReader reader{data, 0};
    // Everything that must outlive a longjmp lives outside this frame.
    std::vector<Sample> samples;
    std::vector<unsigned char> rowbuf;
    std::vector<png_bytep> rows;
    int width = 0, height = 0, channels = 0, depth = 0;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError(path.string() + ": corrupt PNG (" + err + ")");
    }
    png_set_read_fn(png, &reader, png_read_mem);
    png_read_info(png, info);
    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    const int color = png_get_color_type(png, info);
    depth = png_get_bit_depth(png, info);
    if (color & PNG_COLOR_MASK_ALPHA) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError(path.string() + ": PNG with alpha channel is not supported");
    }
    if (color == PNG_COLOR_TYPE_PALETTE)
        png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS))
        png_set_strip_alpha(png);
    png_read_update_info(png, info);
    depth = png_get_bit_depth(png, info);
    channels = png_get_channels(png, info);
    if ((channels != 1 && channels != 3) || (depth != 8 && depth != 16)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError(path.string() + ": unsupported PNG layout");
    }
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    rowbuf.resize(rowbytes * height);
    rows.resize(height);
    for (int y = 0; y < height; ++y)
        rows[y] = rowbuf.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    const std::size_t count = static_cast<std::size_t>(width) * height * channels;
    samples.resize(count);
    for (int y = 0; y < height; ++y) {
        const unsigned char* r = rows[y];
        const std::size_t base = static_cast<std::size_t>(y) * width * channels;
        for (std::size_t i = 0; i < static_cast<std::size_t>(width) * channels; ++i)
            samples[base + i] = depth == 16 ? static_cast<Sample>((r[2 * i] << 8) | r[2 * i + 1]) : r[i];
    }
    return ImageBuffer(width, height, channels, depth, std::move(samples));
}

std::vector<unsigned char> encode_png(const ImageBuffer& img) {
    std::string err;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_throw, png_warning_ignore);
    if (!png)
        throw IoError("libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng initialisation failed");
    }
    std::vector<unsigned char> out;
    const int bpc = img.bit_depth() / 8;
    const std::size_t rowbytes = static_cast<std::size_t>(img.width()) * img.channels() * bpc;
    std::vector<unsigned char> rowbuf(rowbytes * img.height());
    const auto s = img.samples();
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (bpc == 2) {
            rowbuf[2 * i] = static_cast<unsigned char>(s[i] >> 8);
            rowbuf[2 * i + 1] = static_cast<unsigned char>(s[i] & 0xff);
        } else {
            rowbuf[i] = static_cast<unsigned char>(s[i]);
        }
    }
    std::vector<png_bytep> rows(img.height());
    for (int y = 0; y < img.height(); ++y)
        rows[y] = rowbuf.data() + rowbytes * y;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encoding failed (" + err + ")");
    }
    png_set_write_fn(png, &out, png_write_mem, png_flush_noop);
    png_set_IHDR(png, info, img.width(), img.height(), img.bit_depth(),
                 img.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

std::uint32_t be32(const unsigned char* p) {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

} // namespace

bool is_supported_image(const fs::path& path) {
    const std::string e = lower_ext(path);
    return e == ".png" || e == ".pgm" || e == ".ppm" || e == ".pnm";
}

ImageBuffer load_image(const fs::path& path) {
    if (!fs::exists(path))
        throw IoError("no such file: " + path.string());
    const auto data = read_all(path);
    if (is_png_signature(data))
        return decode_png(data, path);
    if (data.size() >= 2 && data[0] == 'P')
        return decode_pnm(data, path);
    throw FormatError(path.string() + ": unsupported image format");
}

ImageHeader read_image_header(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::array<unsigned char, 512> buf{};
    in.read(reinterpret_cast<char*>(buf.data()), buf.size());
    const auto n = static_cast<std::size_t>(in.gcount());
    const std::span<const unsigned char> head(buf.data(), n);
    ImageHeader h;
    if (is_png_signature(head)) {
        if (n < 29 || std::memcmp(buf.data() + 12, "IHDR", 4) != 0)
            throw FormatError(path.string() + ": corrupt PNG header");
        h.format = ImageFormat::png;
        h.width = static_cast<int>(be32(buf.data() + 16));
        h.height = static_cast<int>(be32(buf.data() + 20));
        const int depth = buf[24];
        const int color = buf[25];
        if (color & PNG_COLOR_MASK_ALPHA)
            throw FormatError(path.string() + ": PNG with alpha channel is not supported");
        h.channels = (color & PNG_COLOR_MASK_COLOR) ? 3 : 1;
        h.bit_depth = (color == PNG_COLOR_TYPE_PALETTE || depth <= 8) ? 8 : 16;
        return h;
    }
    if (n >= 2 && buf[0] == 'P') {
        const PnmHeader p = parse_pnm_header(head, path);
        h.format = ImageFormat::pnm;
        h.width = p.width;
        h.height = p.height;
        h.channels = p.channels;
        h.bit_depth = p.maxval > 255 ? 16 : 8;
        return h;
    }
    throw FormatError(path.string() + ": unsupported image format");
}

void save_image(const ImageBuffer& img, const fs::path& path) {
    const ImageFormat fmt = format_for_extension(path);
    if (fmt == ImageFormat::pnm) {
        const std::string e = lower_ext(path);
        if (e == ".pgm" && img.channels() != 1)
            throw FormatError("cannot store a 3-channel image as PGM: " + path.string());
        if (e == ".ppm" && img.channels() != 3)
            throw FormatError("cannot store a 1-channel image as PPM: " + path.string());
    }
    const auto bytes = fmt == ImageFormat::png ? encode_png(img) : encode_pnm(img);

    thread_local std::mt19937_64 salt{std::random_device{}()};
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(salt() % 1000000007ULL);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot write " + path.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            out.close();
            std::error_code ec;
            fs::remove(tmp, ec);
            throw IoError("write failed for " + path.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot write " + path.string());
    }
}

} // namespace thermalsr
