#include "afrclip/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

#include "afrclip/errors.hpp"

namespace afrclip::png_io {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

RawPng read_png(const std::string& path, bool force_gray) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("png: cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png: out of memory");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png: out of memory");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png: failed to decode " + path);
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int bit_depth = png_get_bit_depth(png, info);
    int color_type = png_get_color_type(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (force_gray) {
        if (color_type == PNG_COLOR_TYPE_RGB || color_type == PNG_COLOR_TYPE_RGB_ALPHA ||
            color_type == PNG_COLOR_TYPE_PALETTE)
            png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    } else {
        if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
            png_set_gray_to_rgb(png);
    }
    png_read_update_info(png, info);

    int channels = static_cast<int>(png_get_channels(png, info));
    RawPng out;
    out.w = static_cast<int>(w);
    out.h = static_cast<int>(h);
    out.channels = channels;
    out.bytes.resize(static_cast<size_t>(w) * h * channels);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = out.bytes.data() + static_cast<size_t>(y) * w * channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

Image read_image(const std::string& path) {
    RawPng raw = read_png(path, false);
    if (raw.channels != 3) throw IoError("png: expected RGB after expansion for " + path);
    Image img(raw.h, raw.w);
    for (int y = 0; y < raw.h; ++y)
        for (int x = 0; x < raw.w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = raw.bytes[(static_cast<size_t>(y) * raw.w + x) * 3 + c] / 255.0;
    return img;
}

Mat read_mask(const std::string& path, bool* was_binarized) {
    RawPng raw = read_png(path, true);
    if (raw.channels != 1) throw IoError("png: expected grayscale after conversion for " + path);
    Mat mask(raw.h, raw.w);
    bool binarized = false;
    for (size_t i = 0; i < raw.bytes.size(); ++i) {
        uint8_t v = raw.bytes[i];
        if (v != 0 && v != 255) binarized = true;
        mask.data[i] = v > 127.5 ? 1.0 : 0.0;
    }
    if (was_binarized) *was_binarized = binarized;
    return mask;
}

namespace {

void write_png8(const std::string& path, const uint8_t* pixels, int w, int h, int color_type,
                int channels) {
    if (w < 1 || h < 1) throw IoError("png: refusing to write empty image " + path);
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("png: cannot write " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png: out of memory");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png: out of memory");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png: failed to encode " + path);
    }
    png_init_io(png, fp.get());
    // fixed encoder settings keep outputs byte-stable across runs
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, w, h, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y)
        rows[y] = const_cast<png_bytep>(pixels + static_cast<size_t>(y) * w * channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_gray8(const std::string& path, const std::vector<uint8_t>& pixels, int w, int h) {
    if (pixels.size() != static_cast<size_t>(w) * h) throw ShapeError("write_gray8: pixel count mismatch");
    write_png8(path, pixels.data(), w, h, PNG_COLOR_TYPE_GRAY, 1);
}

void write_rgb8(const std::string& path, const std::vector<uint8_t>& pixels, int w, int h) {
    if (pixels.size() != static_cast<size_t>(w) * h * 3) throw ShapeError("write_rgb8: pixel count mismatch");
    write_png8(path, pixels.data(), w, h, PNG_COLOR_TYPE_RGB, 3);
}

void write_image(const std::string& path, const Image& img) {
    std::vector<uint8_t> pixels(static_cast<size_t>(img.h) * img.w * 3);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = img.at(c, y, x);
                v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                pixels[(static_cast<size_t>(y) * img.w + x) * 3 + c] =
                    static_cast<uint8_t>(std::floor(v * 255.0 + 0.5));
            }
    write_rgb8(path, pixels, img.w, img.h);
}

void write_probability_png(const std::string& path, const Mat& probabilities) {
    std::vector<uint8_t> pixels(probabilities.size());
    for (size_t i = 0; i < pixels.size(); ++i) {
        double v = probabilities.data[i];
        if (!(v >= 0.0 && v <= 1.0))
            throw NumericError("write_probability_png: value outside [0,1]");
        pixels[i] = static_cast<uint8_t>(std::floor(v * 255.0 + 0.5));  // round half up
    }
    write_gray8(path, pixels, probabilities.cols, probabilities.rows);
}

void write_mask_png(const std::string& path, const Mat& mask) {
    std::vector<uint8_t> pixels(mask.size());
    for (size_t i = 0; i < pixels.size(); ++i) pixels[i] = mask.data[i] > 0.5 ? 255 : 0;
    write_gray8(path, pixels, mask.cols, mask.rows);
}

}  // namespace afrclip::png_io
