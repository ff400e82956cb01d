#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "afrclip/image.hpp"

namespace afrclip::png_io {

// 8-bit PNG decode; gray, gray+alpha, RGB, RGBA and palette images are
// accepted and expanded to the requested layout.
struct RawPng {
    int w = 0;
    int h = 0;
    int channels = 0;            // 1 or 3 after expansion
    std::vector<uint8_t> bytes;  // row-major, interleaved
};

RawPng read_png(const std::string& path, bool force_gray = false);

Image read_image(const std::string& path);     // RGB in [0,1]
Mat read_mask(const std::string& path, bool* was_binarized = nullptr);  // {0,1}, threshold 127.5

void write_gray8(const std::string& path, const std::vector<uint8_t>& pixels, int w, int h);
void write_rgb8(const std::string& path, const std::vector<uint8_t>& pixels, int w, int h);

void write_image(const std::string& path, const Image& img);
// probability * 255, rounded half-up
void write_probability_png(const std::string& path, const Mat& probabilities);
void write_mask_png(const std::string& path, const Mat& mask);

}  // namespace afrclip::png_io
