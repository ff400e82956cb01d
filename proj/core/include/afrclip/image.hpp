#pragma once

#include <vector>

#include "afrclip/errors.hpp"
#include "afrclip/mat.hpp"

namespace afrclip {

// RGB image, planar channel layout, values in [0, 1].
struct Image {
    int h = 0;
    int w = 0;
    std::vector<double> chan;  // size 3*h*w, index (c*h + y)*w + x

    Image() = default;
    Image(int height, int width) : h(height), w(width), chan(static_cast<size_t>(3) * height * width, 0.0) {}

    double& at(int c, int y, int x) { return chan[(static_cast<size_t>(c) * h + y) * w + x]; }
    double at(int c, int y, int x) const { return chan[(static_cast<size_t>(c) * h + y) * w + x]; }

    Mat channel(int c) const {
        Mat m(h, w);
        std::copy(chan.begin() + static_cast<size_t>(c) * h * w,
                  chan.begin() + static_cast<size_t>(c + 1) * h * w, m.data.begin());
        return m;
    }
    void set_channel(int c, const Mat& m) {
        require_shape(m, h, w, "Image::set_channel");
        std::copy(m.data.begin(), m.data.end(), chan.begin() + static_cast<size_t>(c) * h * w);
    }
};

// Bilinear per channel; used when adapting inputs to the model resolution.
Image resize_image(const Image& img, int out_h, int out_w);

}  // namespace afrclip
