#pragma once

#include <string>
#include <vector>

#include "ugcsr/rng.hpp"
#include "ugcsr/tensor.hpp"

namespace ugcsr {

// Interleaved RGB image with values in [0,1].
struct Image {
    int h = 0, w = 0;
    std::vector<double> px;  // h*w*3, row-major, RGB

    Image() = default;
    Image(int h_, int w_, double fill = 0.0) : h(h_), w(w_), px(static_cast<size_t>(h_) * w_ * 3, fill) {}

    double& at(int y, int x, int c) { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
    double at(int y, int x, int c) const { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
    bool empty() const { return px.empty(); }
    size_t size() const { return px.size(); }

    void clamp01() {
        for (double& v : px) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    }
};

Image load_image(const std::string& path);  // throws on failure
void save_png(const Image& img, const std::string& path);

// Round-trip through an 8-bit JPEG codec at the given quality.
Image jpeg_roundtrip(const Image& img, int quality);

// Separable Catmull-Rom (a = -0.5) resampling with clamped borders.
Image resize_bicubic(const Image& img, int out_h, int out_w);

Image gaussian_blur(const Image& img, double sigma);
Image add_gaussian_noise(const Image& img, double sigma, Rng& rng);

Image crop(const Image& img, int y0, int x0, int ch, int cw);

// Image <-> (1,3,h,w) tensor in [0,1]
Tensor image_to_tensor(const Image& img);
Tensor image_to_chw(const Image& img);       // (3,h,w)
Image chw_to_image(const Tensor& t);         // clamps to [0,1]
Image tensor_to_image(const Tensor& t);  // clamps to [0,1]

double max_abs_diff(const Image& a, const Image& b);

}  // namespace ugcsr
