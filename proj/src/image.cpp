#include "ugcsr/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ugcsr {

namespace {
cv::Mat to_mat8(const Image& img) {
    cv::Mat m(img.h, img.w, CV_8UC3);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            // OpenCV is BGR
            for (int c = 0; c < 3; ++c) {
                double v = std::clamp(img.at(y, x, 2 - c), 0.0, 1.0);
                m.at<cv::Vec3b>(y, x)[c] = static_cast<unsigned char>(std::lround(v * 255.0));
            }
        }
    return m;
}

Image from_mat8(const cv::Mat& m) {
    Image img(m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(y, x, c) = m.at<cv::Vec3b>(y, x)[2 - c] / 255.0;
    return img;
}
}  // namespace

Image load_image(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_COLOR);
    if (m.empty()) throw std::runtime_error("load_image: cannot decode " + path);
    return from_mat8(m);
}

void save_png(const Image& img, const std::string& path) {
    if (img.empty()) throw std::invalid_argument("save_png: empty image");
    if (!cv::imwrite(path, to_mat8(img)))
        throw std::runtime_error("save_png: cannot write " + path);
}

Image jpeg_roundtrip(const Image& img, int quality) {
    if (img.empty()) throw std::invalid_argument("jpeg_roundtrip: empty image");
    std::vector<unsigned char> buf;
    cv::imencode(".jpg", to_mat8(img), buf, {cv::IMWRITE_JPEG_QUALITY, quality});
    cv::Mat dec = cv::imdecode(buf, cv::IMREAD_COLOR);
    return from_mat8(dec);
}

namespace {
inline double cubic_kernel(double x) {
    // Catmull-Rom, a = -0.5
    const double a = -0.5;
    x = std::abs(x);
    if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
    return 0.0;
}
}  // namespace

Image resize_bicubic(const Image& img, int out_h, int out_w) {
    if (img.empty()) throw std::invalid_argument("resize_bicubic: empty image");
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize_bicubic: bad target size");
    double sy = static_cast<double>(img.h) / out_h;
    double sx = static_cast<double>(img.w) / out_w;

    // horizontal pass
    Image tmp(img.h, out_w);
    for (int x = 0; x < out_w; ++x) {
        double src = (x + 0.5) * sx - 0.5;
        int i0 = static_cast<int>(std::floor(src)) - 1;
        double wsum = 0.0, wts[4];
        for (int k = 0; k < 4; ++k) {
            wts[k] = cubic_kernel(src - (i0 + k));
            wsum += wts[k];
        }
        for (int y = 0; y < img.h; ++y)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int k = 0; k < 4; ++k) {
                    int xi = std::clamp(i0 + k, 0, img.w - 1);
                    acc += wts[k] * img.at(y, xi, c);
                }
                tmp.at(y, x, c) = acc / wsum;
            }
    }
    // vertical pass
    Image out(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        double src = (y + 0.5) * sy - 0.5;
        int i0 = static_cast<int>(std::floor(src)) - 1;
        double wsum = 0.0, wts[4];
        for (int k = 0; k < 4; ++k) {
            wts[k] = cubic_kernel(src - (i0 + k));
            wsum += wts[k];
        }
        for (int x = 0; x < out_w; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int k = 0; k < 4; ++k) {
                    int yi = std::clamp(i0 + k, 0, img.h - 1);
                    acc += wts[k] * tmp.at(yi, x, c);
                }
                out.at(y, x, c) = acc / wsum;
            }
    }
    return out;
}

Image gaussian_blur(const Image& img, double sigma) {
    if (sigma <= 0.0) return img;
    int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kern(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kern[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += kern[i + radius];
    }
    for (double& v : kern) v /= sum;

    Image tmp(img.h, img.w), out(img.h, img.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k)
                    acc += kern[k + radius] * img.at(y, std::clamp(x + k, 0, img.w - 1), c);
                tmp.at(y, x, c) = acc;
            }
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k)
                    acc += kern[k + radius] * tmp.at(std::clamp(y + k, 0, img.h - 1), x, c);
                out.at(y, x, c) = acc;
            }
    return out;
}

Image add_gaussian_noise(const Image& img, double sigma, Rng& rng) {
    Image out = img;
    if (sigma <= 0.0) return out;
    for (double& v : out.px) v += sigma * rng.normal();
    return out;
}

Image crop(const Image& img, int y0, int x0, int ch, int cw) {
    if (y0 < 0 || x0 < 0 || y0 + ch > img.h || x0 + cw > img.w)
        throw std::out_of_range("crop: window outside image");
    Image out(ch, cw);
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
    return out;
}

Tensor image_to_tensor(const Image& img) {
    Tensor t({1, 3, static_cast<size_t>(img.h), static_cast<size_t>(img.w)});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) t.at4(0, c, y, x) = img.at(y, x, c);
    return t;
}

Tensor image_to_chw(const Image& img) {
    Tensor t({3, static_cast<size_t>(img.h), static_cast<size_t>(img.w)});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) t.at3(c, y, x) = img.at(y, x, c);
    return t;
}

Image chw_to_image(const Tensor& t) {
    if (t.ndim() != 3 || t.dim(0) != 3)
        throw std::invalid_argument("chw_to_image: want (3,h,w)");
    Image img(static_cast<int>(t.dim(1)), static_cast<int>(t.dim(2)));
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) img.at(y, x, c) = t.at3(c, y, x);
    img.clamp01();
    return img;
}

Image tensor_to_image(const Tensor& t) {
    if (t.ndim() != 4 || t.dim(0) != 1 || t.dim(1) != 3)
        throw std::invalid_argument("tensor_to_image: want (1,3,h,w)");
    Image img(static_cast<int>(t.dim(2)), static_cast<int>(t.dim(3)));
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) img.at(y, x, c) = t.at4(0, c, y, x);
    img.clamp01();
    return img;
}

double max_abs_diff(const Image& a, const Image& b) {
    if (a.h != b.h || a.w != b.w) throw std::invalid_argument("max_abs_diff: size mismatch");
    double m = 0.0;
    for (size_t i = 0; i < a.px.size(); ++i) m = std::max(m, std::abs(a.px[i] - b.px[i]));
    return m;
}

}  // namespace ugcsr
