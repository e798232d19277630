#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "ugcsr/rng.hpp"

namespace ugcsr {

// Dense row-major double tensor. Everything in this project runs in 64-bit
// so finite-difference gradient checks are meaningful.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<size_t> shape, double fill = 0.0)
        : shape_(std::move(shape)) {
        size_t n = 1;
        for (size_t d : shape_) n *= d;
        data_.assign(n, fill);
    }

    static Tensor randn(std::vector<size_t> shape, Rng& rng) {
        Tensor t(std::move(shape));
        for (double& v : t.data_) v = rng.normal();
        return t;
    }

    const std::vector<size_t>& shape() const { return shape_; }
    size_t ndim() const { return shape_.size(); }
    size_t dim(size_t i) const { return shape_.at(i); }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    // (c,h,w) indexing
    double& at3(size_t c, size_t y, size_t x) {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }
    double at3(size_t c, size_t y, size_t x) const {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }
    // (b,c,h,w) indexing
    double& at4(size_t b, size_t c, size_t y, size_t x) {
        return data_[((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }
    double at4(size_t b, size_t c, size_t y, size_t x) const {
        return data_[((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }
    // (n,d) indexing
    double& at2(size_t r, size_t c) { return data_[r * shape_[1] + c]; }
    double at2(size_t r, size_t c) const { return data_[r * shape_[1] + c]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void fill(double v) { data_.assign(data_.size(), v); }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    Tensor& operator+=(const Tensor& o) {
        check_same(o);
        for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Tensor& operator-=(const Tensor& o) {
        check_same(o);
        for (size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Tensor& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
    friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
    friend Tensor operator*(Tensor a, double s) { return a *= s; }
    friend Tensor operator*(double s, Tensor a) { return a *= s; }

    double mse(const Tensor& o) const {
        check_same(o);
        double acc = 0.0;
        for (size_t i = 0; i < data_.size(); ++i) {
            double d = data_[i] - o.data_[i];
            acc += d * d;
        }
        return data_.empty() ? 0.0 : acc / static_cast<double>(data_.size());
    }

    uint64_t checksum() const {
        return fnv1a(data_.data(), data_.size() * sizeof(double));
    }

private:
    void check_same(const Tensor& o) const {
        if (shape_ != o.shape_) throw std::invalid_argument("tensor shape mismatch");
    }

    std::vector<size_t> shape_;
    std::vector<double> data_;
};

enum class Space { pixel, latent };

// 4-D (batch, channels, height, width) tensor tagged with its space.
struct LatentTensor {
    Tensor data;
    Space space = Space::latent;

    LatentTensor() = default;
    LatentTensor(Tensor d, Space s) : data(std::move(d)), space(s) {
        if (data.ndim() != 4) throw std::invalid_argument("LatentTensor must be 4-D");
        if (data.dim(2) < 1 || data.dim(3) < 1)
            throw std::invalid_argument("LatentTensor needs height, width >= 1");
    }
};

}  // namespace ugcsr
