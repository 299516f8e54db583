#pragma once

#include "invabc/errors.hpp"

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace invabc::nn {

/// Dense 4-D array in NHWC order, doubles throughout. Rank-2 data
/// (batches of vectors) is stored as (N, 1, 1, C).
class Tensor {
public:
    Tensor() : dims_{0, 0, 0, 0} {}
    Tensor(std::size_t n, std::size_t h, std::size_t w, std::size_t c)
        : dims_{n, h, w, c}, data_(n * h * w * c, 0.0) {}

    static Tensor matrix(std::size_t n, std::size_t c) { return Tensor(n, 1, 1, c); }

    std::size_t n() const { return dims_[0]; }
    std::size_t h() const { return dims_[1]; }
    std::size_t w() const { return dims_[2]; }
    std::size_t c() const { return dims_[3]; }
    const std::array<std::size_t, 4>& dims() const { return dims_; }
    std::size_t size() const { return data_.size(); }
    std::size_t item_size() const { return dims_[1] * dims_[2] * dims_[3]; }

    double& at(std::size_t in, std::size_t ih, std::size_t iw, std::size_t ic) {
        return data_[((in * dims_[1] + ih) * dims_[2] + iw) * dims_[3] + ic];
    }
    double at(std::size_t in, std::size_t ih, std::size_t iw, std::size_t ic) const {
        return data_[((in * dims_[1] + ih) * dims_[2] + iw) * dims_[3] + ic];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    void fill(double v) { data_.assign(data_.size(), v); }

    bool same_shape(const Tensor& o) const { return dims_ == o.dims_; }

    std::string shape_str() const {
        return "(" + std::to_string(dims_[0]) + "," + std::to_string(dims_[1]) + "," +
               std::to_string(dims_[2]) + "," + std::to_string(dims_[3]) + ")";
    }

private:
    std::array<std::size_t, 4> dims_;
    std::vector<double> data_;
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(where) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

} // namespace invabc::nn
