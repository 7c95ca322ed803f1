#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "rtar/errors.hpp"

namespace rtar {

/// Dense row-major float tensor of rank 1..4. Feature maps follow the
/// [frames T, channels C, height H, width W] convention; a single image is T=1.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::int64_t> shape, float fill = 0.0f)
        : shape_(std::move(shape)) {
        validate_shape();
        data_.assign(static_cast<std::size_t>(numel()), fill);
    }

    Tensor(std::vector<std::int64_t> shape, std::vector<float> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        validate_shape();
        if (static_cast<std::int64_t>(data_.size()) != numel())
            throw ShapeMismatch("data length " + std::to_string(data_.size()) +
                                " does not match shape product " + std::to_string(numel()));
    }

    const std::vector<std::int64_t>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }

    std::int64_t numel() const {
        return std::accumulate(shape_.begin(), shape_.end(), std::int64_t{1},
                               std::multiplies<>());
    }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::vector<float>& vec() { return data_; }
    const std::vector<float>& vec() const { return data_; }

    float& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    float operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // rank-4 accessor, [T,C,H,W]
    float& at4(std::int64_t t, std::int64_t c, std::int64_t y, std::int64_t x) {
        return data_[static_cast<std::size_t>(((t * shape_[1] + c) * shape_[2] + y) * shape_[3] + x)];
    }
    float at4(std::int64_t t, std::int64_t c, std::int64_t y, std::int64_t x) const {
        return data_[static_cast<std::size_t>(((t * shape_[1] + c) * shape_[2] + y) * shape_[3] + x)];
    }

    // rank-2 accessor, [T,C]
    float& at2(std::int64_t t, std::int64_t c) {
        return data_[static_cast<std::size_t>(t * shape_[1] + c)];
    }
    float at2(std::int64_t t, std::int64_t c) const {
        return data_[static_cast<std::size_t>(t * shape_[1] + c)];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + "]";
    }

private:
    void validate_shape() const {
        if (shape_.empty() || shape_.size() > 4)
            throw ShapeMismatch("rank must be 1..4, got " + std::to_string(shape_.size()));
        for (auto e : shape_)
            if (e <= 0) throw ShapeMismatch("non-positive extent " + std::to_string(e));
    }

    std::vector<std::int64_t> shape_;
    std::vector<float> data_;
};

}  // namespace rtar
