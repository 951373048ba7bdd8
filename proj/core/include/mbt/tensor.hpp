#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mbt {

// Dense row-major tensor. Rank 0 (scalar) through rank 4 (B,C,H,W for
// image tensors). Extents are always >= 1.
using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ']';
    return os.str();
}

inline std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (int e : s) n *= e;
    return n;
}

template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
        validate_shape();
        data_.assign(static_cast<std::size_t>(shape_numel(shape_)), fill);
    }

    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        validate_shape();
        if (static_cast<std::int64_t>(data_.size()) != shape_numel(shape_)) {
            throw std::invalid_argument("tensor: data size " + std::to_string(data_.size()) +
                                        " does not match shape " + shape_str(shape_));
        }
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, T v) { return Tensor(std::move(shape), v); }

    static Tensor scalar(T v) {
        Tensor t{Shape{}};
        t.data_[0] = v;
        return t;
    }

    template <typename Rng>
    static Tensor uniform(Shape shape, Rng& rng, T lo, T hi) {
        Tensor t(std::move(shape));
        std::uniform_real_distribution<T> dist(lo, hi);
        for (auto& v : t.data_) v = dist(rng);
        return t;
    }

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int extent(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
    bool is_scalar() const { return data_.size() == 1 && shape_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // rank-4 accessors (B,C,H,W)
    T& at(int b, int c, int y, int x) { return data_[static_cast<std::size_t>(index4(b, c, y, x))]; }
    const T& at(int b, int c, int y, int x) const {
        return data_[static_cast<std::size_t>(index4(b, c, y, x))];
    }
    std::int64_t index4(int b, int c, int y, int x) const {
        return ((static_cast<std::int64_t>(b) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x;
    }

    // rank-2 accessors
    T& at(int i, int j) { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
    const T& at(int i, int j) const { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }

    T value() const {
        if (data_.size() != 1) {
            throw std::logic_error("tensor: value() requires a single-element tensor, shape " +
                                   shape_str(shape_));
        }
        return data_[0];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.reshape_raw(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[static_cast<std::int64_t>(i)] = static_cast<U>(data_[i]);
        return out;
    }

    // used by cast(); not part of the public shape contract
    void reshape_raw(const Shape& s) {
        shape_ = s;
        data_.assign(static_cast<std::size_t>(shape_numel(s)), T(0));
    }

private:
    void validate_shape() const {
        if (shape_.size() > 4) {
            throw std::invalid_argument("tensor: rank " + std::to_string(shape_.size()) +
                                        " exceeds maximum rank 4");
        }
        for (int e : shape_) {
            if (e < 1) {
                throw std::invalid_argument("tensor: non-positive extent in shape " + shape_str(shape_));
            }
        }
    }

    Shape shape_;
    std::vector<T> data_;
};

}  // namespace mbt
