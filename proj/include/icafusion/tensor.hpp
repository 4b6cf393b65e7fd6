#ifndef ICAFUSION_TENSOR_HPP
#define ICAFUSION_TENSOR_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace icafusion {

/// Shape of a dense rank-4 array (n, c, h, w), row-major.
/// Activations use n == 1; convolution weights map (out, in, kh, kw).
struct Shape {
    int n = 1, c = 1, h = 1, w = 1;

    std::size_t size() const {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    bool operator==(const Shape&) const = default;

    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense rank-4 value array. Owns its storage; value semantics throughout.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape s) : shape_(s), data_(s.size(), T(0)) {
        if (s.n < 1 || s.c < 1 || s.h < 1 || s.w < 1)
            throw DimensionError("tensor dimensions must be positive, got " + s.str());
    }
    Tensor(int c, int h, int w) : Tensor(Shape{1, c, h, w}) {}

    const Shape& shape() const { return shape_; }
    int n() const { return shape_.n; }
    int c() const { return shape_.c; }
    int h() const { return shape_.h; }
    int w() const { return shape_.w; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
    const T& at(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }

    T& at(int c, int h, int w) { return data_[index(0, c, h, w)]; }
    const T& at(int c, int h, int w) const { return data_[index(0, c, h, w)]; }

    std::size_t index(int n, int c, int h, int w) const {
        return (((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h) + h) * shape_.w + w;
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
    void zero() { fill(T(0)); }

    bool all_finite() const {
        for (T v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

    auto begin() { return data_.begin(); }
    auto end() { return data_.end(); }
    auto begin() const { return data_.begin(); }
    auto end() const { return data_.end(); }

private:
    Shape shape_{0, 0, 0, 0};
    std::vector<T> data_;
};

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* where) {
    if (!(a.shape() == b.shape()))
        throw DimensionError(std::string(where) + ": shape mismatch " + a.shape().str() +
                             " vs " + b.shape().str());
}

}  // namespace icafusion

#endif
