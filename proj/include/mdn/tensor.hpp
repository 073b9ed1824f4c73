#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mdn/errors.hpp"

namespace mdn {

namespace detail {

/// std::allocator that default-initializes on construct(), so vector(n) does
/// not zero-fill buffers that are about to be overwritten anyway.
template <typename T, typename Base = std::allocator<T>>
struct default_init_allocator : Base {
    template <typename U>
    struct rebind {
        using other = default_init_allocator<U, typename std::allocator_traits<
                                                    Base>::template rebind_alloc<U>>;
    };
    using Base::Base;

    template <typename U>
    void construct(U* ptr) noexcept(
        std::is_nothrow_default_constructible_v<U>) {
        ::new (static_cast<void*>(ptr)) U;
    }
    template <typename U, typename... Args>
    void construct(U* ptr, Args&&... args) {
        std::allocator_traits<Base>::construct(static_cast<Base&>(*this), ptr,
                                               std::forward<Args>(args)...);
    }
};

}  // namespace detail

struct TensorShape {
    int n = 0;  // batch
    int c = 0;  // channels
    int h = 0;  // rows
    int w = 0;  // columns

    bool operator==(const TensorShape&) const = default;

    std::size_t count() const {
        return static_cast<std::size_t>(n) * c * h * w;
    }

    std::string str() const {
        return msg(n, "x", c, "x", h, "x", w);
    }
};

/// Dense rank-4 array in row-major (batch, channel, row, column) order.
/// This is the unit of all network computation; float is the working
/// precision, double instantiations back the gradient-check harness.
template <typename T = float>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(TensorShape shape, T fill = T(0)) : shape_(shape) {
        data_.resize(shape.count());
        this->fill(fill);
    }

    Tensor(int n, int c, int h, int w, T fill = T(0))
        : Tensor(TensorShape{n, c, h, w}, fill) {}

    /// Allocation without the zero-fill, for buffers written in full.
    static Tensor uninitialized(TensorShape shape) {
        Tensor t;
        t.shape_ = shape;
        t.data_.resize(shape.count());
        return t;
    }

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const TensorShape& shape() const { return shape_; }
    int n() const { return shape_.n; }
    int c() const { return shape_.c; }
    int h() const { return shape_.h; }
    int w() const { return shape_.w; }
    std::size_t size() const { return data_.size(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
    const T& at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

    /// Start of the (n, c) image plane.
    T* plane(int n, int c) { return data_.data() + index(n, c, 0, 0); }
    const T* plane(int n, int c) const { return data_.data() + index(n, c, 0, 0); }

    std::size_t plane_size() const {
        return static_cast<std::size_t>(shape_.h) * shape_.w;
    }

    /// Elements of one batch entry (all channels).
    std::size_t sample_size() const { return plane_size() * shape_.c; }

    void fill(T value) { data_.assign(data_.size(), value); }

    bool all_finite() const {
        for (const T& v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    template <typename Rng>
    void fill_normal(Rng& rng, T stddev) {
        std::normal_distribution<T> dist(T(0), stddev);
        for (T& v : data_) v = dist(rng);
    }

    template <typename Rng>
    void fill_uniform(Rng& rng, T lo, T hi) {
        std::uniform_real_distribution<T> dist(lo, hi);
        for (T& v : data_) v = dist(rng);
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i)
            out[i] = static_cast<U>(data_[i]);
        return out;
    }

private:
    std::size_t index(int n, int c, int y, int x) const {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) *
                   shape_.w +
               x;
    }

    TensorShape shape_;
    std::vector<T, detail::default_init_allocator<T>> data_;
};

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (!(a.shape() == b.shape())) {
        throw ShapeError(msg(op, ": shape mismatch, ", a.shape().str(), " vs ",
                             b.shape().str()));
    }
}

}  // namespace mdn
