/*
 * Copyright 2026 The GateNet Toolkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <new>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "gatenet/error.hpp"

namespace gatenet::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
    os << ']';
    return os.str();
}

/// Allocator whose no-argument construct leaves doubles uninitialized, so
/// buffers that are about to be overwritten skip the zero pass.
template <class T>
struct DefaultInitAllocator : std::allocator<T> {
    template <class U>
    struct rebind {
        using other = DefaultInitAllocator<U>;
    };
    using std::allocator<T>::allocator;

    template <class U>
    void construct(U* p) noexcept(std::is_nothrow_default_constructible_v<U>) {
        ::new (static_cast<void*>(p)) U;
    }
    template <class U, class... Args>
    void construct(U* p, Args&&... args) {
        ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
    }
};

using Storage = std::vector<double, DefaultInitAllocator<double>>;

/// Dense row-major tensor of doubles.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
        validate_shape();
        data_.assign(shape_size(shape_), fill);
    }

    Tensor(Shape shape, const std::vector<double>& data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
        validate_shape();
        if (shape_size(shape_) != data_.size())
            throw DimensionError("tensor of shape " + shape_string(shape_) + " cannot hold " +
                                 std::to_string(data_.size()) + " values");
    }

    /// Contents are unspecified until written.
    static Tensor uninitialized(Shape shape) {
        Tensor t;
        t.shape_ = std::move(shape);
        t.validate_shape();
        t.data_.resize(shape_size(t.shape_));
        return t;
    }

    /// Builds a matrix from nested rows; every row must have the same length.
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t n = rows.size();
        const std::size_t m = n ? rows.begin()->size() : 0;
        std::vector<double> data;
        data.reserve(n * m);
        for (const auto& row : rows) {
            if (row.size() != m) throw DimensionError("ragged matrix literal");
            data.insert(data.end(), row.begin(), row.end());
        }
        return Tensor({n, m}, std::move(data));
    }

    static Tensor vector(std::initializer_list<double> values) {
        return Tensor({values.size()}, std::vector<double>(values));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t axis) const {
        if (axis >= shape_.size())
            throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape_));
        return shape_[axis];
    }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    std::vector<double> to_vector() const { return {data_.begin(), data_.end()}; }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * shape_[1] + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * shape_[1] + c]; }

    std::span<double> row(std::size_t r) noexcept {
        const std::size_t w = data_.size() / shape_[0];
        return {data_.data() + r * w, w};
    }
    std::span<const double> row(std::size_t r) const noexcept {
        const std::size_t w = data_.size() / shape_[0];
        return {data_.data() + r * w, w};
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    /// Same data viewed under a different shape of equal size.
    Tensor reshaped(Shape shape) const {
        if (shape_size(shape) != data_.size())
            throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
        Tensor t(*this);
        t.shape_ = std::move(shape);
        return t;
    }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    void validate_shape() const {
        for (std::size_t d : shape_)
            if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape_));
    }

    Shape shape_;
    Storage data_;
};

/// Transposes a rank-2 tensor.
inline Tensor transpose(const Tensor& x) {
    if (x.rank() != 2) throw DimensionError("transpose expects rank 2, got " + shape_string(x.shape()));
    const std::size_t r = x.dim(0), c = x.dim(1);
    Tensor out({c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out(j, i) = x(i, j);
    return out;
}

/// A trainable tensor together with its accumulated gradient.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param() = default;
    Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

    void zero_grad() { grad.fill(0.0); }
};

}  // namespace gatenet::nn
