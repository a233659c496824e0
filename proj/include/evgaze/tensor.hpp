// Copyright (c) 2026 evgaze contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "evgaze/errors.hpp"

namespace evgaze {

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

/// Dense row-major multi-dimensional array. Plain value type; all autodiff
/// bookkeeping lives in Tape.
template <class T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), data(static_cast<std::size_t>(shape_numel(shape)), T(0)) {}
    Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
        if (static_cast<std::int64_t>(data.size()) != shape_numel(shape))
            throw ConfigError("tensor value count does not match shape " + shape_str(shape));
    }

    static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
    static Tensor full(Shape s, T v) {
        Tensor t(std::move(s));
        for (auto& x : t.data) x = v;
        return t;
    }
    static Tensor scalar(T v) { return full(Shape{1}, v); }

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(shape.size()); }

    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    // 4-D (N,C,H,W) accessor used by conv/pool paths.
    T& at4(int n, int c, int h, int w) {
        return data[static_cast<std::size_t>(((n * shape[1] + c) * static_cast<std::int64_t>(shape[2]) + h) * shape[3] + w)];
    }
    const T& at4(int n, int c, int h, int w) const {
        return data[static_cast<std::size_t>(((n * shape[1] + c) * static_cast<std::int64_t>(shape[2]) + h) * shape[3] + w)];
    }
    // 2-D (N,F) accessor.
    T& at2(int n, int f) { return data[static_cast<std::size_t>(n) * shape[1] + f]; }
    const T& at2(int n, int f) const { return data[static_cast<std::size_t>(n) * shape[1] + f]; }
};

template <class T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
    Tensor<T> r = a;
    for (std::size_t i = 0; i < r.data.size(); ++i) r.data[i] += b.data[i];
    return r;
}

template <class T>
void accumulate(Tensor<T>& into, const Tensor<T>& g) {
    if (into.data.empty()) {
        into = g;
        return;
    }
    for (std::size_t i = 0; i < into.data.size(); ++i) into.data[i] += g.data[i];
}

}  // namespace evgaze
