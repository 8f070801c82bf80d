#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "covdet/errors.hpp"

namespace covdet {

// Dense (batch, channel, time) array, time axis contiguous.
template <class R>
struct Tensor3 {
    int b = 0, c = 0, n = 0;
    std::vector<R> v;

    Tensor3() = default;
    Tensor3(int b_, int c_, int n_) : b(b_), c(c_), n(n_), v(static_cast<std::size_t>(b_) * c_ * n_, R(0)) {}

    std::size_t size() const { return v.size(); }
    bool same_shape(const Tensor3& o) const { return b == o.b && c == o.c && n == o.n; }

    R* row(int bi, int ci) { return v.data() + (static_cast<std::size_t>(bi) * c + ci) * n; }
    const R* row(int bi, int ci) const { return v.data() + (static_cast<std::size_t>(bi) * c + ci) * n; }

    R& at(int bi, int ci, int t) { return row(bi, ci)[t]; }
    R at(int bi, int ci, int t) const { return row(bi, ci)[t]; }

    void fill(R value) { std::fill(v.begin(), v.end(), value); }

    std::string shape_str() const {
        return "(" + std::to_string(b) + "," + std::to_string(c) + "," + std::to_string(n) + ")";
    }

    template <class S>
    Tensor3<S> cast() const {
        Tensor3<S> out(b, c, n);
        for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<S>(v[i]);
        return out;
    }
};

// A batch tensor with an attached gradient slot.
template <class R>
struct BatchTensor {
    Tensor3<R> data;
    Tensor3<R> grad; // empty until ensure_grad()

    BatchTensor() = default;
    explicit BatchTensor(Tensor3<R> d) : data(std::move(d)) {}
    BatchTensor(int b, int c, int n) : data(b, c, n) {}

    bool has_grad() const { return grad.size() == data.size() && grad.b == data.b; }
    void ensure_grad() {
        if (!has_grad()) grad = Tensor3<R>(data.b, data.c, data.n);
    }
};

// Trainable tensor: value plus gradient and Adam state, all flat.
// `dims` carries the logical shape (e.g. conv weights are (c_out, c_in, k)).
template <class R>
struct ParamTensor {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<R> value;
    std::vector<R> grad;
    std::vector<R> m;
    std::vector<R> v;
    std::uint64_t step_count = 0;

    ParamTensor() = default;
    ParamTensor(std::string name_, std::vector<std::uint32_t> dims_) : name(std::move(name_)), dims(std::move(dims_)) {
        std::size_t total = 1;
        for (auto d : dims) total *= d;
        value.assign(total, R(0));
        grad.assign(total, R(0));
        m.assign(total, R(0));
        v.assign(total, R(0));
    }

    std::size_t size() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), R(0)); }

    template <class S>
    ParamTensor<S> cast() const {
        ParamTensor<S> out(name, dims);
        for (std::size_t i = 0; i < value.size(); ++i) out.value[i] = static_cast<S>(value[i]);
        for (std::size_t i = 0; i < grad.size(); ++i) out.grad[i] = static_cast<S>(grad[i]);
        for (std::size_t i = 0; i < m.size(); ++i) out.m[i] = static_cast<S>(m[i]);
        for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<S>(v[i]);
        out.step_count = step_count;
        return out;
    }
};

} // namespace covdet
