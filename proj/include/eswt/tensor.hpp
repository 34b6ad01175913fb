#pragma once

#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "eswt/rng.hpp"

namespace eswt {

// Counts multiply-accumulates reported by the compute kernels. Convs and the
// attention matmuls register their nominal MAC counts here when enabled;
// everything else (BN, activations, residual adds) counts as zero, matching
// the convention of the analytic profiler.
struct MacCounter {
    struct State {
        bool on = false;
        std::uint64_t macs = 0;
    };
    static State& state() {
        thread_local State s;
        return s;
    }
    static void enable() {
        state().on = true;
        state().macs = 0;
    }
    static std::uint64_t disable() {
        state().on = false;
        return state().macs;
    }
    static void add(std::uint64_t macs) {
        State& s = state();
        if (s.on) s.macs += macs;
    }
    static std::uint64_t count() { return state().macs; }
};

// Tracks live tensor bytes so the profiler can report the allocation peak of
// a forward pass.
struct AllocTracker {
    struct State {
        bool on = false;
        std::int64_t current = 0;
        std::int64_t peak = 0;
    };
    static State& state() {
        thread_local State s;
        return s;
    }
    static void enable() { state() = State{true, 0, 0}; }
    static std::int64_t disable() {
        state().on = false;
        return state().peak;
    }
    static void add(std::int64_t bytes) {
        State& s = state();
        if (!s.on) return;
        s.current += bytes;
        if (s.current > s.peak) s.peak = s.current;
    }
    static void sub(std::int64_t bytes) {
        State& s = state();
        if (s.on) s.current -= bytes;
    }
};

// Dense rank-4 array in (batch, channel, row, col) order, row-major.
template <typename T>
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, T(0)) {
        if (n_ < 0 || c_ < 0 || h_ < 0 || w_ < 0)
            throw std::invalid_argument("Tensor: negative dimension");
        AllocTracker::add(bytes());
    }
    Tensor(const Tensor& o) : n(o.n), c(o.c), h(o.h), w(o.w), data(o.data) {
        AllocTracker::add(bytes());
    }
    Tensor(Tensor&& o) noexcept : n(o.n), c(o.c), h(o.h), w(o.w), data(std::move(o.data)) {
        o.n = o.c = o.h = o.w = 0;
        o.data.clear();
    }
    Tensor& operator=(const Tensor& o) {
        if (this != &o) {
            AllocTracker::sub(bytes());
            n = o.n; c = o.c; h = o.h; w = o.w;
            data = o.data;
            AllocTracker::add(bytes());
        }
        return *this;
    }
    Tensor& operator=(Tensor&& o) noexcept {
        if (this != &o) {
            AllocTracker::sub(bytes());
            n = o.n; c = o.c; h = o.h; w = o.w;
            data = std::move(o.data);
            o.n = o.c = o.h = o.w = 0;
            o.data.clear();
        }
        return *this;
    }
    ~Tensor() { AllocTracker::sub(bytes()); }

    std::int64_t bytes() const { return static_cast<std::int64_t>(data.size() * sizeof(T)); }

    std::size_t numel() const { return data.size(); }

    T& at(int in, int ic, int iy, int ix) {
        return data[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
    }
    const T& at(int in, int ic, int iy, int ix) const {
        return data[((static_cast<std::size_t>(in) * c + ic) * h + iy) * w + ix];
    }

    T* plane(int in, int ic) { return data.data() + (static_cast<std::size_t>(in) * c + ic) * h * w; }
    const T* plane(int in, int ic) const {
        return data.data() + (static_cast<std::size_t>(in) * c + ic) * h * w;
    }

    bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

    std::string shape_str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    Tensor& operator+=(const Tensor& o) {
        require_same_shape(o, "operator+=");
        for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
        return *this;
    }

    void require_same_shape(const Tensor& o, const char* what) const {
        if (!same_shape(o))
            throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_str() +
                                        " vs " + o.shape_str());
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(n, c, h, w);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

template <typename T>
Tensor<T> operator+(Tensor<T> a, const Tensor<T>& b) {
    a += b;
    return a;
}

template <typename T>
Tensor<T> random_uniform(int n, int c, int h, int w, Rng& rng, T lo = T(-1), T hi = T(1)) {
    Tensor<T> t(n, c, h, w);
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
    return t;
}

// Learnable tensor plus its gradient accumulator and Adam moments.
template <typename T>
struct Param {
    Tensor<T> value;
    Tensor<T> grad;
    Tensor<T> m;
    Tensor<T> v;

    Param() = default;
    explicit Param(Tensor<T> val) : value(std::move(val)) { reset_state(); }

    void reset_state() {
        grad = Tensor<T>(value.n, value.c, value.h, value.w);
        m = Tensor<T>(value.n, value.c, value.h, value.w);
        v = Tensor<T>(value.n, value.c, value.h, value.w);
    }
    void zero_grad() { grad.fill(T(0)); }
    std::size_t numel() const { return value.numel(); }
};

}  // namespace eswt
