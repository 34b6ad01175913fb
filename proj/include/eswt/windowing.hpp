#pragma once

#include <stdexcept>
#include <string>

#include "eswt/tensor.hpp"

namespace eswt {

// Window geometry plus the cyclic-shift offsets used by shifted layers.
// The default shift is half the window in each direction.
struct WindowSpec {
    int h = 1, w = 1;
    int shift_y = 0, shift_x = 0;

    WindowSpec() = default;
    WindowSpec(int h_, int w_) : h(h_), w(w_), shift_y(h_ / 2), shift_x(w_ / 2) { validate(); }
    WindowSpec(int h_, int w_, int sy, int sx) : h(h_), w(w_), shift_y(sy), shift_x(sx) {
        validate();
    }

    void validate() const {
        if (h < 1 || w < 1) throw std::invalid_argument("WindowSpec: window dims must be >= 1");
        if (shift_y < 0 || shift_y >= h || shift_x < 0 || shift_x >= w)
            throw std::invalid_argument("WindowSpec: shift must satisfy 0 <= shift < window");
    }

    int pixels() const { return h * w; }
    WindowSpec transposed() const { return WindowSpec(w, h, shift_x, shift_y); }
    bool operator==(const WindowSpec& o) const {
        return h == o.h && w == o.w && shift_y == o.shift_y && shift_x == o.shift_x;
    }
    std::string str() const {
        return "(" + std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

struct PadRecord {
    int pad_h = 0, pad_w = 0;
    int orig_h = 0, orig_w = 0;
};

namespace detail {
// reflect-101 source index when possible, replicate when the pad reaches
// past the mirror range
inline int pad_src_index(int i, int dim, bool reflect) {
    if (i < dim) return i;
    if (reflect) return 2 * dim - 2 - i;
    return dim - 1;
}
}  // namespace detail

// Reflect-pads bottom/right so the spatial dims become multiples of (h, w).
// Falls back to replicate padding along an axis when the pad would be >= dim.
template <typename T>
Tensor<T> pad_to_multiple(const Tensor<T>& x, int h, int w, PadRecord* rec) {
    if (h < 1 || w < 1) throw std::invalid_argument("pad_to_multiple: window dims must be >= 1");
    const int ph = (h - x.h % h) % h;
    const int pw = (w - x.w % w) % w;
    if (rec) *rec = PadRecord{ph, pw, x.h, x.w};
    if (ph == 0 && pw == 0) return x;
    const bool ry = ph < x.h, rx = pw < x.w;
    Tensor<T> out(x.n, x.c, x.h + ph, x.w + pw);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            const T* xp = x.plane(in, ic);
            T* op = out.plane(in, ic);
            for (int y = 0; y < out.h; ++y) {
                const int sy = detail::pad_src_index(y, x.h, ry);
                for (int xx = 0; xx < out.w; ++xx)
                    op[y * out.w + xx] = xp[sy * x.w + detail::pad_src_index(xx, x.w, rx)];
            }
        }
    return out;
}

template <typename T>
Tensor<T> crop_pad(const Tensor<T>& x, const PadRecord& rec) {
    if (x.h != rec.orig_h + rec.pad_h || x.w != rec.orig_w + rec.pad_w)
        throw std::invalid_argument("crop_pad: tensor does not match pad record");
    if (rec.pad_h == 0 && rec.pad_w == 0) return x;
    Tensor<T> out(x.n, x.c, rec.orig_h, rec.orig_w);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            const T* xp = x.plane(in, ic);
            T* op = out.plane(in, ic);
            for (int y = 0; y < out.h; ++y)
                for (int xx = 0; xx < out.w; ++xx) op[y * out.w + xx] = xp[y * x.w + xx];
        }
    return out;
}

// Adjoint of pad_to_multiple: scatter-adds the cotangent back through the
// reflect/replicate index map.
template <typename T>
Tensor<T> pad_to_multiple_vjp(const Tensor<T>& gout, const PadRecord& rec) {
    Tensor<T> gx(gout.n, gout.c, rec.orig_h, rec.orig_w);
    const bool ry = rec.pad_h < rec.orig_h, rx = rec.pad_w < rec.orig_w;
    for (int in = 0; in < gout.n; ++in)
        for (int ic = 0; ic < gout.c; ++ic) {
            const T* gp = gout.plane(in, ic);
            T* op = gx.plane(in, ic);
            for (int y = 0; y < gout.h; ++y) {
                const int sy = detail::pad_src_index(y, rec.orig_h, ry);
                for (int xx = 0; xx < gout.w; ++xx)
                    op[sy * rec.orig_w + detail::pad_src_index(xx, rec.orig_w, rx)] +=
                        gp[y * gout.w + xx];
            }
        }
    return gx;
}

// Window partition of a (n, c, H, W) map into (n*num_windows, c, h, w), with
// windows enumerated batch-major, then row-major over the window grid.
template <typename T>
struct WindowedTensor {
    Tensor<T> windows;
    int orig_n = 0, orig_c = 0;
    int H = 0, W = 0;  // padded map dims the windows tile
    WindowSpec spec;
};

template <typename T>
WindowedTensor<T> partition(const Tensor<T>& x, const WindowSpec& spec) {
    if (x.h % spec.h != 0 || x.w % spec.w != 0)
        throw std::invalid_argument("partition: map " + std::to_string(x.h) + "x" +
                                    std::to_string(x.w) + " not divisible by window " + spec.str());
    const int gy = x.h / spec.h, gx = x.w / spec.w;
    WindowedTensor<T> wt;
    wt.orig_n = x.n;
    wt.orig_c = x.c;
    wt.H = x.h;
    wt.W = x.w;
    wt.spec = spec;
    wt.windows = Tensor<T>(x.n * gy * gx, x.c, spec.h, spec.w);
    for (int in = 0; in < x.n; ++in)
        for (int wy = 0; wy < gy; ++wy)
            for (int wx = 0; wx < gx; ++wx) {
                const int m = (in * gy + wy) * gx + wx;
                for (int ic = 0; ic < x.c; ++ic) {
                    const T* xp = x.plane(in, ic);
                    T* op = wt.windows.plane(m, ic);
                    for (int y = 0; y < spec.h; ++y)
                        for (int xx = 0; xx < spec.w; ++xx)
                            op[y * spec.w + xx] = xp[(wy * spec.h + y) * x.w + wx * spec.w + xx];
                }
            }
    return wt;
}

template <typename T>
Tensor<T> reverse(const WindowedTensor<T>& wt) {
    const WindowSpec& spec = wt.spec;
    const int gy = wt.H / spec.h, gx = wt.W / spec.w;
    if (wt.windows.n != wt.orig_n * gy * gx || wt.windows.c != wt.orig_c ||
        wt.windows.h != spec.h || wt.windows.w != spec.w)
        throw std::invalid_argument("reverse: inconsistent windowed tensor metadata");
    Tensor<T> out(wt.orig_n, wt.orig_c, wt.H, wt.W);
    for (int in = 0; in < wt.orig_n; ++in)
        for (int wy = 0; wy < gy; ++wy)
            for (int wx = 0; wx < gx; ++wx) {
                const int m = (in * gy + wy) * gx + wx;
                for (int ic = 0; ic < wt.orig_c; ++ic) {
                    const T* xp = wt.windows.plane(m, ic);
                    T* op = out.plane(in, ic);
                    for (int y = 0; y < spec.h; ++y)
                        for (int xx = 0; xx < spec.w; ++xx)
                            op[(wy * spec.h + y) * wt.W + wx * spec.w + xx] = xp[y * spec.w + xx];
                }
            }
    return out;
}

// Torus roll by (-dy, -dx): out(y, x) = in((y+dy) mod H, (x+dx) mod W).
template <typename T>
Tensor<T> cyclic_shift(const Tensor<T>& x, int dy, int dx) {
    if (x.h == 0 || x.w == 0) return x;
    dy = ((dy % x.h) + x.h) % x.h;
    dx = ((dx % x.w) + x.w) % x.w;
    if (dy == 0 && dx == 0) return x;
    Tensor<T> out(x.n, x.c, x.h, x.w);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            const T* xp = x.plane(in, ic);
            T* op = out.plane(in, ic);
            for (int y = 0; y < x.h; ++y) {
                const int sy = (y + dy) % x.h;
                for (int xx = 0; xx < x.w; ++xx) op[y * x.w + xx] = xp[sy * x.w + (xx + dx) % x.w];
            }
        }
    return out;
}

template <typename T>
Tensor<T> inverse_shift(const Tensor<T>& x, int dy, int dx) {
    return cyclic_shift(x, -dy, -dx);
}

}  // namespace eswt
