#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "eswt/tensor.hpp"

// Differentiable primitives. Each forward op has a matching *_vjp that maps a
// cotangent on the output to cotangents on the inputs; the pairs are what the
// finite-difference harness in gradcheck.hpp validates.

namespace eswt {

// ---------------------------------------------------------------------------
// conv2d: kernels 1x1 and 3x3, stride 1, zero padding (k-1)/2
// ---------------------------------------------------------------------------

template <typename T>
void check_conv_args(const Tensor<T>& x, const Tensor<T>& w, const std::vector<T>& b) {
    if (w.h != w.w || (w.h != 1 && w.h != 3))
        throw std::invalid_argument("conv2d: unsupported kernel size " + std::to_string(w.h));
    if (x.c != w.c)
        throw std::invalid_argument("conv2d: channel mismatch, input has " + std::to_string(x.c) +
                                    ", weight expects " + std::to_string(w.c));
    if (static_cast<int>(b.size()) != w.n)
        throw std::invalid_argument("conv2d: bias length " + std::to_string(b.size()) +
                                    " != c_out " + std::to_string(w.n));
}

// weight layout: (c_out, c_in, k, k)
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const std::vector<T>& b) {
    check_conv_args(x, w, b);
    const int k = w.h, p = (k - 1) / 2;
    const int co = w.n, ci = w.c, H = x.h, W = x.w;
    Tensor<T> out(x.n, co, H, W);
    MacCounter::add(static_cast<std::uint64_t>(co) * ci * k * k * x.n * H * W);
    for (int in = 0; in < x.n; ++in) {
        for (int oc = 0; oc < co; ++oc) {
            T* op = out.plane(in, oc);
            const T bias = b[oc];
            for (int i = 0; i < H * W; ++i) op[i] = bias;
            for (int ic = 0; ic < ci; ++ic) {
                const T* xp = x.plane(in, ic);
                for (int dy = 0; dy < k; ++dy) {
                    for (int dx = 0; dx < k; ++dx) {
                        const T wv = w.at(oc, ic, dy, dx);
                        if (wv == T(0)) continue;
                        const int sy = dy - p, sx = dx - p;
                        const int y0 = std::max(0, -sy), y1 = std::min(H, H - sy);
                        const int x0 = std::max(0, -sx), x1 = std::min(W, W - sx);
                        for (int y = y0; y < y1; ++y) {
                            T* orow = op + y * W;
                            const T* xrow = xp + (y + sy) * W + sx;
                            for (int xx = x0; xx < x1; ++xx) orow[xx] += wv * xrow[xx];
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
void conv2d_vjp(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gout, Tensor<T>* gx,
                Tensor<T>* gw, std::vector<T>* gb) {
    const int k = w.h, p = (k - 1) / 2;
    const int co = w.n, ci = w.c, H = x.h, W = x.w;
    if (gout.n != x.n || gout.c != co || gout.h != H || gout.w != W)
        throw std::invalid_argument("conv2d_vjp: cotangent shape mismatch");
    for (int in = 0; in < x.n; ++in) {
        for (int oc = 0; oc < co; ++oc) {
            const T* gp = gout.plane(in, oc);
            if (gb) {
                T s = T(0);
                for (int i = 0; i < H * W; ++i) s += gp[i];
                (*gb)[oc] += s;
            }
            for (int ic = 0; ic < ci; ++ic) {
                const T* xp = x.plane(in, ic);
                T* gxp = gx ? gx->plane(in, ic) : nullptr;
                for (int dy = 0; dy < k; ++dy) {
                    for (int dx = 0; dx < k; ++dx) {
                        const int sy = dy - p, sx = dx - p;
                        const int y0 = std::max(0, -sy), y1 = std::min(H, H - sy);
                        const int x0 = std::max(0, -sx), x1 = std::min(W, W - sx);
                        const T wv = w.at(oc, ic, dy, dx);
                        T acc = T(0);
                        for (int y = y0; y < y1; ++y) {
                            const T* grow = gp + y * W;
                            const T* xrow = xp + (y + sy) * W + sx;
                            T* gxrow = gxp ? gxp + (y + sy) * W + sx : nullptr;
                            for (int xx = x0; xx < x1; ++xx) {
                                acc += grow[xx] * xrow[xx];
                                if (gxrow) gxrow[xx] += wv * grow[xx];
                            }
                        }
                        if (gw) gw->at(oc, ic, dy, dx) += acc;
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// batch normalization over (n, h, w) per channel
// ---------------------------------------------------------------------------

enum class Mode { train, infer };

template <typename T>
struct BnCache {
    Tensor<T> x_hat;
    std::vector<T> inv_std;  // per channel
};

// Train mode normalizes with batch statistics (biased variance) and updates
// the running stats in place: run = momentum*run + (1-momentum)*batch.
template <typename T>
Tensor<T> batchnorm(const Tensor<T>& x, const std::vector<T>& gamma, const std::vector<T>& beta,
                    std::vector<T>& run_mean, std::vector<T>& run_var, T eps, T momentum, Mode mode,
                    BnCache<T>* cache = nullptr) {
    if (static_cast<int>(gamma.size()) != x.c || static_cast<int>(beta.size()) != x.c ||
        static_cast<int>(run_mean.size()) != x.c || static_cast<int>(run_var.size()) != x.c)
        throw std::invalid_argument("batchnorm: per-channel parameter length != channels");
    if (!(eps > T(0))) throw std::invalid_argument("batchnorm: eps must be > 0");
    Tensor<T> out(x.n, x.c, x.h, x.w);
    const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
    const std::size_t count = static_cast<std::size_t>(x.n) * plane;
    if (cache) {
        cache->x_hat = Tensor<T>(x.n, x.c, x.h, x.w);
        cache->inv_std.assign(x.c, T(0));
    }
    for (int ic = 0; ic < x.c; ++ic) {
        T mean, var;
        if (mode == Mode::train) {
            double s = 0;
            for (int in = 0; in < x.n; ++in) {
                const T* xp = x.plane(in, ic);
                for (std::size_t i = 0; i < plane; ++i) s += xp[i];
            }
            mean = static_cast<T>(s / static_cast<double>(count));
            double v = 0;
            for (int in = 0; in < x.n; ++in) {
                const T* xp = x.plane(in, ic);
                for (std::size_t i = 0; i < plane; ++i) {
                    const double d = xp[i] - mean;
                    v += d * d;
                }
            }
            var = static_cast<T>(v / static_cast<double>(count));
            run_mean[ic] = momentum * run_mean[ic] + (T(1) - momentum) * mean;
            run_var[ic] = momentum * run_var[ic] + (T(1) - momentum) * var;
        } else {
            mean = run_mean[ic];
            var = run_var[ic];
        }
        if (var + eps <= T(0)) throw std::runtime_error("batchnorm: variance + eps <= 0");
        const T inv_std = T(1) / std::sqrt(var + eps);
        if (cache) cache->inv_std[ic] = inv_std;
        for (int in = 0; in < x.n; ++in) {
            const T* xp = x.plane(in, ic);
            T* op = out.plane(in, ic);
            T* hp = cache ? cache->x_hat.plane(in, ic) : nullptr;
            for (std::size_t i = 0; i < plane; ++i) {
                const T xh = (xp[i] - mean) * inv_std;
                if (hp) hp[i] = xh;
                op[i] = gamma[ic] * xh + beta[ic];
            }
        }
    }
    return out;
}

// Train-mode backward through the batch statistics.
template <typename T>
void batchnorm_vjp(const BnCache<T>& cache, const std::vector<T>& gamma, const Tensor<T>& gout,
                   Tensor<T>* gx, std::vector<T>* ggamma, std::vector<T>* gbeta) {
    const Tensor<T>& xh = cache.x_hat;
    const std::size_t plane = static_cast<std::size_t>(xh.h) * xh.w;
    const double count = static_cast<double>(static_cast<std::size_t>(xh.n) * plane);
    for (int ic = 0; ic < xh.c; ++ic) {
        double sum_g = 0, sum_gxh = 0;
        for (int in = 0; in < xh.n; ++in) {
            const T* gp = gout.plane(in, ic);
            const T* hp = xh.plane(in, ic);
            for (std::size_t i = 0; i < plane; ++i) {
                sum_g += gp[i];
                sum_gxh += gp[i] * hp[i];
            }
        }
        if (gbeta) (*gbeta)[ic] += static_cast<T>(sum_g);
        if (ggamma) (*ggamma)[ic] += static_cast<T>(sum_gxh);
        if (gx) {
            const T mean_g = static_cast<T>(sum_g / count);
            const T mean_gxh = static_cast<T>(sum_gxh / count);
            const T scale = gamma[ic] * cache.inv_std[ic];
            for (int in = 0; in < xh.n; ++in) {
                const T* gp = gout.plane(in, ic);
                const T* hp = xh.plane(in, ic);
                T* gxp = gx->plane(in, ic);
                for (std::size_t i = 0; i < plane; ++i)
                    gxp[i] += scale * (gp[i] - mean_g - hp[i] * mean_gxh);
            }
        }
    }
}

// Infer-mode batch norm folded into the preceding convolution:
//   w'[oc] = gamma/sqrt(var+eps) * w[oc],  b' = gamma*(b-mean)/sqrt(var+eps) + beta
template <typename T>
void fold_bn(Tensor<T>& weight, std::vector<T>& bias, const std::vector<T>& gamma,
             const std::vector<T>& beta, const std::vector<T>& run_mean,
             const std::vector<T>& run_var, T eps) {
    if (static_cast<int>(gamma.size()) != weight.n)
        throw std::invalid_argument("fold_bn: channel mismatch");
    const std::size_t per_out = weight.numel() / weight.n;
    for (int oc = 0; oc < weight.n; ++oc) {
        const T denom = run_var[oc] + eps;
        if (denom <= T(0)) throw std::runtime_error("fold_bn: variance + eps <= 0");
        const T scale = gamma[oc] / std::sqrt(denom);
        T* wp = weight.data.data() + static_cast<std::size_t>(oc) * per_out;
        for (std::size_t i = 0; i < per_out; ++i) wp[i] *= scale;
        bias[oc] = scale * (bias[oc] - run_mean[oc]) + beta[oc];
    }
}

// ---------------------------------------------------------------------------
// softmax over the last axis, with max subtraction
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& x) {
    Tensor<T> out(x.n, x.c, x.h, x.w);
    const std::size_t rows = x.numel() / x.w;
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xp = x.data.data() + r * x.w;
        T* op = out.data.data() + r * x.w;
        T mx = xp[0];
        for (int i = 1; i < x.w; ++i) mx = std::max(mx, xp[i]);
        T s = T(0);
        for (int i = 0; i < x.w; ++i) {
            op[i] = std::exp(xp[i] - mx);
            s += op[i];
        }
        const T inv = T(1) / s;
        for (int i = 0; i < x.w; ++i) op[i] *= inv;
    }
    return out;
}

template <typename T>
void softmax_lastdim_vjp(const Tensor<T>& y, const Tensor<T>& gout, Tensor<T>* gx) {
    const std::size_t rows = y.numel() / y.w;
    for (std::size_t r = 0; r < rows; ++r) {
        const T* yp = y.data.data() + r * y.w;
        const T* gp = gout.data.data() + r * y.w;
        T* gxp = gx->data.data() + r * y.w;
        T dot = T(0);
        for (int i = 0; i < y.w; ++i) dot += gp[i] * yp[i];
        for (int i = 0; i < y.w; ++i) gxp[i] += yp[i] * (gp[i] - dot);
    }
}

// ---------------------------------------------------------------------------
// swish activation x * sigmoid(x)
// ---------------------------------------------------------------------------

template <typename T>
T sigmoid(T x) {
    return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

template <typename T>
Tensor<T> swish(const Tensor<T>& x) {
    Tensor<T> out(x.n, x.c, x.h, x.w);
    for (std::size_t i = 0; i < x.numel(); ++i) out.data[i] = x.data[i] * sigmoid(x.data[i]);
    return out;
}

template <typename T>
void swish_vjp(const Tensor<T>& x, const Tensor<T>& gout, Tensor<T>* gx) {
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const T s = sigmoid(x.data[i]);
        gx->data[i] += gout.data[i] * (s + x.data[i] * s * (T(1) - s));
    }
}

// ---------------------------------------------------------------------------
// pixel shuffle: (n, c*s^2, h, w) -> (n, c, h*s, w*s)
// channel index decomposes as c*s^2 + dy*s + dx
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int s) {
    if (s < 1) throw std::invalid_argument("pixel_shuffle: scale must be >= 1");
    if (x.c % (s * s) != 0)
        throw std::invalid_argument("pixel_shuffle: channels " + std::to_string(x.c) +
                                    " not divisible by s^2 = " + std::to_string(s * s));
    const int oc = x.c / (s * s);
    Tensor<T> out(x.n, oc, x.h * s, x.w * s);
    for (int in = 0; in < x.n; ++in)
        for (int c0 = 0; c0 < oc; ++c0)
            for (int dy = 0; dy < s; ++dy)
                for (int dx = 0; dx < s; ++dx) {
                    const T* xp = x.plane(in, c0 * s * s + dy * s + dx);
                    for (int y = 0; y < x.h; ++y)
                        for (int xx = 0; xx < x.w; ++xx)
                            out.at(in, c0, y * s + dy, xx * s + dx) = xp[y * x.w + xx];
                }
    return out;
}

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, int s) {
    if (s < 1) throw std::invalid_argument("pixel_unshuffle: scale must be >= 1");
    if (x.h % s != 0 || x.w % s != 0)
        throw std::invalid_argument("pixel_unshuffle: spatial dims not divisible by s");
    Tensor<T> out(x.n, x.c * s * s, x.h / s, x.w / s);
    for (int in = 0; in < x.n; ++in)
        for (int c0 = 0; c0 < x.c; ++c0)
            for (int dy = 0; dy < s; ++dy)
                for (int dx = 0; dx < s; ++dx) {
                    T* op = out.plane(in, c0 * s * s + dy * s + dx);
                    for (int y = 0; y < out.h; ++y)
                        for (int xx = 0; xx < out.w; ++xx)
                            op[y * out.w + xx] = x.at(in, c0, y * s + dy, xx * s + dx);
                }
    return out;
}

template <typename T>
void pixel_shuffle_vjp(const Tensor<T>& gout, int s, Tensor<T>* gx) {
    Tensor<T> g = pixel_unshuffle(gout, s);
    *gx += g;
}

// ---------------------------------------------------------------------------
// 5-way spatial shift + 1x1 convolution (the MLP's "shift conv")
// ---------------------------------------------------------------------------

// Channel groups in order: up, down, left, right, none. When the channel
// count is not a multiple of 5 the remainder stays in the unshifted group;
// fewer than 5 channels cannot be grouped at all.
inline std::vector<int> shift_group_sizes(int c) {
    if (c < 5)
        throw std::invalid_argument("shift_conv: needs at least 5 channels, got " + std::to_string(c));
    const int base = c / 5;
    std::vector<int> sizes(5, base);
    sizes[4] += c % 5;
    return sizes;
}

namespace detail {
// dir: 0 up, 1 down, 2 left, 3 right, 4 none
template <typename T>
void shift_plane(const T* src, T* dst, int H, int W, int dir) {
    switch (dir) {
        case 0:
            for (int y = 0; y + 1 < H; ++y)
                for (int x = 0; x < W; ++x) dst[y * W + x] = src[(y + 1) * W + x];
            for (int x = 0; x < W; ++x) dst[(H - 1) * W + x] = T(0);
            break;
        case 1:
            for (int y = H - 1; y >= 1; --y)
                for (int x = 0; x < W; ++x) dst[y * W + x] = src[(y - 1) * W + x];
            for (int x = 0; x < W; ++x) dst[x] = T(0);
            break;
        case 2:
            for (int y = 0; y < H; ++y) {
                for (int x = 0; x + 1 < W; ++x) dst[y * W + x] = src[y * W + x + 1];
                dst[y * W + W - 1] = T(0);
            }
            break;
        case 3:
            for (int y = 0; y < H; ++y) {
                for (int x = W - 1; x >= 1; --x) dst[y * W + x] = src[y * W + x - 1];
                dst[y * W] = T(0);
            }
            break;
        default:
            for (int i = 0; i < H * W; ++i) dst[i] = src[i];
    }
}
}  // namespace detail

template <typename T>
Tensor<T> shift5(const Tensor<T>& x) {
    const std::vector<int> sizes = shift_group_sizes(x.c);
    Tensor<T> out(x.n, x.c, x.h, x.w);
    for (int in = 0; in < x.n; ++in) {
        int ch = 0;
        for (int g = 0; g < 5; ++g)
            for (int i = 0; i < sizes[g]; ++i, ++ch)
                detail::shift_plane(x.plane(in, ch), out.plane(in, ch), x.h, x.w, g);
    }
    return out;
}

// Transpose of shift5: each direction maps to its opposite.
template <typename T>
Tensor<T> shift5_transpose(const Tensor<T>& g) {
    static const int opposite[5] = {1, 0, 3, 2, 4};
    const std::vector<int> sizes = shift_group_sizes(g.c);
    Tensor<T> out(g.n, g.c, g.h, g.w);
    for (int in = 0; in < g.n; ++in) {
        int ch = 0;
        for (int gi = 0; gi < 5; ++gi)
            for (int i = 0; i < sizes[gi]; ++i, ++ch)
                detail::shift_plane(g.plane(in, ch), out.plane(in, ch), g.h, g.w, opposite[gi]);
    }
    return out;
}

template <typename T>
Tensor<T> shift_conv(const Tensor<T>& x, const Tensor<T>& w, const std::vector<T>& b) {
    if (w.h != 1 || w.w != 1) throw std::invalid_argument("shift_conv: weight must be 1x1");
    return conv2d(shift5(x), w, b);
}

template <typename T>
void shift_conv_vjp(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gout, Tensor<T>* gx,
                    Tensor<T>* gw, std::vector<T>* gb) {
    Tensor<T> xs = shift5(x);
    if (gx) {
        Tensor<T> gxs(x.n, x.c, x.h, x.w);
        conv2d_vjp(xs, w, gout, &gxs, gw, gb);
        *gx += shift5_transpose(gxs);
    } else {
        conv2d_vjp(xs, w, gout, static_cast<Tensor<T>*>(nullptr), gw, gb);
    }
}

// ---------------------------------------------------------------------------
// batched matrix products; matrices live in the (h, w) dims, batch in n
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.n != b.n || a.c != 1 || b.c != 1 || a.w != b.h)
        throw std::invalid_argument("matmul: dimension mismatch " + a.shape_str() + " x " +
                                    b.shape_str());
    Tensor<T> out(a.n, 1, a.h, b.w);
    MacCounter::add(static_cast<std::uint64_t>(a.n) * a.h * a.w * b.w);
    for (int in = 0; in < a.n; ++in) {
        const T* ap = a.plane(in, 0);
        const T* bp = b.plane(in, 0);
        T* op = out.plane(in, 0);
        for (int i = 0; i < a.h; ++i) {
            for (int kk = 0; kk < a.w; ++kk) {
                const T av = ap[i * a.w + kk];
                if (av == T(0)) continue;
                const T* brow = bp + kk * b.w;
                T* orow = op + i * b.w;
                for (int j = 0; j < b.w; ++j) orow[j] += av * brow[j];
            }
        }
    }
    return out;
}

// a * b^T
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.n != b.n || a.c != 1 || b.c != 1 || a.w != b.w)
        throw std::invalid_argument("matmul_nt: dimension mismatch " + a.shape_str() + " x " +
                                    b.shape_str() + "^T");
    Tensor<T> out(a.n, 1, a.h, b.h);
    MacCounter::add(static_cast<std::uint64_t>(a.n) * a.h * a.w * b.h);
    for (int in = 0; in < a.n; ++in) {
        const T* ap = a.plane(in, 0);
        const T* bp = b.plane(in, 0);
        T* op = out.plane(in, 0);
        for (int i = 0; i < a.h; ++i)
            for (int j = 0; j < b.h; ++j) {
                T s = T(0);
                const T* ar = ap + i * a.w;
                const T* br = bp + j * b.w;
                for (int kk = 0; kk < a.w; ++kk) s += ar[kk] * br[kk];
                op[i * out.w + j] = s;
            }
    }
    return out;
}

// a^T * b
template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.n != b.n || a.c != 1 || b.c != 1 || a.h != b.h)
        throw std::invalid_argument("matmul_tn: dimension mismatch " + a.shape_str() + "^T x " +
                                    b.shape_str());
    Tensor<T> out(a.n, 1, a.w, b.w);
    MacCounter::add(static_cast<std::uint64_t>(a.n) * a.h * a.w * b.w);
    for (int in = 0; in < a.n; ++in) {
        const T* ap = a.plane(in, 0);
        const T* bp = b.plane(in, 0);
        T* op = out.plane(in, 0);
        for (int kk = 0; kk < a.h; ++kk)
            for (int i = 0; i < a.w; ++i) {
                const T av = ap[kk * a.w + i];
                if (av == T(0)) continue;
                const T* brow = bp + kk * b.w;
                T* orow = op + i * b.w;
                for (int j = 0; j < b.w; ++j) orow[j] += av * brow[j];
            }
    }
    return out;
}

template <typename T>
void matmul_vjp(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& gout, Tensor<T>* ga,
                Tensor<T>* gb) {
    if (ga) *ga += matmul_nt(gout, b);  // g * b^T
    if (gb) *gb += matmul_tn(a, gout);  // a^T * g
}

// ---------------------------------------------------------------------------
// L1 loss
// ---------------------------------------------------------------------------

template <typename T>
T l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    pred.require_same_shape(target, "l1_loss");
    double s = 0;
    for (std::size_t i = 0; i < pred.numel(); ++i)
        s += std::abs(static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]));
    return static_cast<T>(s / static_cast<double>(pred.numel()));
}

// d/dpred mean|pred - target|; the subgradient at zero difference is 0.
template <typename T>
Tensor<T> l1_loss_grad(const Tensor<T>& pred, const Tensor<T>& target) {
    pred.require_same_shape(target, "l1_loss_grad");
    Tensor<T> g(pred.n, pred.c, pred.h, pred.w);
    const T inv = T(1) / static_cast<T>(pred.numel());
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        const T d = pred.data[i] - target.data[i];
        g.data[i] = d > T(0) ? inv : (d < T(0) ? -inv : T(0));
    }
    return g;
}

}  // namespace eswt
