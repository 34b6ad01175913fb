#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "eswt/layers.hpp"
#include "eswt/ops.hpp"
#include "eswt/windowing.hpp"

namespace eswt {

// ---------------------------------------------------------------------------
// tensor reshuffles between window layout (m, c, h, w) and per-window
// matrices (m, 1, N, c) with N = h*w
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> win_to_mat(const Tensor<T>& win) {
    const int N = win.h * win.w;
    Tensor<T> mat(win.n, 1, N, win.c);
    for (int m = 0; m < win.n; ++m) {
        T* mp = mat.plane(m, 0);
        for (int ic = 0; ic < win.c; ++ic) {
            const T* wp = win.plane(m, ic);
            for (int p = 0; p < N; ++p) mp[p * win.c + ic] = wp[p];
        }
    }
    return mat;
}

template <typename T>
Tensor<T> mat_to_win(const Tensor<T>& mat, int c, int h, int w) {
    Tensor<T> win(mat.n, c, h, w);
    const int N = h * w;
    for (int m = 0; m < mat.n; ++m) {
        const T* mp = mat.plane(m, 0);
        for (int ic = 0; ic < c; ++ic) {
            T* wp = win.plane(m, ic);
            for (int p = 0; p < N; ++p) wp[p] = mp[p * c + ic];
        }
    }
    return win;
}

template <typename T>
Tensor<T> channel_slice(const Tensor<T>& x, int c0, int c1) {
    Tensor<T> out(x.n, c1 - c0, x.h, x.w);
    const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
    for (int in = 0; in < x.n; ++in)
        for (int ic = c0; ic < c1; ++ic)
            std::copy_n(x.plane(in, ic), plane, out.plane(in, ic - c0));
    return out;
}

template <typename T>
Tensor<T> channel_concat(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w)
        throw std::invalid_argument("channel_concat: shape mismatch");
    Tensor<T> out(a.n, a.c + b.c, a.h, a.w);
    const std::size_t plane = static_cast<std::size_t>(a.h) * a.w;
    for (int in = 0; in < a.n; ++in) {
        for (int ic = 0; ic < a.c; ++ic) std::copy_n(a.plane(in, ic), plane, out.plane(in, ic));
        for (int ic = 0; ic < b.c; ++ic)
            std::copy_n(b.plane(in, ic), plane, out.plane(in, a.c + ic));
    }
    return out;
}

// ---------------------------------------------------------------------------
// BN-embedded window self-attention
// ---------------------------------------------------------------------------

// Q/V projections (1x1 convs) with their batch norms; one branch serves one
// channel half of the striped layer, or the full width in single-orientation
// mode.
template <typename T>
struct WsaBranch {
    Conv2dLayer<T> q, v;
    BatchNormLayer<T> bn_q, bn_v;

    WsaBranch() = default;
    explicit WsaBranch(int c) : q(c, c, 1), v(c, c, 1), bn_q(c), bn_v(c) {}
    int channels() const { return q.c_in; }
};

struct AttentionOptions {
    // Eq-faithful variant that divides the softmax output by scale instead of
    // the logits; breaks row normalization, kept for comparison runs.
    bool literal_scale_after_softmax = false;
    // 0 means sqrt(window pixels)
    double scale_override = 0.0;
};

template <typename T>
struct BwsaWindowCache {
    Tensor<T> win;        // input windows
    BnCache<T> bn_q, bn_v;
    Tensor<T> qm, vm;     // (m, 1, N, c)
    Tensor<T> soft;       // softmax output per window (m, 1, N, N)
    T scale = T(1);
    bool literal = false;
};

// Attention inside a batch of windows: Q = BN(conv1x1(win)), V likewise,
// A = softmax(Q Q^T / scale) row-wise, output A*V. No key matrix.
template <typename T>
Tensor<T> bwsa_window(const Tensor<T>& win, WsaBranch<T>& branch, Mode mode,
                      const AttentionOptions& opts = {}, BwsaWindowCache<T>* cache = nullptr) {
    if (win.c != branch.channels())
        throw std::invalid_argument("bwsa_window: channel mismatch, window has " +
                                    std::to_string(win.c) + ", branch expects " +
                                    std::to_string(branch.channels()));
    const int N = win.h * win.w;
    const T scale = opts.scale_override > 0 ? static_cast<T>(opts.scale_override)
                                            : static_cast<T>(std::sqrt(static_cast<double>(N)));

    Tensor<T> q_pre = branch.q.forward(win);
    Tensor<T> Q = branch.bn_q.forward(q_pre, mode, cache ? &cache->bn_q : nullptr);
    Tensor<T> v_pre = branch.v.forward(win);
    Tensor<T> V = branch.bn_v.forward(v_pre, mode, cache ? &cache->bn_v : nullptr);

    Tensor<T> qm = win_to_mat(Q);
    Tensor<T> vm = win_to_mat(V);
    Tensor<T> logits = matmul_nt(qm, qm);
    if (!opts.literal_scale_after_softmax) {
        const T inv = T(1) / scale;
        for (auto& v : logits.data) v *= inv;
    }
    Tensor<T> soft = softmax_lastdim(logits);
    Tensor<T> attn = soft;
    if (opts.literal_scale_after_softmax) {
        const T inv = T(1) / scale;
        for (auto& v : attn.data) v *= inv;
    }
    Tensor<T> om = matmul(attn, vm);

    if (cache) {
        cache->win = win;
        cache->qm = std::move(qm);
        cache->vm = std::move(vm);
        cache->soft = std::move(soft);
        cache->scale = scale;
        cache->literal = opts.literal_scale_after_softmax;
    }
    return mat_to_win(om, win.c, win.h, win.w);
}

template <typename T>
Tensor<T> bwsa_window_backward(const Tensor<T>& gout, BwsaWindowCache<T>& cache,
                               WsaBranch<T>& branch) {
    const int c = cache.win.c, h = cache.win.h, w = cache.win.w;
    Tensor<T> gom = win_to_mat(gout);

    Tensor<T> attn = cache.soft;
    if (cache.literal) {
        const T inv = T(1) / cache.scale;
        for (auto& v : attn.data) v *= inv;
    }
    Tensor<T> gattn(attn.n, 1, attn.h, attn.w);
    Tensor<T> gvm(cache.vm.n, 1, cache.vm.h, cache.vm.w);
    matmul_vjp(attn, cache.vm, gom, &gattn, &gvm);

    Tensor<T> gsoft(gattn.n, 1, gattn.h, gattn.w);
    if (cache.literal) {
        const T inv = T(1) / cache.scale;
        for (std::size_t i = 0; i < gattn.numel(); ++i) gsoft.data[i] = gattn.data[i] * inv;
    } else {
        gsoft = gattn;
    }
    Tensor<T> glogits(gsoft.n, 1, gsoft.h, gsoft.w);
    softmax_lastdim_vjp(cache.soft, gsoft, &glogits);
    if (!cache.literal) {
        const T inv = T(1) / cache.scale;
        for (auto& v : glogits.data) v *= inv;
    }

    // logits_raw = qm * qm^T, so gqm = (gL + gL^T) * qm
    Tensor<T> gqm = matmul(glogits, cache.qm);
    gqm += matmul_tn(glogits, cache.qm);

    Tensor<T> gQ = mat_to_win(gqm, c, h, w);
    Tensor<T> gV = mat_to_win(gvm, c, h, w);

    Tensor<T> gwin(cache.win.n, c, h, w);
    Tensor<T> g_pre(cache.win.n, c, h, w);
    branch.bn_q.backward(cache.bn_q, gQ, &g_pre);
    branch.q.backward(cache.win, g_pre, &gwin);
    g_pre.fill(T(0));
    branch.bn_v.backward(cache.bn_v, gV, &g_pre);
    branch.v.backward(cache.win, g_pre, &gwin);
    return gwin;
}

// ---------------------------------------------------------------------------
// striped BWSA layer: channel halves under transposed stripe orientations,
// blended by a shared 1x1 tail conv
// ---------------------------------------------------------------------------

template <typename T>
struct StripedBwsa {
    WsaBranch<T> half0, half1;  // each C/2 wide
    Conv2dLayer<T> tail;        // C -> C blend

    StripedBwsa() = default;
    explicit StripedBwsa(int c) : half0(c / 2), half1(c / 2), tail(c, c, 1) {
        if (c % 2 != 0)
            throw std::invalid_argument("StripedBwsa: channel count must be even, got " +
                                        std::to_string(c));
    }
    int channels() const { return tail.c_in; }
};

template <typename T>
struct StripedBranchCache {
    PadRecord pad;
    WindowSpec win;
    BwsaWindowCache<T> attn;
};

template <typename T>
struct StripedCache {
    int shift_y = 0, shift_x = 0;
    StripedBranchCache<T> br[2];
    Tensor<T> tail_in;
};

namespace detail {
template <typename T>
Tensor<T> striped_branch_forward(const Tensor<T>& x, WsaBranch<T>& branch, const WindowSpec& spec,
                                 Mode mode, const AttentionOptions& opts,
                                 StripedBranchCache<T>* cache) {
    PadRecord rec;
    Tensor<T> padded = pad_to_multiple(x, spec.h, spec.w, &rec);
    WindowedTensor<T> wt = partition(padded, spec);
    Tensor<T> attended =
        bwsa_window(wt.windows, branch, mode, opts, cache ? &cache->attn : nullptr);
    wt.windows = std::move(attended);
    Tensor<T> merged = reverse(wt);
    if (cache) {
        cache->pad = rec;
        cache->win = spec;
    }
    return crop_pad(merged, rec);
}

template <typename T>
Tensor<T> striped_branch_backward(const Tensor<T>& gout, StripedBranchCache<T>& cache,
                                  WsaBranch<T>& branch) {
    // crop adjoint: embed into the padded frame
    Tensor<T> gpad(gout.n, gout.c, cache.pad.orig_h + cache.pad.pad_h,
                   cache.pad.orig_w + cache.pad.pad_w);
    for (int in = 0; in < gout.n; ++in)
        for (int ic = 0; ic < gout.c; ++ic) {
            const T* gp = gout.plane(in, ic);
            T* op = gpad.plane(in, ic);
            for (int y = 0; y < gout.h; ++y)
                for (int xx = 0; xx < gout.w; ++xx) op[y * gpad.w + xx] = gp[y * gout.w + xx];
        }
    WindowedTensor<T> gwt = partition(gpad, cache.win);
    Tensor<T> gwin = bwsa_window_backward(gwt.windows, cache.attn, branch);
    gwt.windows = std::move(gwin);
    Tensor<T> gpadded = reverse(gwt);
    if (cache.pad.pad_h == 0 && cache.pad.pad_w == 0) return gpadded;
    return pad_to_multiple_vjp(gpadded, cache.pad);
}
}  // namespace detail

// Striped window self-attention over a (n, C, H, W) map: optional cyclic
// shift, vertical h-by-w stripes on the first channel half, horizontal
// w-by-h stripes on the second, channel concat, shared tail conv, inverse
// shift. Maps of any size work; stripes that do not tile the map are handled
// by reflect pad + crop.
template <typename T>
Tensor<T> striped_bwsa(const Tensor<T>& x, StripedBwsa<T>& params, const WindowSpec& spec,
                       bool shifted, Mode mode, const AttentionOptions& opts = {},
                       StripedCache<T>* cache = nullptr) {
    if (x.c != params.channels())
        throw std::invalid_argument("striped_bwsa: channel mismatch");
    const int sy = shifted ? spec.shift_y : 0;
    const int sx = shifted ? spec.shift_x : 0;
    Tensor<T> x1 = cyclic_shift(x, sy, sx);
    const int half = x.c / 2;
    Tensor<T> a = channel_slice(x1, 0, half);
    Tensor<T> b = channel_slice(x1, half, x.c);
    Tensor<T> a2 = detail::striped_branch_forward(a, params.half0, WindowSpec(spec.h, spec.w), mode,
                                                  opts, cache ? &cache->br[0] : nullptr);
    Tensor<T> b2 = detail::striped_branch_forward(b, params.half1, WindowSpec(spec.w, spec.h), mode,
                                                  opts, cache ? &cache->br[1] : nullptr);
    Tensor<T> blended = channel_concat(a2, b2);
    Tensor<T> z = params.tail.forward(blended);
    if (cache) {
        cache->shift_y = sy;
        cache->shift_x = sx;
        cache->tail_in = std::move(blended);
    }
    return inverse_shift(z, sy, sx);
}

template <typename T>
Tensor<T> striped_bwsa_backward(const Tensor<T>& gout, StripedCache<T>& cache,
                                StripedBwsa<T>& params) {
    Tensor<T> gz = cyclic_shift(gout, cache.shift_y, cache.shift_x);
    Tensor<T> gy(gz.n, params.channels(), gz.h, gz.w);
    params.tail.backward(cache.tail_in, gz, &gy);
    const int half = params.channels() / 2;
    Tensor<T> ga = channel_slice(gy, 0, half);
    Tensor<T> gb = channel_slice(gy, half, params.channels());
    Tensor<T> gxa = detail::striped_branch_backward(ga, cache.br[0], params.half0);
    Tensor<T> gxb = detail::striped_branch_backward(gb, cache.br[1], params.half1);
    Tensor<T> gx1 = channel_concat(gxa, gxb);
    return inverse_shift(gx1, cache.shift_y, cache.shift_x);
}

// Single-orientation full-width WSA (the shifted-window mechanism's building
// block); used by the complexity validator and as a reference for the
// degenerate square-window case.
template <typename T>
struct FullWsa {
    WsaBranch<T> branch;
    Conv2dLayer<T> tail;

    FullWsa() = default;
    explicit FullWsa(int c) : branch(c), tail(c, c, 1) {}
};

template <typename T>
Tensor<T> full_wsa(const Tensor<T>& x, FullWsa<T>& params, const WindowSpec& spec, bool shifted,
                   Mode mode, const AttentionOptions& opts = {}) {
    const int sy = shifted ? spec.shift_y : 0;
    const int sx = shifted ? spec.shift_x : 0;
    Tensor<T> x1 = cyclic_shift(x, sy, sx);
    Tensor<T> y = detail::striped_branch_forward(x1, params.branch, spec, mode, opts,
                                                 static_cast<StripedBranchCache<T>*>(nullptr));
    Tensor<T> z = params.tail.forward(y);
    return inverse_shift(z, sy, sx);
}

// ---------------------------------------------------------------------------
// closed-form operation counts
// ---------------------------------------------------------------------------

// attention in one c-by-h-by-w window, tail conv included, BN and softmax
// excluded: 3*c^2*h*w + 2*c*(h*w)^2
inline std::uint64_t complexity_bwsa(std::uint64_t c, std::uint64_t h, std::uint64_t w) {
    const std::uint64_t hw = h * w;
    return 3 * c * c * hw + 2 * c * hw * hw;
}

// shifted-window mechanism: two successive full-width WSA passes with k-by-k
// windows: (6C + 4N) * C * H * W with N = k^2
inline std::uint64_t complexity_shift(std::uint64_t C, std::uint64_t H, std::uint64_t W,
                                      std::uint64_t k) {
    return (6 * C + 4 * k * k) * C * H * W;
}

// striped mechanism, both halves plus the blend conv: (2C + 2N) * C * H * W
// with N = h*w
inline std::uint64_t complexity_strip(std::uint64_t C, std::uint64_t H, std::uint64_t W,
                                      std::uint64_t h, std::uint64_t w) {
    return (2 * C + 2 * h * w) * C * H * W;
}

}  // namespace eswt
