#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "eswt/attention.hpp"
#include "eswt/model.hpp"
#include "eswt/tensor.hpp"

namespace eswt {

// Complexity accounting. FLOPs are multiply-accumulates (1 MAC = 1 FLOP) and
// the headline `conv_macs` counts convolutions only, which is the convention
// the reference parameter/FLOPs figures follow; the window-attention products
// (Q Q^T and A V) are reported separately in `attn_macs`. `total_macs` is
// what the instrumented counter reproduces exactly.
struct LayerProfile {
    std::string name;
    std::uint64_t params = 0;
    std::uint64_t conv_macs = 0;
    std::uint64_t attn_macs = 0;
};

struct ComplexityReport {
    std::uint64_t params = 0;
    std::uint64_t conv_macs = 0;
    std::uint64_t attn_macs = 0;
    std::uint64_t total_macs = 0;
    int input_h = 0, input_w = 0;
    std::vector<LayerProfile> layers;
    // filled by latency_bench when requested
    double latency_mean_s = 0;
    double latency_std_s = 0;
    std::int64_t peak_alloc_bytes = 0;
};

// ---------------------------------------------------------------------------
// parameter counting
// ---------------------------------------------------------------------------

template <typename T>
std::uint64_t count_params(EswtModel<T>& model) {
    std::uint64_t total = 0;
    visit_params<T>(model, [&](const std::string&, Param<T>& p) { total += p.numel(); });
    return total;
}

// ---------------------------------------------------------------------------
// analytic MAC counting
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t conv_macs(std::uint64_t c_in, std::uint64_t c_out, std::uint64_t k,
                               std::uint64_t h, std::uint64_t w) {
    return c_in * c_out * k * k * h * w;
}

inline std::uint64_t padded(std::uint64_t dim, std::uint64_t mult) {
    return (dim + mult - 1) / mult * mult;
}

// One striped attention layer on an H-by-W map: each channel half runs its
// Q/V convs and window products on the map padded to its own stripe
// orientation; the shared tail blends at the original size. Collapses to
// (2C+2N)CHW when the stripes tile the map.
struct StripedMacs {
    std::uint64_t conv = 0;
    std::uint64_t attn = 0;
};

inline StripedMacs striped_bwsa_macs(std::uint64_t C, std::uint64_t H, std::uint64_t W,
                                     std::uint64_t wh, std::uint64_t ww) {
    StripedMacs m;
    const std::uint64_t half = C / 2;
    for (int br = 0; br < 2; ++br) {
        const std::uint64_t bh = br == 0 ? wh : ww;
        const std::uint64_t bw = br == 0 ? ww : wh;
        const std::uint64_t Hp = padded(H, bh), Wp = padded(W, bw);
        m.conv += 2 * conv_macs(half, half, 1, Hp, Wp);
        const std::uint64_t N = bh * bw;
        const std::uint64_t nwin = (Hp / bh) * (Wp / bw);
        m.attn += nwin * 2 * N * N * half;
    }
    m.conv += conv_macs(C, C, 1, H, W);
    return m;
}

}  // namespace detail

// Walks the model configuration and produces the per-layer breakdown at the
// given input size. Mirrors exactly what the instrumented forward counts.
inline ComplexityReport count_flops(const ModelConfig& cfg, int in_h, int in_w) {
    cfg.validate();
    const std::uint64_t C = cfg.channels, cin = cfg.c_in, H = in_h, W = in_w;
    const std::uint64_t hidden = cfg.mlp_hidden();
    const std::uint64_t s = cfg.sr_scale;
    ComplexityReport rep;
    rep.input_h = in_h;
    rep.input_w = in_w;

    auto add = [&](const std::string& name, std::uint64_t params, std::uint64_t conv,
                   std::uint64_t attn) {
        rep.layers.push_back({name, params, conv, attn});
        rep.params += params;
        rep.conv_macs += conv;
        rep.attn_macs += attn;
    };

    add("sfem", cin * C * 9 + C, detail::conv_macs(cin, C, 3, H, W), 0);

    const std::uint64_t half = C / 2;
    const std::uint64_t attn_params = 4 * (half * half + half)  // Q/V convs, both halves
                                      + 4 * 2 * half            // BN gamma/beta
                                      + C * C + C;              // shared tail
    const std::uint64_t mlp_params = C * hidden + hidden + hidden * C + C;
    const detail::StripedMacs sm = detail::striped_bwsa_macs(C, H, W, cfg.window.h, cfg.window.w);
    const std::uint64_t mlp_macs =
        detail::conv_macs(C, hidden, 1, H, W) + detail::conv_macs(hidden, C, 1, H, W);
    for (int bi = 0; bi < cfg.n_blocks; ++bi) {
        const std::string bp = "b" + std::to_string(bi);
        for (int li = 0; li < cfg.m_layers; ++li) {
            const std::string lp = bp + ".l" + std::to_string(li);
            add(lp + ".attn", attn_params, sm.conv, sm.attn);
            add(lp + ".mlp", mlp_params, mlp_macs, 0);
        }
        add(bp + ".tail", C * C * 9 + C, detail::conv_macs(C, C, 3, H, W), 0);
    }

    add("srrm.up", C * cin * s * s * 9 + cin * s * s, detail::conv_macs(C, cin * s * s, 3, H, W), 0);
    add("srrm.out", cin * cin * 9 + cin, detail::conv_macs(cin, cin, 3, H * s, W * s), 0);

    rep.total_macs = rep.conv_macs + rep.attn_macs;
    return rep;
}

// Runs a real forward pass with the MAC counter live; the dual route to
// count_flops.
template <typename T>
std::uint64_t instrumented_macs(EswtModel<T>& model, const Tensor<T>& input) {
    MacCounter::enable();
    forward(model, input, Mode::infer);
    return MacCounter::disable();
}

// ---------------------------------------------------------------------------
// latency
// ---------------------------------------------------------------------------

struct LatencyResult {
    double mean_s = 0;
    double std_s = 0;
    std::int64_t peak_alloc_bytes = 0;
};

template <typename T>
LatencyResult latency_bench(EswtModel<T>& model, const Tensor<T>& input, int trials = 5,
                            int warmup = 1) {
    if (trials < 3) throw std::invalid_argument("latency_bench: need at least 3 trials");
    for (int i = 0; i < warmup; ++i) forward(model, input, Mode::infer);
    AllocTracker::enable();
    forward(model, input, Mode::infer);
    const std::int64_t peak = AllocTracker::disable();
    std::vector<double> times;
    times.reserve(trials);
    for (int i = 0; i < trials; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        forward(model, input, Mode::infer);
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    LatencyResult res;
    res.peak_alloc_bytes = peak;
    for (double t : times) res.mean_s += t;
    res.mean_s /= trials;
    double var = 0;
    for (double t : times) var += (t - res.mean_s) * (t - res.mean_s);
    res.std_s = std::sqrt(var / trials);
    return res;
}

}  // namespace eswt
