#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "eswt/attention.hpp"
#include "eswt/layers.hpp"
#include "eswt/ops.hpp"
#include "eswt/rng.hpp"
#include "eswt/tensor.hpp"
#include "eswt/windowing.hpp"

namespace eswt {

struct ModelConfig {
    int c_in = 3;
    int channels = 60;  // feature width C
    int n_blocks = 3;   // ETBs in the deep feature extractor
    int m_layers = 6;   // ETLs per ETB
    int sr_scale = 4;
    WindowSpec window{24, 6};
    double mlp_ratio = 2.5;
    bool block_residual = false;  // ETBs carry no input residual by default
    AttentionOptions attention;

    // hidden width of the MLP, rounded up to a multiple of 5 so the shift
    // conv gets whole channel groups
    int mlp_hidden() const {
        const int raw = static_cast<int>(std::ceil(channels * mlp_ratio));
        return ((raw + 4) / 5) * 5;
    }

    void validate() const {
        if (c_in < 1) throw std::invalid_argument("ModelConfig: c_in must be >= 1");
        if (channels < 6 || channels % 2 != 0)
            throw std::invalid_argument("ModelConfig: channels must be even and >= 6");
        if (n_blocks < 1 || m_layers < 1)
            throw std::invalid_argument("ModelConfig: n_blocks and m_layers must be >= 1");
        if (sr_scale < 1 || sr_scale > 8)
            throw std::invalid_argument("ModelConfig: sr_scale out of range");
        if (mlp_ratio <= 0) throw std::invalid_argument("ModelConfig: mlp_ratio must be > 0");
        window.validate();
    }
};

// Transformer layer: striped attention with a residual, then a
// shift-conv/swish/shift-conv MLP with a residual. No layer norm anywhere.
template <typename T>
struct Etl {
    StripedBwsa<T> attn;
    Conv2dLayer<T> fc1, fc2;

    Etl() = default;
    Etl(int c, int hidden) : attn(c), fc1(c, hidden, 1), fc2(hidden, c, 1) {}
};

template <typename T>
struct Etb {
    std::vector<Etl<T>> layers;
    Conv2dLayer<T> tail;  // 3x3, inductive bias at the block tail

    Etb() = default;
    Etb(int c, int hidden, int m) : layers(m, Etl<T>(c, hidden)), tail(c, c, 3) {}
};

template <typename T>
struct EswtModel {
    ModelConfig cfg;
    Conv2dLayer<T> sfem;               // c_in -> C, 3x3
    std::vector<Etb<T>> blocks;
    Conv2dLayer<T> srrm_up;            // C -> c_in*s^2, 3x3
    Conv2dLayer<T> srrm_out;           // c_in -> c_in, 3x3

    EswtModel() = default;
    explicit EswtModel(const ModelConfig& cfg_) : cfg(cfg_) {
        cfg.validate();
        sfem = Conv2dLayer<T>(cfg.c_in, cfg.channels, 3);
        blocks.assign(cfg.n_blocks, Etb<T>(cfg.channels, cfg.mlp_hidden(), cfg.m_layers));
        srrm_up = Conv2dLayer<T>(cfg.channels, cfg.c_in * cfg.sr_scale * cfg.sr_scale, 3);
        srrm_out = Conv2dLayer<T>(cfg.c_in, cfg.c_in, 3);
    }
};

// ---------------------------------------------------------------------------
// parameter visitation in canonical order
// ---------------------------------------------------------------------------

template <typename T>
void visit_conv_layers(EswtModel<T>& model,
                       const std::function<void(const std::string&, Conv2dLayer<T>&)>& f) {
    f("sfem", model.sfem);
    for (std::size_t bi = 0; bi < model.blocks.size(); ++bi) {
        Etb<T>& blk = model.blocks[bi];
        const std::string bp = "b" + std::to_string(bi);
        for (std::size_t li = 0; li < blk.layers.size(); ++li) {
            Etl<T>& l = blk.layers[li];
            const std::string lp = bp + ".l" + std::to_string(li);
            f(lp + ".attn.q0", l.attn.half0.q);
            f(lp + ".attn.v0", l.attn.half0.v);
            f(lp + ".attn.q1", l.attn.half1.q);
            f(lp + ".attn.v1", l.attn.half1.v);
            f(lp + ".attn.tail", l.attn.tail);
            f(lp + ".mlp.fc1", l.fc1);
            f(lp + ".mlp.fc2", l.fc2);
        }
        f(bp + ".tail", blk.tail);
    }
    f("srrm.up", model.srrm_up);
    f("srrm.out", model.srrm_out);
}

template <typename T>
void visit_batchnorms(EswtModel<T>& model,
                      const std::function<void(const std::string&, BatchNormLayer<T>&)>& f) {
    for (std::size_t bi = 0; bi < model.blocks.size(); ++bi) {
        Etb<T>& blk = model.blocks[bi];
        for (std::size_t li = 0; li < blk.layers.size(); ++li) {
            Etl<T>& l = blk.layers[li];
            const std::string lp = "b" + std::to_string(bi) + ".l" + std::to_string(li);
            f(lp + ".attn.bnq0", l.attn.half0.bn_q);
            f(lp + ".attn.bnv0", l.attn.half0.bn_v);
            f(lp + ".attn.bnq1", l.attn.half1.bn_q);
            f(lp + ".attn.bnv1", l.attn.half1.bn_v);
        }
    }
}

template <typename T>
void visit_params(EswtModel<T>& model, const ParamVisitor<T>& f) {
    // interleaves convs and batch norms in layer order so checkpoints read
    // naturally; the order is part of the determinism contract
    f("sfem.w", model.sfem.w);
    f("sfem.b", model.sfem.b);
    for (std::size_t bi = 0; bi < model.blocks.size(); ++bi) {
        Etb<T>& blk = model.blocks[bi];
        const std::string bp = "b" + std::to_string(bi);
        for (std::size_t li = 0; li < blk.layers.size(); ++li) {
            Etl<T>& l = blk.layers[li];
            const std::string lp = bp + ".l" + std::to_string(li);
            auto half = [&](WsaBranch<T>& br, const std::string& hp) {
                visit_params(br.q, hp + ".q", f);
                visit_params(br.bn_q, hp + ".bnq", f);
                visit_params(br.v, hp + ".v", f);
                visit_params(br.bn_v, hp + ".bnv", f);
            };
            half(l.attn.half0, lp + ".attn.h0");
            half(l.attn.half1, lp + ".attn.h1");
            visit_params(l.attn.tail, lp + ".attn.tail", f);
            visit_params(l.fc1, lp + ".mlp.fc1", f);
            visit_params(l.fc2, lp + ".mlp.fc2", f);
        }
        visit_params(blk.tail, bp + ".tail", f);
    }
    visit_params(model.srrm_up, "srrm.up", f);
    visit_params(model.srrm_out, "srrm.out", f);
}

template <typename T>
void visit_buffers(EswtModel<T>& model, const BufferVisitor<T>& f) {
    visit_batchnorms<T>(model, [&](const std::string& name, BatchNormLayer<T>& bn) {
        visit_buffers(bn, name, f);
    });
}

// ---------------------------------------------------------------------------
// init
// ---------------------------------------------------------------------------

// Conv weights uniform in +-sqrt(1/fan_in), biases zero, BN gamma 1 beta 0.
// One sequential stream over the canonical layer order keeps this a pure
// function of (config, seed).
template <typename T>
EswtModel<T> init_model(const ModelConfig& cfg, std::uint64_t seed) {
    EswtModel<T> model(cfg);
    Rng rng = derive_rng(seed, "init");
    visit_conv_layers<T>(model, [&](const std::string&, Conv2dLayer<T>& conv) {
        const double bound = std::sqrt(1.0 / (static_cast<double>(conv.c_in) * conv.k * conv.k));
        for (auto& v : conv.w.value.data) v = static_cast<T>(rng.uniform(-bound, bound));
    });
    return model;
}

// ---------------------------------------------------------------------------
// forward / backward
// ---------------------------------------------------------------------------

template <typename T>
struct EtlCache {
    StripedCache<T> attn;
    Tensor<T> y;   // attention residual sum, input of fc1
    Tensor<T> m1;  // fc1 output, pre-activation
    Tensor<T> act; // swish(m1), input of fc2
};

template <typename T>
struct EtbCache {
    std::vector<EtlCache<T>> layers;
    Tensor<T> tail_in;
};

template <typename T>
struct ModelCache {
    Tensor<T> input;
    std::vector<EtbCache<T>> blocks;
    Tensor<T> srrm_in;   // F_s + F_d
    Tensor<T> up_out;    // pre pixel shuffle
    Tensor<T> shuffled;  // input of the final conv
};

template <typename T>
Tensor<T> etl_forward(Etl<T>& l, const Tensor<T>& x, const WindowSpec& win, bool shifted,
                      Mode mode, const AttentionOptions& opts, EtlCache<T>* cache) {
    Tensor<T> a = striped_bwsa(x, l.attn, win, shifted, mode, opts, cache ? &cache->attn : nullptr);
    Tensor<T> y = x + a;
    Tensor<T> m1 = shift_conv(y, l.fc1.w.value, l.fc1.b.value.data);
    Tensor<T> act = swish(m1);
    Tensor<T> m2 = shift_conv(act, l.fc2.w.value, l.fc2.b.value.data);
    Tensor<T> out = y + m2;
    if (cache) {
        cache->y = std::move(y);
        cache->m1 = std::move(m1);
        cache->act = std::move(act);
    }
    return out;
}

template <typename T>
Tensor<T> etl_backward(Etl<T>& l, const Tensor<T>& gout, EtlCache<T>& cache) {
    // out = y + fc2(swish(fc1(y)))
    Tensor<T> gact(cache.act.n, cache.act.c, cache.act.h, cache.act.w);
    shift_conv_vjp(cache.act, l.fc2.w.value, gout, &gact, &l.fc2.w.grad, &l.fc2.b.grad.data);
    Tensor<T> gm1(cache.m1.n, cache.m1.c, cache.m1.h, cache.m1.w);
    swish_vjp(cache.m1, gact, &gm1);
    Tensor<T> gy = gout;
    shift_conv_vjp(cache.y, l.fc1.w.value, gm1, &gy, &l.fc1.w.grad, &l.fc1.b.grad.data);
    // y = x + attn(x)
    Tensor<T> gx = striped_bwsa_backward(gy, cache.attn, l.attn);
    gx += gy;
    return gx;
}

// Alternating shift pattern: even layer index plain, odd shifted.
inline bool layer_shifted(int layer_index) { return layer_index % 2 == 1; }

template <typename T>
Tensor<T> etb_forward(Etb<T>& blk, const Tensor<T>& x, const WindowSpec& win, Mode mode,
                      const AttentionOptions& opts, bool block_residual, EtbCache<T>* cache) {
    if (cache) cache->layers.resize(blk.layers.size());
    Tensor<T> cur = x;
    for (std::size_t li = 0; li < blk.layers.size(); ++li)
        cur = etl_forward(blk.layers[li], cur, win, layer_shifted(static_cast<int>(li)), mode, opts,
                          cache ? &cache->layers[li] : nullptr);
    Tensor<T> out = blk.tail.forward(cur);
    if (cache) cache->tail_in = std::move(cur);
    if (block_residual) out += x;
    return out;
}

template <typename T>
Tensor<T> etb_backward(Etb<T>& blk, const Tensor<T>& gout, EtbCache<T>& cache,
                       bool block_residual) {
    Tensor<T> g(gout.n, gout.c, gout.h, gout.w);
    blk.tail.backward(cache.tail_in, gout, &g);
    for (std::size_t li = blk.layers.size(); li-- > 0;)
        g = etl_backward(blk.layers[li], g, cache.layers[li]);
    if (block_residual) g += gout;
    return g;
}

template <typename T>
void require_finite(const Tensor<T>& t, const std::string& where) {
    if (!t.all_finite())
        throw std::runtime_error("non-finite values after " + where);
}

template <typename T>
Tensor<T> forward(EswtModel<T>& model, const Tensor<T>& input, Mode mode, const WindowSpec& win,
                  ModelCache<T>* cache = nullptr) {
    if (input.c != model.cfg.c_in)
        throw std::invalid_argument("forward: input has " + std::to_string(input.c) +
                                    " channels, model expects " + std::to_string(model.cfg.c_in));
    Tensor<T> fs = model.sfem.forward(input);
    require_finite(fs, "sfem");
    if (cache) {
        cache->input = input;
        cache->blocks.resize(model.blocks.size());
    }
    Tensor<T> cur = fs;
    for (std::size_t bi = 0; bi < model.blocks.size(); ++bi) {
        cur = etb_forward(model.blocks[bi], cur, win, mode, model.cfg.attention,
                          model.cfg.block_residual, cache ? &cache->blocks[bi] : nullptr);
        require_finite(cur, "etb " + std::to_string(bi));
    }
    Tensor<T> merged = fs + cur;  // global skip: shallow features go straight to SRRM
    Tensor<T> up = model.srrm_up.forward(merged);
    Tensor<T> shuffled = pixel_shuffle(up, model.cfg.sr_scale);
    Tensor<T> out = model.srrm_out.forward(shuffled);
    require_finite(out, "srrm");
    if (cache) {
        cache->srrm_in = std::move(merged);
        cache->up_out = std::move(up);
        cache->shuffled = std::move(shuffled);
    }
    return out;
}

template <typename T>
Tensor<T> forward(EswtModel<T>& model, const Tensor<T>& input, Mode mode,
                  ModelCache<T>* cache = nullptr) {
    return forward(model, input, mode, model.cfg.window, cache);
}

// Accumulates parameter gradients; returns the input cotangent.
template <typename T>
Tensor<T> backward(EswtModel<T>& model, ModelCache<T>& cache, const Tensor<T>& gout) {
    Tensor<T> gshuf(cache.shuffled.n, cache.shuffled.c, cache.shuffled.h, cache.shuffled.w);
    model.srrm_out.backward(cache.shuffled, gout, &gshuf);
    Tensor<T> gup(cache.up_out.n, cache.up_out.c, cache.up_out.h, cache.up_out.w);
    pixel_shuffle_vjp(gshuf, model.cfg.sr_scale, &gup);
    Tensor<T> gmerged(cache.srrm_in.n, cache.srrm_in.c, cache.srrm_in.h, cache.srrm_in.w);
    model.srrm_up.backward(cache.srrm_in, gup, &gmerged);

    Tensor<T> g = gmerged;  // deep-feature path
    for (std::size_t bi = model.blocks.size(); bi-- > 0;)
        g = etb_backward(model.blocks[bi], g, cache.blocks[bi], model.cfg.block_residual);
    g += gmerged;  // global skip into the shallow features

    Tensor<T> ginput(cache.input.n, cache.input.c, cache.input.h, cache.input.w);
    model.sfem.backward(cache.input, g, &ginput);
    return ginput;
}

template <typename T>
void zero_grads(EswtModel<T>& model) {
    visit_params<T>(model, [](const std::string&, Param<T>& p) { p.zero_grad(); });
}

// Folds every attention BN into its preceding 1x1 conv for inference.
template <typename T>
void fold_model(EswtModel<T>& model) {
    for (auto& blk : model.blocks)
        for (auto& l : blk.layers) {
            fold_into_conv(l.attn.half0.q, l.attn.half0.bn_q);
            fold_into_conv(l.attn.half0.v, l.attn.half0.bn_v);
            fold_into_conv(l.attn.half1.q, l.attn.half1.bn_q);
            fold_into_conv(l.attn.half1.v, l.attn.half1.bn_v);
        }
}

// ---------------------------------------------------------------------------
// checkpoint I/O: manifest of (name, shape, offset) + raw little-endian f32
// ---------------------------------------------------------------------------

namespace ckpt {

constexpr char kMagic[8] = {'E', 'S', 'W', 'T', 'C', 'K', 'P', '1'};

struct Entry {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::uint64_t offset = 0;  // float index into the payload

    std::uint64_t count() const {
        std::uint64_t c = 1;
        for (auto d : dims) c *= d;
        return c;
    }
};

inline void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<char*>(b), 4);
}
inline void write_u64(std::ostream& os, std::uint64_t v) {
    write_u32(os, static_cast<std::uint32_t>(v));
    write_u32(os, static_cast<std::uint32_t>(v >> 32));
}
inline std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
inline std::uint64_t read_u64(std::istream& is) {
    const std::uint64_t lo = read_u32(is);
    return lo | (static_cast<std::uint64_t>(read_u32(is)) << 32);
}
inline void write_f32(std::ostream& os, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    write_u32(os, u);
}
inline float read_f32(std::istream& is) {
    const std::uint32_t u = read_u32(is);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

}  // namespace ckpt

// Named float blobs, written atomically (temp file + rename).
struct CheckpointWriter {
    std::vector<ckpt::Entry> entries;
    std::vector<float> payload;

    void add(const std::string& name, std::vector<std::uint32_t> dims,
             const std::vector<float>& values) {
        ckpt::Entry e;
        e.name = name;
        e.dims = std::move(dims);
        e.offset = payload.size();
        if (e.count() != values.size())
            throw std::invalid_argument("checkpoint: shape/value mismatch for " + name);
        entries.push_back(e);
        payload.insert(payload.end(), values.begin(), values.end());
    }

    void write(const std::string& path) const {
        const std::string tmp = path + ".tmp";
        {
            std::ofstream os(tmp, std::ios::binary);
            if (!os) throw std::runtime_error("checkpoint: cannot open " + tmp);
            os.write(ckpt::kMagic, 8);
            ckpt::write_u32(os, static_cast<std::uint32_t>(entries.size()));
            for (const auto& e : entries) {
                ckpt::write_u32(os, static_cast<std::uint32_t>(e.name.size()));
                os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
                ckpt::write_u32(os, static_cast<std::uint32_t>(e.dims.size()));
                for (auto d : e.dims) ckpt::write_u32(os, d);
                ckpt::write_u64(os, e.offset);
            }
            ckpt::write_u64(os, payload.size());
            for (float v : payload) ckpt::write_f32(os, v);
            if (!os) throw std::runtime_error("checkpoint: write failed for " + tmp);
        }
        std::filesystem::rename(tmp, path);
    }
};

struct CheckpointReader {
    std::vector<ckpt::Entry> entries;
    std::vector<float> payload;

    explicit CheckpointReader(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
        char magic[8];
        is.read(magic, 8);
        if (!is || std::memcmp(magic, ckpt::kMagic, 8) != 0)
            throw std::runtime_error("checkpoint: bad magic in " + path);
        const std::uint32_t count = ckpt::read_u32(is);
        for (std::uint32_t i = 0; i < count && is; ++i) {
            ckpt::Entry e;
            const std::uint32_t len = ckpt::read_u32(is);
            if (len > 4096) throw std::runtime_error("checkpoint: corrupt manifest in " + path);
            e.name.resize(len);
            is.read(e.name.data(), len);
            const std::uint32_t nd = ckpt::read_u32(is);
            if (nd > 8) throw std::runtime_error("checkpoint: corrupt manifest in " + path);
            e.dims.resize(nd);
            for (auto& d : e.dims) d = ckpt::read_u32(is);
            e.offset = ckpt::read_u64(is);
            entries.push_back(std::move(e));
        }
        if (!is) throw std::runtime_error("checkpoint: truncated manifest in " + path);
        const std::uint64_t n = ckpt::read_u64(is);
        payload.resize(n);
        for (std::uint64_t i = 0; i < n; ++i) payload[i] = ckpt::read_f32(is);
        if (!is) throw std::runtime_error("checkpoint: truncated payload in " + path);
        for (const auto& e : entries)
            if (e.offset + e.count() > payload.size())
                throw std::runtime_error("checkpoint: entry " + e.name + " out of bounds");
    }

    const ckpt::Entry* find(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    }
};

template <typename T>
std::vector<std::uint32_t> tensor_dims(const Tensor<T>& t) {
    return {static_cast<std::uint32_t>(t.n), static_cast<std::uint32_t>(t.c),
            static_cast<std::uint32_t>(t.h), static_cast<std::uint32_t>(t.w)};
}

template <typename T>
void append_model_entries(EswtModel<T>& model, CheckpointWriter& wr) {
    visit_params<T>(model, [&](const std::string& name, Param<T>& p) {
        std::vector<float> vals(p.value.numel());
        for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<float>(p.value.data[i]);
        wr.add("param:" + name, tensor_dims(p.value), vals);
    });
    visit_buffers<T>(model, [&](const std::string& name, std::vector<T>& buf) {
        std::vector<float> vals(buf.size());
        for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<float>(buf[i]);
        wr.add("buffer:" + name, {static_cast<std::uint32_t>(buf.size())}, vals);
    });
}

template <typename T>
void save_checkpoint(EswtModel<T>& model, const std::string& path) {
    CheckpointWriter wr;
    append_model_entries(model, wr);
    wr.write(path);
}

// Window size is deliberately absent from parameter shapes, so a checkpoint
// trained under one window loads into a model configured with another.
template <typename T>
EswtModel<T> load_checkpoint(const std::string& path, const ModelConfig& cfg) {
    CheckpointReader rd(path);
    EswtModel<T> model(cfg);
    std::vector<std::string> problems;
    visit_params<T>(model, [&](const std::string& name, Param<T>& p) {
        const ckpt::Entry* e = rd.find("param:" + name);
        if (!e) {
            problems.push_back("missing " + name);
            return;
        }
        if (e->dims != tensor_dims(p.value)) {
            problems.push_back("shape mismatch for " + name);
            return;
        }
        for (std::size_t i = 0; i < p.value.numel(); ++i)
            p.value.data[i] = static_cast<T>(rd.payload[e->offset + i]);
    });
    visit_buffers<T>(model, [&](const std::string& name, std::vector<T>& buf) {
        const ckpt::Entry* e = rd.find("buffer:" + name);
        if (!e) {
            problems.push_back("missing " + name);
            return;
        }
        if (e->count() != buf.size()) {
            problems.push_back("shape mismatch for " + name);
            return;
        }
        for (std::size_t i = 0; i < buf.size(); ++i)
            buf[i] = static_cast<T>(rd.payload[e->offset + i]);
    });
    if (!problems.empty()) {
        std::string msg = "checkpoint load failed:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw std::runtime_error(msg);
    }
    return model;
}

}  // namespace eswt
