#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "eswt/model.hpp"
#include "eswt/ops.hpp"
#include "eswt/rng.hpp"
#include "eswt/tensor.hpp"
#include "eswt/windowing.hpp"

namespace eswt {

// ---------------------------------------------------------------------------
// bicubic resampling (a = -0.5), antialiased when downscaling
// ---------------------------------------------------------------------------

namespace detail {

inline double cubic_kernel(double x) {
    constexpr double a = -0.5;
    x = std::abs(x);
    if (x < 1.0) return (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0;
    if (x < 2.0) return a * (x * x * x - 5.0 * x * x + 8.0 * x - 4.0);
    return 0.0;
}

struct ResampleTap {
    int first = 0;
    std::vector<double> weights;
};

// Taps for one output axis. When shrinking, the kernel is widened by the
// scale factor so the result is antialiased.
inline std::vector<ResampleTap> resample_taps(int in_dim, int out_dim) {
    const double ratio = static_cast<double>(in_dim) / out_dim;
    const double support = ratio > 1.0 ? 2.0 * ratio : 2.0;
    const double kscale = ratio > 1.0 ? 1.0 / ratio : 1.0;
    std::vector<ResampleTap> taps(out_dim);
    for (int i = 0; i < out_dim; ++i) {
        const double center = (i + 0.5) * ratio - 0.5;
        int lo = static_cast<int>(std::ceil(center - support));
        int hi = static_cast<int>(std::floor(center + support));
        ResampleTap t;
        t.first = lo;
        t.weights.resize(hi - lo + 1);
        double sum = 0;
        for (int j = lo; j <= hi; ++j) {
            const double w = cubic_kernel((j - center) * kscale);
            t.weights[j - lo] = w;
            sum += w;
        }
        for (auto& w : t.weights) w /= sum;
        taps[i] = std::move(t);
    }
    return taps;
}

inline int clamp_index(int i, int dim) { return std::min(std::max(i, 0), dim - 1); }

}  // namespace detail

// Separable bicubic resize to an arbitrary target size; edges replicate.
template <typename T>
Tensor<T> resize_bicubic(const Tensor<T>& x, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize_bicubic: bad target size");
    const auto row_taps = detail::resample_taps(x.h, out_h);
    const auto col_taps = detail::resample_taps(x.w, out_w);
    Tensor<T> mid(x.n, x.c, out_h, x.w);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            const T* xp = x.plane(in, ic);
            T* mp = mid.plane(in, ic);
            for (int y = 0; y < out_h; ++y) {
                const auto& t = row_taps[y];
                for (int xx = 0; xx < x.w; ++xx) {
                    double acc = 0;
                    for (std::size_t j = 0; j < t.weights.size(); ++j)
                        acc += t.weights[j] *
                               xp[detail::clamp_index(t.first + static_cast<int>(j), x.h) * x.w + xx];
                    mp[y * x.w + xx] = static_cast<T>(acc);
                }
            }
        }
    Tensor<T> out(x.n, x.c, out_h, out_w);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            const T* mp = mid.plane(in, ic);
            T* op = out.plane(in, ic);
            for (int y = 0; y < out_h; ++y)
                for (int xx = 0; xx < out_w; ++xx) {
                    const auto& t = col_taps[xx];
                    double acc = 0;
                    for (std::size_t j = 0; j < t.weights.size(); ++j)
                        acc += t.weights[j] *
                               mp[y * x.w + detail::clamp_index(t.first + static_cast<int>(j), x.w)];
                    op[y * out_w + xx] = static_cast<T>(acc);
                }
        }
    return out;
}

// Standard SR degradation: antialiased bicubic downscale by s, clamped to [0,1].
template <typename T>
Tensor<T> degrade_bicubic(const Tensor<T>& hr, int s) {
    if (s < 1) throw std::invalid_argument("degrade_bicubic: scale must be >= 1");
    if (hr.h % s != 0 || hr.w % s != 0)
        throw std::invalid_argument("degrade_bicubic: dims " + std::to_string(hr.h) + "x" +
                                    std::to_string(hr.w) + " not divisible by " + std::to_string(s));
    Tensor<T> lr = resize_bicubic(hr, hr.h / s, hr.w / s);
    for (auto& v : lr.data) v = std::min(std::max(v, T(0)), T(1));
    return lr;
}

// ---------------------------------------------------------------------------
// geometric augmentation helpers
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> rotate90(const Tensor<T>& x, int quarter_turns) {
    const int k = ((quarter_turns % 4) + 4) % 4;
    if (k == 0) return x;
    const bool swap = (k % 2) == 1;
    Tensor<T> out(x.n, x.c, swap ? x.w : x.h, swap ? x.h : x.w);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            const T* xp = x.plane(in, ic);
            T* op = out.plane(in, ic);
            for (int y = 0; y < x.h; ++y)
                for (int xx = 0; xx < x.w; ++xx) {
                    int oy, ox;
                    switch (k) {
                        case 1: oy = x.w - 1 - xx; ox = y; break;        // 90 deg ccw
                        case 2: oy = x.h - 1 - y; ox = x.w - 1 - xx; break;
                        default: oy = xx; ox = x.h - 1 - y; break;       // 270 deg ccw
                    }
                    op[oy * out.w + ox] = xp[y * x.w + xx];
                }
        }
    return out;
}

template <typename T>
Tensor<T> flip_horizontal(const Tensor<T>& x) {
    Tensor<T> out(x.n, x.c, x.h, x.w);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic) {
            const T* xp = x.plane(in, ic);
            T* op = out.plane(in, ic);
            for (int y = 0; y < x.h; ++y)
                for (int xx = 0; xx < x.w; ++xx) op[y * x.w + xx] = xp[y * x.w + (x.w - 1 - xx)];
        }
    return out;
}

// ---------------------------------------------------------------------------
// synthetic corpus
// ---------------------------------------------------------------------------

struct DatasetSpec {
    std::vector<Tensor<float>> images;  // HR, 3 channels, values in [0,1]
};

// Gradient base, sinusoidal gratings, soft-edged rectangles and checkerboards,
// mixed per image; deterministic in (seed, index).
inline Tensor<float> synth_image(std::uint64_t seed, std::uint64_t index, int size) {
    Rng rng = derive_rng(seed, "synth", index);
    Tensor<float> img(1, 3, size, size);
    const double gx = rng.uniform(-0.4, 0.4), gy = rng.uniform(-0.4, 0.4);
    const double base = rng.uniform(0.25, 0.75);
    std::vector<double> chan_off = {rng.uniform(-0.08, 0.08), rng.uniform(-0.08, 0.08),
                                    rng.uniform(-0.08, 0.08)};
    for (int cch = 0; cch < 3; ++cch) {
        float* p = img.plane(0, cch);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                p[y * size + x] = static_cast<float>(base + chan_off[cch] +
                                                     gx * (x / static_cast<double>(size) - 0.5) +
                                                     gy * (y / static_cast<double>(size) - 0.5));
    }
    const int n_gratings = 1 + static_cast<int>(rng.below(3));
    for (int g = 0; g < n_gratings; ++g) {
        const double freq = rng.uniform(2.0, size / 6.0);
        const double theta = rng.uniform(0.0, 3.14159265358979);
        const double phase = rng.uniform(0.0, 6.2831853);
        const double amp = rng.uniform(0.06, 0.22);
        const double fx = std::cos(theta) * freq / size, fy = std::sin(theta) * freq / size;
        for (int cch = 0; cch < 3; ++cch) {
            float* p = img.plane(0, cch);
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x)
                    p[y * size + x] +=
                        static_cast<float>(amp * std::sin(6.2831853 * (fx * x + fy * y) + phase));
        }
    }
    auto smoothstep = [](double e0, double e1, double v) {
        const double t = std::min(std::max((v - e0) / (e1 - e0), 0.0), 1.0);
        return t * t * (3.0 - 2.0 * t);
    };
    const int n_rects = 1 + static_cast<int>(rng.below(2));
    for (int r = 0; r < n_rects; ++r) {
        const double cx = rng.uniform(0.15, 0.85) * size, cy = rng.uniform(0.15, 0.85) * size;
        const double hw = rng.uniform(0.08, 0.3) * size, hh = rng.uniform(0.08, 0.3) * size;
        const double val = rng.uniform(-0.35, 0.35);
        for (int cch = 0; cch < 3; ++cch) {
            float* p = img.plane(0, cch);
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) {
                    const double ex = smoothstep(hw, hw - 1.2, std::abs(x - cx));
                    const double ey = smoothstep(hh, hh - 1.2, std::abs(y - cy));
                    p[y * size + x] += static_cast<float>(val * ex * ey);
                }
        }
    }
    if (rng.coin()) {
        const int cell = 3 + static_cast<int>(rng.below(5));
        const double amp = rng.uniform(0.1, 0.25);
        const int x0 = static_cast<int>(rng.below(size / 2)), y0 = static_cast<int>(rng.below(size / 2));
        const int x1 = std::min(size, x0 + size / 2), y1 = std::min(size, y0 + size / 2);
        for (int cch = 0; cch < 3; ++cch) {
            float* p = img.plane(0, cch);
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) {
                    const int par = ((x - x0) / cell + (y - y0) / cell) % 2;
                    p[y * size + x] += static_cast<float>(par ? amp : -amp);
                }
        }
    }
    for (auto& v : img.data) v = std::min(std::max(v, 0.0f), 1.0f);
    return img;
}

inline DatasetSpec synth_dataset(std::uint64_t seed, int count, int size) {
    if (count < 1) throw std::invalid_argument("synth_dataset: count must be >= 1");
    DatasetSpec ds;
    ds.images.reserve(count);
    for (int i = 0; i < count; ++i) ds.images.push_back(synth_image(seed, i, size));
    return ds;
}

// ---------------------------------------------------------------------------
// optimization
// ---------------------------------------------------------------------------

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard Adam with bias correction; zeroes gradients afterwards. t counts
// completed steps starting at 1.
template <typename T>
void adam_step(EswtModel<T>& model, double lr, const AdamConfig& cfg, std::int64_t t) {
    if (t < 1) throw std::invalid_argument("adam_step: t must be >= 1");
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    visit_params<T>(model, [&](const std::string& name, Param<T>& p) {
        for (std::size_t i = 0; i < p.value.numel(); ++i) {
            const double g = static_cast<double>(p.grad.data[i]);
            if (!std::isfinite(g))
                throw std::runtime_error("adam_step: non-finite gradient in " + name);
            const double m = cfg.beta1 * p.m.data[i] + (1.0 - cfg.beta1) * g;
            const double v = cfg.beta2 * p.v.data[i] + (1.0 - cfg.beta2) * g * g;
            p.m.data[i] = static_cast<T>(m);
            p.v.data[i] = static_cast<T>(v);
            const double mh = m / bc1, vh = v / bc2;
            p.value.data[i] -= static_cast<T>(lr * mh / (std::sqrt(vh) + cfg.eps));
        }
        p.zero_grad();
    });
}

// lr_end + 0.5*(lr_start - lr_end)*(1 + cos(pi*t/T)); endpoints are exact
inline double cosine_lr(double t, double T, double lr_start, double lr_end) {
    if (T <= 0 || t <= 0) return lr_start;
    if (t >= T) return lr_end;
    return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + std::cos(3.14159265358979323846 * t / T));
}

// ---------------------------------------------------------------------------
// flexible-window schedule
// ---------------------------------------------------------------------------

struct StageSpec {
    double fraction = 1.0;
    WindowSpec window;
    double lr_start = 5e-4;
    double lr_end = 5e-6;
};

struct TrainConfig {
    int total_iters = 500;
    int batch_size = 8;
    int lr_patch = 24;  // LR patch side
    int sr_scale = 2;
    std::vector<StageSpec> stages;
    AdamConfig adam;
    std::uint64_t seed = 0;
    bool augment = true;
    bool reset_adam_per_stage = false;  // Adam moments carry across stages by default

    void validate() const {
        if (total_iters < 1 || batch_size < 1 || lr_patch < 1 || sr_scale < 1)
            throw std::invalid_argument("TrainConfig: sizes must be >= 1");
        if (stages.empty()) throw std::invalid_argument("TrainConfig: needs at least one stage");
        double sum = 0;
        for (const auto& s : stages) {
            if (s.fraction <= 0) throw std::invalid_argument("TrainConfig: stage fraction <= 0");
            if (!(s.lr_start >= s.lr_end && s.lr_end > 0))
                throw std::invalid_argument("TrainConfig: need lr_start >= lr_end > 0");
            sum += s.fraction;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("TrainConfig: stage fractions must sum to 1");
    }
};

// Precomputed per-stage iteration ranges. Within a stage of length L the lr
// follows cosine annealing with endpoints hit exactly at the first and last
// iteration of the stage.
struct Schedule {
    struct Range {
        int begin = 0, end = 0;  // [begin, end)
        StageSpec stage;
    };
    std::vector<Range> ranges;

    int stage_index(int iter) const {
        for (std::size_t i = 0; i < ranges.size(); ++i)
            if (iter < ranges[i].end) return static_cast<int>(i);
        return static_cast<int>(ranges.size()) - 1;
    }
    const Range& range(int iter) const { return ranges[stage_index(iter)]; }

    WindowSpec window_at(int iter) const { return range(iter).stage.window; }

    double lr_at(int iter) const {
        const Range& r = range(iter);
        const int len = r.end - r.begin;
        return cosine_lr(static_cast<double>(iter - r.begin), static_cast<double>(len - 1),
                         r.stage.lr_start, r.stage.lr_end);
    }
};

inline Schedule flexible_schedule(const TrainConfig& cfg) {
    cfg.validate();
    Schedule sched;
    int begin = 0;
    double acc = 0;
    for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
        acc += cfg.stages[i].fraction;
        int end = (i + 1 == cfg.stages.size())
                      ? cfg.total_iters
                      : static_cast<int>(std::llround(acc * cfg.total_iters));
        end = std::min(std::max(end, begin + 1), cfg.total_iters);
        sched.ranges.push_back({begin, end, cfg.stages[i]});
        begin = end;
    }
    return sched;
}

// ---------------------------------------------------------------------------
// batch sampling
// ---------------------------------------------------------------------------

template <typename T>
struct Batch {
    Tensor<T> lr;
    Tensor<T> hr;
};

// Random HR crops degraded to LR pairs; rotation/flip applied to the HR crop
// before degradation so both sides of a pair see identical augmentation.
inline Batch<float> sample_batch(const DatasetSpec& ds, const TrainConfig& cfg, int iter) {
    if (ds.images.empty()) throw std::invalid_argument("sample_batch: empty dataset");
    Rng rng = derive_rng(cfg.seed, "batch", static_cast<std::uint64_t>(iter));
    const int hr_patch = cfg.lr_patch * cfg.sr_scale;
    Batch<float> batch;
    batch.lr = Tensor<float>(cfg.batch_size, 3, cfg.lr_patch, cfg.lr_patch);
    batch.hr = Tensor<float>(cfg.batch_size, 3, hr_patch, hr_patch);
    for (int b = 0; b < cfg.batch_size; ++b) {
        const Tensor<float>* img = nullptr;
        for (int attempt = 0; attempt < 64; ++attempt) {
            const auto& cand = ds.images[rng.below(ds.images.size())];
            if (cand.h >= hr_patch && cand.w >= hr_patch) {
                img = &cand;
                break;
            }
        }
        if (!img) throw std::runtime_error("sample_batch: no image large enough for the HR patch");
        const int oy = static_cast<int>(rng.below(img->h - hr_patch + 1));
        const int ox = static_cast<int>(rng.below(img->w - hr_patch + 1));
        Tensor<float> crop(1, 3, hr_patch, hr_patch);
        for (int cch = 0; cch < 3; ++cch) {
            const float* sp = img->plane(0, cch);
            float* dp = crop.plane(0, cch);
            for (int y = 0; y < hr_patch; ++y)
                for (int x = 0; x < hr_patch; ++x)
                    dp[y * hr_patch + x] = sp[(oy + y) * img->w + ox + x];
        }
        if (cfg.augment) {
            const int quarter = static_cast<int>(rng.below(4));
            const bool flip = rng.coin();
            crop = rotate90(crop, quarter);
            if (flip) crop = flip_horizontal(crop);
        }
        Tensor<float> lr = degrade_bicubic(crop, cfg.sr_scale);
        for (int cch = 0; cch < 3; ++cch) {
            std::copy_n(crop.plane(0, cch), static_cast<std::size_t>(hr_patch) * hr_patch,
                        batch.hr.plane(b, cch));
            std::copy_n(lr.plane(0, cch), static_cast<std::size_t>(cfg.lr_patch) * cfg.lr_patch,
                        batch.lr.plane(b, cch));
        }
    }
    return batch;
}

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

struct TrainRecord {
    int iter = 0;
    int stage = 0;
    WindowSpec window;
    double lr = 0;
    double loss = 0;
};

struct TrainCallbacks {
    // called after the metrics row is produced
    std::function<void(const TrainRecord&)> on_iteration;
    // called when a stage finishes (including the last); gets the 0-based
    // index of the completed stage
    std::function<void(int)> on_stage_end;
};

struct TrainAbort : std::runtime_error {
    int iter;
    explicit TrainAbort(int it)
        : std::runtime_error("non-finite loss at iteration " + std::to_string(it)), iter(it) {}
};

struct TrainState {
    std::int64_t adam_t = 0;
    int start_iter = 0;
};

// One optimization run. Deterministic in (seed, config); stage boundaries
// change only the window and learning rate unless reset_adam_per_stage asks
// for fresh moments.
template <typename T>
std::vector<TrainRecord> train_loop(EswtModel<T>& model, const DatasetSpec& ds,
                                    const TrainConfig& cfg, const TrainCallbacks& callbacks = {},
                                    TrainState* state = nullptr) {
    cfg.validate();
    const Schedule sched = flexible_schedule(cfg);
    std::vector<TrainRecord> log;
    std::int64_t adam_t = state ? state->adam_t : 0;
    const int start = state ? state->start_iter : 0;
    int prev_stage = start > 0 ? sched.stage_index(start - 1) : 0;
    for (int iter = start; iter < cfg.total_iters; ++iter) {
        const int stage = sched.stage_index(iter);
        if (stage != prev_stage) {
            if (callbacks.on_stage_end) callbacks.on_stage_end(prev_stage);
            if (cfg.reset_adam_per_stage) {
                visit_params<T>(model, [](const std::string&, Param<T>& p) {
                    p.m.fill(T(0));
                    p.v.fill(T(0));
                });
                adam_t = 0;
            }
            prev_stage = stage;
        }
        const WindowSpec window = sched.window_at(iter);
        const double lr = sched.lr_at(iter);

        Batch<float> fbatch = sample_batch(ds, cfg, iter);
        Tensor<T> lr_in = fbatch.lr.template cast<T>();
        Tensor<T> hr_target = fbatch.hr.template cast<T>();

        zero_grads(model);
        ModelCache<T> cache;
        Tensor<T> pred = forward(model, lr_in, Mode::train, window, &cache);
        const double loss = static_cast<double>(l1_loss(pred, hr_target));
        if (!std::isfinite(loss)) throw TrainAbort(iter);
        Tensor<T> gout = l1_loss_grad(pred, hr_target);
        backward(model, cache, gout);
        ++adam_t;
        adam_step(model, lr, cfg.adam, adam_t);

        TrainRecord rec{iter, stage, window, lr, loss};
        log.push_back(rec);
        if (callbacks.on_iteration) callbacks.on_iteration(rec);
    }
    if (callbacks.on_stage_end) callbacks.on_stage_end(prev_stage);
    if (state) {
        state->adam_t = adam_t;
        state->start_iter = cfg.total_iters;
    }
    return log;
}

}  // namespace eswt
