#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "eswt/tensor.hpp"

namespace eswt {

// BT.601 studio-swing luminance on the 0-255 scale, from RGB in [0,1]:
// Y = 65.481 R + 128.553 G + 24.966 B + 16
template <typename T>
Tensor<T> rgb_to_y(const Tensor<T>& img) {
    if (img.c != 3) throw std::invalid_argument("rgb_to_y: expected 3 channels");
    Tensor<T> y(img.n, 1, img.h, img.w);
    const std::size_t plane = static_cast<std::size_t>(img.h) * img.w;
    for (int in = 0; in < img.n; ++in) {
        const T* r = img.plane(in, 0);
        const T* g = img.plane(in, 1);
        const T* b = img.plane(in, 2);
        T* yp = y.plane(in, 0);
        for (std::size_t i = 0; i < plane; ++i)
            yp[i] = static_cast<T>(65.481) * r[i] + static_cast<T>(128.553) * g[i] +
                    static_cast<T>(24.966) * b[i] + static_cast<T>(16);
    }
    return y;
}

// PSNR on the 0-255 scale after dropping `crop` border pixels on every side.
// A zero-MSE pair returns +infinity; CSV writers encode that as 99.0 dB with
// an explicit flag column.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, int crop = 0) {
    a.require_same_shape(b, "psnr");
    if (crop < 0 || 2 * crop >= a.h || 2 * crop >= a.w)
        throw std::invalid_argument("psnr: crop too large for image");
    double se = 0;
    std::size_t count = 0;
    for (int in = 0; in < a.n; ++in)
        for (int ic = 0; ic < a.c; ++ic) {
            const T* ap = a.plane(in, ic);
            const T* bp = b.plane(in, ic);
            for (int y = crop; y < a.h - crop; ++y)
                for (int x = crop; x < a.w - crop; ++x) {
                    const double d = static_cast<double>(ap[y * a.w + x]) - bp[y * a.w + x];
                    se += d * d;
                    ++count;
                }
        }
    const double mse = se / static_cast<double>(count);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

constexpr double kPsnrSentinel = 99.0;

inline double psnr_for_csv(double value, bool* is_inf = nullptr) {
    const bool inf = std::isinf(value);
    if (is_inf) *is_inf = inf;
    return inf ? kPsnrSentinel : value;
}

namespace detail {
inline const std::vector<double>& ssim_window() {
    static const std::vector<double> win = [] {
        std::vector<double> w(11 * 11);
        const double sigma = 1.5;
        double sum = 0;
        for (int y = 0; y < 11; ++y)
            for (int x = 0; x < 11; ++x) {
                const double dy = y - 5, dx = x - 5;
                w[y * 11 + x] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
                sum += w[y * 11 + x];
            }
        for (auto& v : w) v /= sum;
        return w;
    }();
    return win;
}
}  // namespace detail

// Standard single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01,
// K2=0.03, L=255, averaged over valid window positions.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
    a.require_same_shape(b, "ssim");
    if (a.h < 11 || a.w < 11) throw std::invalid_argument("ssim: image dims must be >= 11");
    const auto& win = detail::ssim_window();
    const double C1 = (0.01 * 255) * (0.01 * 255);
    const double C2 = (0.03 * 255) * (0.03 * 255);
    double total = 0;
    std::size_t count = 0;
    for (int in = 0; in < a.n; ++in)
        for (int ic = 0; ic < a.c; ++ic) {
            const T* ap = a.plane(in, ic);
            const T* bp = b.plane(in, ic);
            for (int y = 0; y + 11 <= a.h; ++y)
                for (int x = 0; x + 11 <= a.w; ++x) {
                    double ma = 0, mb = 0;
                    for (int wy = 0; wy < 11; ++wy)
                        for (int wx = 0; wx < 11; ++wx) {
                            const double wv = win[wy * 11 + wx];
                            ma += wv * ap[(y + wy) * a.w + x + wx];
                            mb += wv * bp[(y + wy) * a.w + x + wx];
                        }
                    double va = 0, vb = 0, cov = 0;
                    for (int wy = 0; wy < 11; ++wy)
                        for (int wx = 0; wx < 11; ++wx) {
                            const double wv = win[wy * 11 + wx];
                            const double da = ap[(y + wy) * a.w + x + wx] - ma;
                            const double db = bp[(y + wy) * a.w + x + wx] - mb;
                            va += wv * da * da;
                            vb += wv * db * db;
                            cov += wv * da * db;
                        }
                    total += ((2 * ma * mb + C1) * (2 * cov + C2)) /
                             ((ma * ma + mb * mb + C1) * (va + vb + C2));
                    ++count;
                }
        }
    return total / static_cast<double>(count);
}

}  // namespace eswt
