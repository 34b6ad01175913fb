#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "eswt/tensor.hpp"

namespace eswt {

// Binary PPM (P6, 8-bit) in and out of (1, 3, H, W) tensors with values in
// [0,1]. The one image format the tools require; bit-exact and dependency
// free.

namespace detail {
inline int ppm_next_int(std::istream& is) {
    // skips whitespace and '#' comments
    int c = is.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = is.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = is.get();
    }
    if (c == EOF || !std::isdigit(c)) throw std::runtime_error("ppm: malformed header");
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = is.get();
    }
    return value;
}
}  // namespace detail

inline Tensor<float> load_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("ppm: cannot open " + path);
    char m0 = static_cast<char>(is.get()), m1 = static_cast<char>(is.get());
    if (m0 != 'P' || m1 != '6') throw std::runtime_error("ppm: bad magic in " + path);
    const int w = detail::ppm_next_int(is);
    const int h = detail::ppm_next_int(is);
    const int maxval = detail::ppm_next_int(is);
    if (maxval != 255) throw std::runtime_error("ppm: only maxval 255 supported in " + path);
    if (w < 1 || h < 1) throw std::runtime_error("ppm: bad dimensions in " + path);
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * 3);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!is) throw std::runtime_error("ppm: truncated pixel data in " + path);
    Tensor<float> img(1, 3, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(0, c, y, x) = raw[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0f;
    return img;
}

inline void save_ppm(const Tensor<float>& img, const std::string& path) {
    if (img.n != 1 || img.c != 3) throw std::invalid_argument("ppm: expected a (1,3,h,w) tensor");
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw std::runtime_error("ppm: cannot open " + tmp);
        os << "P6\n" << img.w << " " << img.h << "\n255\n";
        std::vector<unsigned char> raw(static_cast<std::size_t>(img.w) * img.h * 3);
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x)
                for (int c = 0; c < 3; ++c) {
                    const float v = std::min(std::max(img.at(0, c, y, x), 0.0f), 1.0f);
                    raw[(static_cast<std::size_t>(y) * img.w + x) * 3 + c] =
                        static_cast<unsigned char>(std::lround(v * 255.0f));
                }
        os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (!os) throw std::runtime_error("ppm: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace eswt
