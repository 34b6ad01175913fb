#include <catch2/catch.hpp>

#include <algorithm>

#include "eswt/windowing.hpp"
#include "test_util.hpp"

using namespace eswt;
using testutil::max_abs_diff;
using testutil::random_tensor;

TEST_CASE("pad_to_multiple pads 64x64 to 72x66 for a (24,6) window") {
    Tensor<float> x = random_tensor<float>(1, 2, 64, 64, 1);
    PadRecord rec;
    Tensor<float> p = pad_to_multiple(x, 24, 6, &rec);
    REQUIRE(p.h == 72);
    REQUIRE(p.w == 66);
    REQUIRE(rec.pad_h == 8);
    REQUIRE(rec.pad_w == 2);
    REQUIRE(max_abs_diff(crop_pad(p, rec), x) == 0.0);
}

TEST_CASE("pad_to_multiple leaves divisible maps untouched") {
    Tensor<float> x = random_tensor<float>(1, 1, 48, 12, 2);
    PadRecord rec;
    Tensor<float> p = pad_to_multiple(x, 24, 6, &rec);
    REQUIRE(rec.pad_h == 0);
    REQUIRE(rec.pad_w == 0);
    REQUIRE(max_abs_diff(p, x) == 0.0);
}

TEST_CASE("pad_to_multiple reflects without repeating the border pixel") {
    Tensor<float> x(1, 1, 3, 1);
    x.data = {1.0f, 2.0f, 3.0f};
    PadRecord rec;
    Tensor<float> p = pad_to_multiple(x, 5, 1, &rec);
    REQUIRE(p.h == 5);
    // reflect-101: 1 2 3 2 1
    REQUIRE(p.data[3] == 2.0f);
    REQUIRE(p.data[4] == 1.0f);
}

TEST_CASE("pad_to_multiple falls back to replicate when pad >= dim") {
    Tensor<float> x(1, 1, 2, 2);
    x.data = {1.0f, 2.0f, 3.0f, 4.0f};
    PadRecord rec;
    Tensor<float> p = pad_to_multiple(x, 7, 2, &rec);  // pad_h = 5 >= 2
    REQUIRE(p.h == 7);
    REQUIRE(p.at(0, 0, 6, 0) == 3.0f);  // replicated last row
    REQUIRE(max_abs_diff(crop_pad(p, rec), x) == 0.0);
}

TEST_CASE("partition counts and layouts") {
    Tensor<float> x = random_tensor<float>(1, 1, 4, 4, 3);
    WindowedTensor<float> rows = partition(x, WindowSpec(1, 4));
    REQUIRE(rows.windows.n == 4);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) REQUIRE(rows.windows.at(r, 0, 0, c) == x.at(0, 0, r, c));

    WindowedTensor<float> whole = partition(x, WindowSpec(4, 4));
    REQUIRE(whole.windows.n == 1);
    REQUIRE(max_abs_diff(whole.windows, x) == 0.0);

    Tensor<float> big = random_tensor<float>(1, 1, 72, 72, 4);
    REQUIRE(partition(big, WindowSpec(24, 6)).windows.n == 36);

    REQUIRE_THROWS_AS(partition(x, WindowSpec(3, 4)), std::invalid_argument);
}

TEST_CASE("partition/reverse is an exact bijection over 200 random cases") {
    for (int trial = 0; trial < 200; ++trial) {
        Rng rng = derive_rng(100 + trial, "winprop");
        const int wh = 1 + static_cast<int>(rng.below(8));
        const int ww = 1 + static_cast<int>(rng.below(8));
        const int gy = 1 + static_cast<int>(rng.below(4));
        const int gx = 1 + static_cast<int>(rng.below(4));
        const int n = 1 + static_cast<int>(rng.below(2));
        const int c = 1 + static_cast<int>(rng.below(5));
        Tensor<float> x = random_uniform<float>(n, c, wh * gy, ww * gx, rng);
        WindowedTensor<float> wt = partition(x, WindowSpec(wh, ww));
        REQUIRE(max_abs_diff(reverse(wt), x) == 0.0);
    }
    // striped extremes
    Tensor<float> tall = random_tensor<float>(1, 3, 36, 8, 900);
    REQUIRE(max_abs_diff(reverse(partition(tall, WindowSpec(36, 1))), tall) == 0.0);
    REQUIRE(max_abs_diff(reverse(partition(tall, WindowSpec(1, 8))), tall) == 0.0);
}

TEST_CASE("reverse rejects inconsistent metadata") {
    Tensor<float> x = random_tensor<float>(1, 1, 4, 4, 5);
    WindowedTensor<float> wt = partition(x, WindowSpec(2, 2));
    wt.orig_c = 3;
    REQUIRE_THROWS_AS(reverse(wt), std::invalid_argument);
}

TEST_CASE("cyclic shift basics") {
    Tensor<float> x = random_tensor<float>(1, 2, 5, 7, 6);
    REQUIRE(max_abs_diff(cyclic_shift(x, 0, 0), x) == 0.0);
    REQUIRE(max_abs_diff(inverse_shift(cyclic_shift(x, 2, 3), 2, 3), x) == 0.0);

    Tensor<float> spot(1, 1, 4, 4);
    spot.at(0, 0, 0, 0) = 1.0f;
    Tensor<float> rolled = cyclic_shift(spot, 1, 1);
    REQUIRE(rolled.at(0, 0, 3, 3) == 1.0f);
}

TEST_CASE("cyclic shift preserves sums and value multisets") {
    for (int trial = 0; trial < 20; ++trial) {
        Rng rng = derive_rng(300 + trial, "shiftprop");
        Tensor<float> x = random_uniform<float>(1, 2, 6, 9, rng);
        Tensor<float> y = cyclic_shift(x, static_cast<int>(rng.below(12)),
                                       static_cast<int>(rng.below(12)));
        double sx = 0, sy = 0;
        for (float v : x.data) sx += v;
        for (float v : y.data) sy += v;
        REQUIRE(sx == Approx(sy).margin(1e-5));
        std::vector<float> a = x.data, b = y.data;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        REQUIRE(a == b);
    }
}

TEST_CASE("striped cost coefficient stays below the shifted one") {
    for (std::uint64_t C = 1; C <= 96; C += 5)
        for (std::uint64_t N = 1; N <= 1024; N *= 2) REQUIRE(2 * C + 2 * N < 6 * C + 4 * N);
}

TEST_CASE("WindowSpec validates its invariants") {
    REQUIRE_THROWS_AS(WindowSpec(0, 4), std::invalid_argument);
    REQUIRE_THROWS_AS(WindowSpec(4, 4, 4, 0), std::invalid_argument);
    const WindowSpec spec(24, 6);
    REQUIRE(spec.shift_y == 12);
    REQUIRE(spec.shift_x == 3);
    REQUIRE(spec.transposed().h == 6);
    REQUIRE(spec.transposed().shift_y == 3);
    REQUIRE(spec.pixels() == 144);
}
