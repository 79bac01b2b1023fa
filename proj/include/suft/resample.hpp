#pragma once

#include <array>
#include <cmath>

#include "suft/tensor.hpp"

namespace suft {

/// Keys cubic convolution kernel with a = -0.5.
template <typename S>
S cubic_weight(S t) {
    const S a = S(-0.5);
    const S x = std::abs(t);
    if (x <= S(1)) return ((a + S(2)) * x - (a + S(3))) * x * x + S(1);
    if (x < S(2)) return (((x - S(5)) * x + S(8)) * x - S(4)) * a;
    return S(0);
}

/// Mirrors an index into [0, n) with edge duplication: -1 -> 0, n -> n-1.
inline int reflect_index(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

namespace detail {

template <typename S>
struct CubicTaps {
    std::array<int, 4> index;
    std::array<S, 4> weight;
};

/// Tap table for one axis, half-pixel-center alignment, reflect padding.
template <typename S>
std::vector<CubicTaps<S>> cubic_tap_table(int in_n, int out_n) {
    std::vector<CubicTaps<S>> taps(out_n);
    const double ratio = static_cast<double>(in_n) / static_cast<double>(out_n);
    for (int j = 0; j < out_n; ++j) {
        const double src = (j + 0.5) * ratio - 0.5;
        const int base = static_cast<int>(std::floor(src));
        const double frac = src - base;
        for (int t = 0; t < 4; ++t) {
            taps[j].index[t] = reflect_index(base - 1 + t, in_n);
            taps[j].weight[t] = cubic_weight<S>(static_cast<S>(frac - (t - 1)));
        }
    }
    return taps;
}

/// 4-tap dot product with balanced pairing. The tree is symmetric under
/// reversal of the taps, which keeps resampling exactly flip-equivariant.
template <typename S>
S cubic_dot(const CubicTaps<S>& t, const S* v0, const S* v1, const S* v2, const S* v3) {
    const S p0 = t.weight[0] * *v0;
    const S p1 = t.weight[1] * *v1;
    const S p2 = t.weight[2] * *v2;
    const S p3 = t.weight[3] * *v3;
    return (p0 + p1) + (p2 + p3);
}

}  // namespace detail

/// Separable Keys bicubic resampling (a = -0.5), half-pixel-center grid,
/// reflect padding. Preserves constants exactly up to roundoff and is the
/// identity when dimensions are unchanged.
template <typename S>
Plane<S> bicubic_resample(const Plane<S>& img, int out_h, int out_w) {
    const int in_h = static_cast<int>(img.rows());
    const int in_w = static_cast<int>(img.cols());
    if (in_h < 1 || in_w < 1) throw InvalidArgument("bicubic_resample: empty input");
    if (out_h < 1 || out_w < 1) throw InvalidArgument("bicubic_resample: target dims must be positive");
    if (out_h == in_h && out_w == in_w) return img;

    const auto col_taps = detail::cubic_tap_table<S>(in_w, out_w);
    const auto row_taps = detail::cubic_tap_table<S>(in_h, out_h);

    // Horizontal pass, then vertical.
    Plane<S> mid(in_h, out_w);
    for (int y = 0; y < in_h; ++y) {
        const S* row = img.data() + static_cast<Eigen::Index>(y) * in_w;
        for (int x = 0; x < out_w; ++x) {
            const auto& t = col_taps[x];
            mid(y, x) = detail::cubic_dot(t, row + t.index[0], row + t.index[1], row + t.index[2], row + t.index[3]);
        }
    }
    Plane<S> out(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        const auto& t = row_taps[y];
        const S* r0 = mid.data() + static_cast<Eigen::Index>(t.index[0]) * out_w;
        const S* r1 = mid.data() + static_cast<Eigen::Index>(t.index[1]) * out_w;
        const S* r2 = mid.data() + static_cast<Eigen::Index>(t.index[2]) * out_w;
        const S* r3 = mid.data() + static_cast<Eigen::Index>(t.index[3]) * out_w;
        for (int x = 0; x < out_w; ++x)
            out(y, x) = detail::cubic_dot(t, r0 + x, r1 + x, r2 + x, r3 + x);
    }
    return out;
}

/// Channel-wise bicubic resampling of a feature map.
template <typename S>
Tensor<S> bicubic_resample(const Tensor<S>& t, int out_h, int out_w) {
    Tensor<S> out(t.channels, out_h, out_w);
    for (int c = 0; c < t.channels; ++c) {
        Plane<S> plane = t.channel(c);
        out.channel(c) = bicubic_resample(plane, out_h, out_w);
    }
    return out;
}

}  // namespace suft
