#pragma once

#include <Eigen/Core>

#include <vector>

#include "suft/errors.hpp"
#include "suft/rng.hpp"

namespace suft {

template <typename S>
using Plane = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
using ArrayX = Eigen::Array<S, Eigen::Dynamic, 1>;

template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <typename S>
using RowMatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense C×H×W feature map, channel-major with row-major planes.
template <typename S>
struct Tensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    ArrayX<S> data;

    Tensor() = default;
    Tensor(int c, int h, int w) : channels(c), height(h), width(w), data(ArrayX<S>::Zero(static_cast<Eigen::Index>(c) * h * w)) {
        if (c < 1 || h < 1 || w < 1) throw ShapeError("Tensor dims must be >= 1");
    }

    Eigen::Index size() const { return data.size(); }
    int pixels() const { return height * width; }

    S& operator()(int c, int y, int x) { return data[(static_cast<Eigen::Index>(c) * height + y) * width + x]; }
    S operator()(int c, int y, int x) const { return data[(static_cast<Eigen::Index>(c) * height + y) * width + x]; }

    Eigen::Map<Plane<S>> channel(int c) {
        return Eigen::Map<Plane<S>>(data.data() + static_cast<Eigen::Index>(c) * pixels(), height, width);
    }
    Eigen::Map<const Plane<S>> channel(int c) const {
        return Eigen::Map<const Plane<S>>(data.data() + static_cast<Eigen::Index>(c) * pixels(), height, width);
    }

    /// Channels × pixels matrix view over the same storage.
    Eigen::Map<RowMatX<S>> as_matrix() {
        return Eigen::Map<RowMatX<S>>(data.data(), channels, pixels());
    }
    Eigen::Map<const RowMatX<S>> as_matrix() const {
        return Eigen::Map<const RowMatX<S>>(data.data(), channels, pixels());
    }

    bool same_shape(const Tensor& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }

    static Tensor zeros_like(const Tensor& o) { return Tensor(o.channels, o.height, o.width); }

    static Tensor random_normal(int c, int h, int w, SplitMix64& rng, S stddev = S(1)) {
        Tensor t(c, h, w);
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] = static_cast<S>(rng.next_normal()) * stddev;
        return t;
    }
};

inline void require_same_shape(int ac, int ah, int aw, int bc, int bh, int bw, const char* what) {
    if (ac != bc || ah != bh || aw != bw) throw ShapeError(std::string(what) + ": shape mismatch");
}

template <typename S>
void require_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* what) {
    require_same_shape(a.channels, a.height, a.width, b.channels, b.height, b.width, what);
}

/// Reverses the width axis. Involution: hflip(hflip(f)) == f.
template <typename S>
Tensor<S> hflip(const Tensor<S>& f) {
    Tensor<S> out(f.channels, f.height, f.width);
    for (int c = 0; c < f.channels; ++c)
        out.channel(c) = f.channel(c).rowwise().reverse();
    return out;
}

template <typename S>
Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.height != b.height || a.width != b.width)
        throw ShapeError("concat_channels: spatial dims differ");
    Tensor<S> out(a.channels + b.channels, a.height, a.width);
    out.data.head(a.size()) = a.data;
    out.data.tail(b.size()) = b.data;
    return out;
}

template <typename S>
Tensor<S> concat_channels(const std::vector<Tensor<S>>& parts) {
    if (parts.empty()) throw ShapeError("concat_channels: empty list");
    int c = 0;
    for (const auto& p : parts) {
        if (p.height != parts[0].height || p.width != parts[0].width)
            throw ShapeError("concat_channels: spatial dims differ");
        c += p.channels;
    }
    Tensor<S> out(c, parts[0].height, parts[0].width);
    Eigen::Index off = 0;
    for (const auto& p : parts) {
        out.data.segment(off, p.size()) = p.data;
        off += p.size();
    }
    return out;
}

/// Slices channels [begin, begin+count) into a new tensor.
template <typename S>
Tensor<S> slice_channels(const Tensor<S>& t, int begin, int count) {
    if (begin < 0 || count < 1 || begin + count > t.channels)
        throw ShapeError("slice_channels: range out of bounds");
    Tensor<S> out(count, t.height, t.width);
    out.data = t.data.segment(static_cast<Eigen::Index>(begin) * t.pixels(), out.size());
    return out;
}

}  // namespace suft
