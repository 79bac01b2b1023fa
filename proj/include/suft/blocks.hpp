#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "suft/errors.hpp"
#include "suft/rng.hpp"
#include "suft/tensor.hpp"

namespace suft {

/// Named flat view over one parameter array and its gradient accumulator.
template <typename S>
struct ParamView {
    std::string name;
    S* value = nullptr;
    S* grad = nullptr;
    Eigen::Index size = 0;
    std::vector<int> shape;
};

template <typename S>
using ParamVisitor = std::function<void(const ParamView<S>&)>;

/// Back-projection geometry per scale factor.
struct ProjectionSpec {
    int scale = 2;
    int kernel = 6;
    int stride = 2;
    int pad = 2;

    static ProjectionSpec for_scale(int s) {
        switch (s) {
            case 2: return {2, 6, 2, 2};
            case 4: return {4, 8, 4, 2};
            case 8: return {8, 12, 8, 2};
            case 16: return {16, 20, 16, 2};
            default: throw ConfigError("ProjectionSpec: scale must be in {2,4,8,16}");
        }
    }
};

inline int conv_out_dim(int in, int k, int stride, int pad) {
    const int span = in + 2 * pad - k;
    if (span < 0 || span % stride != 0)
        throw ShapeError("convolution geometry does not tile the input");
    return span / stride + 1;
}

/// Unfolds (C,H,W) into a (C*k*k) x (out_h*out_w) patch matrix, zero padding.
template <typename S>
RowMatX<S> im2col(const Tensor<S>& in, int k, int stride, int pad) {
    const int oh = conv_out_dim(in.height, k, stride, pad);
    const int ow = conv_out_dim(in.width, k, stride, pad);
    RowMatX<S> col(static_cast<Eigen::Index>(in.channels) * k * k,
                   static_cast<Eigen::Index>(oh) * ow);
    for (int c = 0; c < in.channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const Eigen::Index r = (static_cast<Eigen::Index>(c) * k + ky) * k + kx;
                S* dst = col.data() + r * col.cols();
                for (int oy = 0; oy < oh; ++oy) {
                    const int y = oy * stride - pad + ky;
                    S* drow = dst + static_cast<Eigen::Index>(oy) * ow;
                    if (y < 0 || y >= in.height) {
                        std::fill(drow, drow + ow, S(0));
                        continue;
                    }
                    for (int ox = 0; ox < ow; ++ox) {
                        const int x = ox * stride - pad + kx;
                        drow[ox] = (x < 0 || x >= in.width) ? S(0) : in(c, y, x);
                    }
                }
            }
        }
    }
    return col;
}

/// Adjoint of im2col: scatters patch columns back into (C,H,W), accumulating.
template <typename S>
void col2im_add(const RowMatX<S>& col, int k, int stride, int pad, Tensor<S>& out) {
    const int oh = conv_out_dim(out.height, k, stride, pad);
    const int ow = conv_out_dim(out.width, k, stride, pad);
    if (col.rows() != static_cast<Eigen::Index>(out.channels) * k * k ||
        col.cols() != static_cast<Eigen::Index>(oh) * ow)
        throw ShapeError("col2im_add: column matrix does not match geometry");
    for (int c = 0; c < out.channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const Eigen::Index r = (static_cast<Eigen::Index>(c) * k + ky) * k + kx;
                const S* src = col.data() + r * col.cols();
                for (int oy = 0; oy < oh; ++oy) {
                    const int y = oy * stride - pad + ky;
                    if (y < 0 || y >= out.height) continue;
                    const S* srow = src + static_cast<Eigen::Index>(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int x = ox * stride - pad + kx;
                        if (x >= 0 && x < out.width) out(c, y, x) += srow[ox];
                    }
                }
            }
        }
    }
}

namespace detail {

template <typename S, typename Mat>
void he_fill(Mat& w, Eigen::Index fan_in, SplitMix64& rng) {
    const S stddev = std::sqrt(S(2) / static_cast<S>(fan_in));
    S* p = w.data();
    for (Eigen::Index i = 0; i < w.size(); ++i)
        p[i] = static_cast<S>(rng.next_normal()) * stddev;
}

}  // namespace detail

/// 2D convolution evaluated as im2col + GEMM. Weight layout:
/// out_c x (in_c*k*k), row-major. pad < 0 selects "same" padding (k-1)/2.
template <typename S>
struct Conv2d {
    int in_c = 0, out_c = 0, k = 1, stride = 1, pad = 0;
    RowMatX<S> weight;
    VecX<S> bias;
    RowMatX<S> grad_weight;
    VecX<S> grad_bias;
    std::vector<Tensor<S>> cached_x;

    Conv2d() = default;
    Conv2d(int in_channels, int out_channels, int kernel, int stride_ = 1, int pad_ = -1)
        : in_c(in_channels), out_c(out_channels), k(kernel), stride(stride_),
          pad(pad_ >= 0 ? pad_ : (kernel - 1) / 2) {
        if (in_c < 1 || out_c < 1 || k < 1 || stride < 1)
            throw ConfigError("Conv2d: invalid geometry");
        const Eigen::Index cols = static_cast<Eigen::Index>(in_c) * k * k;
        weight = RowMatX<S>::Zero(out_c, cols);
        grad_weight = RowMatX<S>::Zero(out_c, cols);
        bias = VecX<S>::Zero(out_c);
        grad_bias = VecX<S>::Zero(out_c);
    }

    void init(SplitMix64& rng) {
        detail::he_fill<S>(weight, weight.cols(), rng);
        bias.setZero();
    }

    Tensor<S> forward(const Tensor<S>& x) {
        if (x.channels != in_c) throw ShapeError("Conv2d: channel mismatch");
        const int oh = conv_out_dim(x.height, k, stride, pad);
        const int ow = conv_out_dim(x.width, k, stride, pad);
        const RowMatX<S> col = im2col(x, k, stride, pad);
        Tensor<S> out(out_c, oh, ow);
        out.as_matrix().noalias() = weight * col;
        out.as_matrix().colwise() += bias;
        cached_x.push_back(x);
        return out;
    }

    Tensor<S> backward(const Tensor<S>& g) {
        if (cached_x.empty()) throw Error("Conv2d: backward without matching forward");
        Tensor<S> x = std::move(cached_x.back());
        cached_x.pop_back();
        const RowMatX<S> col = im2col(x, k, stride, pad);
        grad_weight.noalias() += g.as_matrix() * col.transpose();
        grad_bias.noalias() += g.as_matrix().rowwise().sum();
        const RowMatX<S> gcol = weight.transpose() * g.as_matrix();
        Tensor<S> gx(in_c, x.height, x.width);
        col2im_add(gcol, k, stride, pad, gx);
        return gx;
    }

    void zero_grad() { grad_weight.setZero(); grad_bias.setZero(); }
    void clear_cache() { cached_x.clear(); }

    void visit_params(const std::string& prefix, const ParamVisitor<S>& fn) {
        fn({prefix + ".weight", weight.data(), grad_weight.data(), weight.size(), {out_c, in_c, k, k}});
        fn({prefix + ".bias", bias.data(), grad_bias.data(), bias.size(), {out_c}});
    }
};

/// Transposed convolution, the exact adjoint of the Conv2d above.
/// Weight layout: in_c x (out_c*k*k), row-major.
template <typename S>
struct Deconv2d {
    int in_c = 0, out_c = 0, k = 1, stride = 1, pad = 0;
    RowMatX<S> weight;
    VecX<S> bias;
    RowMatX<S> grad_weight;
    VecX<S> grad_bias;
    std::vector<Tensor<S>> cached_x;

    Deconv2d() = default;
    Deconv2d(int in_channels, int out_channels, int kernel, int stride_, int pad_)
        : in_c(in_channels), out_c(out_channels), k(kernel), stride(stride_), pad(pad_) {
        if (in_c < 1 || out_c < 1 || k < 1 || stride < 1 || pad < 0)
            throw ConfigError("Deconv2d: invalid geometry");
        const Eigen::Index cols = static_cast<Eigen::Index>(out_c) * k * k;
        weight = RowMatX<S>::Zero(in_c, cols);
        grad_weight = RowMatX<S>::Zero(in_c, cols);
        bias = VecX<S>::Zero(out_c);
        grad_bias = VecX<S>::Zero(out_c);
    }

    void init(SplitMix64& rng) {
        detail::he_fill<S>(weight, static_cast<Eigen::Index>(in_c) * k * k, rng);
        bias.setZero();
    }

    Tensor<S> forward(const Tensor<S>& x) {
        if (x.channels != in_c) throw ShapeError("Deconv2d: channel mismatch");
        const int oh = (x.height - 1) * stride - 2 * pad + k;
        const int ow = (x.width - 1) * stride - 2 * pad + k;
        if (oh < 1 || ow < 1) throw ShapeError("Deconv2d: output dims collapse");
        RowMatX<S> colg(weight.cols(), x.pixels());
        colg.noalias() = weight.transpose() * x.as_matrix();
        Tensor<S> out(out_c, oh, ow);
        col2im_add(colg, k, stride, pad, out);
        for (int c = 0; c < out_c; ++c) out.channel(c) += bias[c];
        cached_x.push_back(x);
        return out;
    }

    Tensor<S> backward(const Tensor<S>& g) {
        if (cached_x.empty()) throw Error("Deconv2d: backward without matching forward");
        Tensor<S> x = std::move(cached_x.back());
        cached_x.pop_back();
        if (g.channels != out_c) throw ShapeError("Deconv2d: gradient channel mismatch");
        const RowMatX<S> G = im2col(g, k, stride, pad);
        grad_weight.noalias() += x.as_matrix() * G.transpose();
        for (int c = 0; c < out_c; ++c) grad_bias[c] += g.channel(c).sum();
        Tensor<S> gx(in_c, x.height, x.width);
        gx.as_matrix().noalias() = weight * G;
        return gx;
    }

    void zero_grad() { grad_weight.setZero(); grad_bias.setZero(); }
    void clear_cache() { cached_x.clear(); }

    void visit_params(const std::string& prefix, const ParamVisitor<S>& fn) {
        fn({prefix + ".weight", weight.data(), grad_weight.data(), weight.size(), {in_c, out_c, k, k}});
        fn({prefix + ".bias", bias.data(), grad_bias.data(), bias.size(), {out_c}});
    }
};

/// Parametric rectifier with one learnable slope shared across the layer.
template <typename S>
struct PReLU {
    S slope = S(0.25);
    S grad_slope = S(0);
    std::vector<Tensor<S>> cached_x;

    Tensor<S> forward(const Tensor<S>& x) {
        Tensor<S> out(x.channels, x.height, x.width);
        out.data = (x.data > S(0)).select(x.data, slope * x.data);
        cached_x.push_back(x);
        return out;
    }

    Tensor<S> backward(const Tensor<S>& g) {
        if (cached_x.empty()) throw Error("PReLU: backward without matching forward");
        Tensor<S> x = std::move(cached_x.back());
        cached_x.pop_back();
        grad_slope += ((x.data <= S(0)).select(g.data * x.data, ArrayX<S>::Zero(x.size()))).sum();
        Tensor<S> gx(x.channels, x.height, x.width);
        gx.data = (x.data > S(0)).select(g.data, slope * g.data);
        return gx;
    }

    void init(SplitMix64&) { slope = S(0.25); }
    void zero_grad() { grad_slope = S(0); }
    void clear_cache() { cached_x.clear(); }

    void visit_params(const std::string& prefix, const ParamVisitor<S>& fn) {
        fn({prefix + ".slope", &slope, &grad_slope, 1, {1}});
    }
};

template <typename S>
struct ReLU {
    std::vector<Tensor<S>> cached_x;

    Tensor<S> forward(const Tensor<S>& x) {
        Tensor<S> out(x.channels, x.height, x.width);
        out.data = x.data.max(S(0));
        cached_x.push_back(x);
        return out;
    }

    Tensor<S> backward(const Tensor<S>& g) {
        if (cached_x.empty()) throw Error("ReLU: backward without matching forward");
        Tensor<S> x = std::move(cached_x.back());
        cached_x.pop_back();
        Tensor<S> gx(x.channels, x.height, x.width);
        gx.data = (x.data > S(0)).select(g.data, ArrayX<S>::Zero(x.size()));
        return gx;
    }

    void init(SplitMix64&) {}
    void zero_grad() {}
    void clear_cache() { cached_x.clear(); }
    void visit_params(const std::string&, const ParamVisitor<S>&) {}
};

/// Squeeze-and-excitation style channel gate:
/// scale = sigmoid(W2 relu(W1 gap(x) + b1) + b2), out = x * scale.
template <typename S>
struct ChannelAttention {
    int channels = 0, reduction = 16;
    RowMatX<S> w1, w2;
    VecX<S> b1, b2;
    RowMatX<S> grad_w1, grad_w2;
    VecX<S> grad_b1, grad_b2;

    struct Cache {
        Tensor<S> x;
        VecX<S> pooled, u, hidden, scale;
    };
    std::vector<Cache> caches;

    ChannelAttention() = default;
    ChannelAttention(int c, int r) : channels(c), reduction(r) {
        if (r < 1 || c % r != 0)
            throw ConfigError("ChannelAttention: channels must be divisible by reduction");
        const int m = c / r;
        w1 = RowMatX<S>::Zero(m, c);
        grad_w1 = RowMatX<S>::Zero(m, c);
        b1 = VecX<S>::Zero(m);
        grad_b1 = VecX<S>::Zero(m);
        w2 = RowMatX<S>::Zero(c, m);
        grad_w2 = RowMatX<S>::Zero(c, m);
        b2 = VecX<S>::Zero(c);
        grad_b2 = VecX<S>::Zero(c);
    }

    void init(SplitMix64& rng) {
        detail::he_fill<S>(w1, channels, rng);
        detail::he_fill<S>(w2, channels / reduction, rng);
        b1.setZero();
        b2.setZero();
    }

    Tensor<S> forward(const Tensor<S>& x) {
        if (x.channels != channels) throw ShapeError("ChannelAttention: channel mismatch");
        Cache c;
        c.pooled = x.as_matrix().rowwise().mean();
        c.u.noalias() = w1 * c.pooled;
        c.u += b1;
        c.hidden = c.u.cwiseMax(S(0));
        VecX<S> v = w2 * c.hidden + b2;
        c.scale = (S(1) / (S(1) + (-v.array()).exp())).matrix();
        Tensor<S> out(x.channels, x.height, x.width);
        out.as_matrix() = x.as_matrix().array().colwise() * c.scale.array();
        c.x = x;
        caches.push_back(std::move(c));
        return out;
    }

    Tensor<S> backward(const Tensor<S>& g) {
        if (caches.empty()) throw Error("ChannelAttention: backward without matching forward");
        Cache c = std::move(caches.back());
        caches.pop_back();
        const S inv_hw = S(1) / static_cast<S>(c.x.pixels());
        VecX<S> gscale = (g.as_matrix().array() * c.x.as_matrix().array()).rowwise().sum().matrix();
        VecX<S> gv = (gscale.array() * c.scale.array() * (S(1) - c.scale.array())).matrix();
        grad_b2 += gv;
        grad_w2.noalias() += gv * c.hidden.transpose();
        VecX<S> ghidden = w2.transpose() * gv;
        VecX<S> gu = ((c.u.array() > S(0)).select(ghidden.array(), S(0))).matrix();
        grad_b1 += gu;
        grad_w1.noalias() += gu * c.pooled.transpose();
        VecX<S> gpooled = w1.transpose() * gu;
        Tensor<S> gx(channels, c.x.height, c.x.width);
        gx.as_matrix() = g.as_matrix().array().colwise() * c.scale.array();
        gx.as_matrix().array().colwise() += gpooled.array() * inv_hw;
        return gx;
    }

    void zero_grad() {
        grad_w1.setZero();
        grad_b1.setZero();
        grad_w2.setZero();
        grad_b2.setZero();
    }
    void clear_cache() { caches.clear(); }

    void visit_params(const std::string& prefix, const ParamVisitor<S>& fn) {
        const int m = channels / reduction;
        fn({prefix + ".w1", w1.data(), grad_w1.data(), w1.size(), {m, channels}});
        fn({prefix + ".b1", b1.data(), grad_b1.data(), b1.size(), {m}});
        fn({prefix + ".w2", w2.data(), grad_w2.data(), w2.size(), {channels, m}});
        fn({prefix + ".b2", b2.data(), grad_b2.data(), b2.size(), {channels}});
    }
};

/// Simplified residual block: out = x + conv3x3(relu(conv3x3(x))).
template <typename S>
struct ResidualBlock {
    Conv2d<S> conv1, conv2;
    ReLU<S> relu;

    ResidualBlock() = default;
    explicit ResidualBlock(int c) : conv1(c, c, 3), conv2(c, c, 3) {}

    Tensor<S> forward(const Tensor<S>& x) {
        Tensor<S> y = conv2.forward(relu.forward(conv1.forward(x)));
        y.data += x.data;
        return y;
    }

    Tensor<S> backward(const Tensor<S>& g) {
        Tensor<S> gx = conv1.backward(relu.backward(conv2.backward(g)));
        gx.data += g.data;
        return gx;
    }

    void init(SplitMix64& rng) {
        conv1.init(rng);
        conv2.init(rng);
    }
    void zero_grad() {
        conv1.zero_grad();
        conv2.zero_grad();
    }
    void clear_cache() {
        conv1.clear_cache();
        conv2.clear_cache();
        relu.clear_cache();
    }
    void visit_params(const std::string& prefix, const ParamVisitor<S>& fn) {
        conv1.visit_params(prefix + ".conv1", fn);
        conv2.visit_params(prefix + ".conv2", fn);
    }
};

/// Residual group: n blocks, each followed by channel attention, then a
/// trailing 3x3 convolution and a group-level skip.
template <typename S>
struct ResidualGroup {
    std::vector<ResidualBlock<S>> blocks;
    std::vector<ChannelAttention<S>> attns;
    Conv2d<S> tail;

    ResidualGroup() = default;
    ResidualGroup(int c, int n_blocks, int reduction) : tail(c, c, 3) {
        if (n_blocks < 1) throw ConfigError("ResidualGroup: n_blocks must be >= 1");
        blocks.reserve(n_blocks);
        attns.reserve(n_blocks);
        for (int i = 0; i < n_blocks; ++i) {
            blocks.emplace_back(c);
            attns.emplace_back(c, reduction);
        }
    }

    Tensor<S> forward(const Tensor<S>& x) {
        Tensor<S> h = x;
        for (std::size_t i = 0; i < blocks.size(); ++i)
            h = attns[i].forward(blocks[i].forward(h));
        Tensor<S> y = tail.forward(h);
        y.data += x.data;
        return y;
    }

    Tensor<S> backward(const Tensor<S>& g) {
        Tensor<S> gh = tail.backward(g);
        for (std::size_t i = blocks.size(); i-- > 0;)
            gh = blocks[i].backward(attns[i].backward(gh));
        gh.data += g.data;
        return gh;
    }

    void init(SplitMix64& rng) {
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            blocks[i].init(rng);
            attns[i].init(rng);
        }
        tail.init(rng);
    }
    void zero_grad() {
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            blocks[i].zero_grad();
            attns[i].zero_grad();
        }
        tail.zero_grad();
    }
    void clear_cache() {
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            blocks[i].clear_cache();
            attns[i].clear_cache();
        }
        tail.clear_cache();
    }
    void visit_params(const std::string& prefix, const ParamVisitor<S>& fn) {
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            blocks[i].visit_params(prefix + ".block" + std::to_string(i), fn);
            attns[i].visit_params(prefix + ".attn" + std::to_string(i), fn);
        }
        tail.visit_params(prefix + ".tail", fn);
    }
};

/// Back-projection up-projection unit:
/// H0 = a0(deconv0(x)); L0 = a1(conv0(H0)); e = L0 - x;
/// H1 = a2(deconv1(e)); out = H0 + H1.
template <typename S>
struct UpProjection {
    ProjectionSpec spec;
    Deconv2d<S> deconv0, deconv1;
    Conv2d<S> conv0;
    PReLU<S> act0, act1, act2;

    UpProjection() = default;
    UpProjection(int c, const ProjectionSpec& sp)
        : spec(sp),
          deconv0(c, c, sp.kernel, sp.stride, sp.pad),
          deconv1(c, c, sp.kernel, sp.stride, sp.pad),
          conv0(c, c, sp.kernel, sp.stride, sp.pad) {}

    Tensor<S> forward(const Tensor<S>& x) {
        Tensor<S> h0 = act0.forward(deconv0.forward(x));
        Tensor<S> e = act1.forward(conv0.forward(h0));
        e.data -= x.data;
        Tensor<S> out = act2.forward(deconv1.forward(e));
        out.data += h0.data;
        return out;
    }

    Tensor<S> backward(const Tensor<S>& g) {
        Tensor<S> ge = deconv1.backward(act2.backward(g));
        Tensor<S> gh0 = conv0.backward(act1.backward(ge));
        gh0.data += g.data;
        Tensor<S> gx = deconv0.backward(act0.backward(gh0));
        gx.data -= ge.data;
        return gx;
    }

    void init(SplitMix64& rng) {
        deconv0.init(rng);
        act0.init(rng);
        conv0.init(rng);
        act1.init(rng);
        deconv1.init(rng);
        act2.init(rng);
    }
    void zero_grad() {
        deconv0.zero_grad();
        conv0.zero_grad();
        deconv1.zero_grad();
        act0.zero_grad();
        act1.zero_grad();
        act2.zero_grad();
    }
    void clear_cache() {
        deconv0.clear_cache();
        conv0.clear_cache();
        deconv1.clear_cache();
        act0.clear_cache();
        act1.clear_cache();
        act2.clear_cache();
    }
    void visit_params(const std::string& prefix, const ParamVisitor<S>& fn) {
        deconv0.visit_params(prefix + ".deconv0", fn);
        act0.visit_params(prefix + ".act0", fn);
        conv0.visit_params(prefix + ".conv0", fn);
        act1.visit_params(prefix + ".act1", fn);
        deconv1.visit_params(prefix + ".deconv1", fn);
        act2.visit_params(prefix + ".act2", fn);
    }
};

/// Mirror down-projection unit. The leading convolution performs the
/// channel reduction (in_c -> out_c):
/// L0 = a0(conv0(x)); H0 = a1(deconv0(L0)); e = H0 - x;
/// L1 = a2(conv1(e)); out = L0 + L1.
template <typename S>
struct DownProjection {
    ProjectionSpec spec;
    Conv2d<S> conv0, conv1;
    Deconv2d<S> deconv0;
    PReLU<S> act0, act1, act2;

    DownProjection() = default;
    DownProjection(int in_c, int out_c, const ProjectionSpec& sp)
        : spec(sp),
          conv0(in_c, out_c, sp.kernel, sp.stride, sp.pad),
          conv1(in_c, out_c, sp.kernel, sp.stride, sp.pad),
          deconv0(out_c, in_c, sp.kernel, sp.stride, sp.pad) {}

    Tensor<S> forward(const Tensor<S>& x) {
        Tensor<S> l0 = act0.forward(conv0.forward(x));
        Tensor<S> e = act1.forward(deconv0.forward(l0));
        e.data -= x.data;
        Tensor<S> out = act2.forward(conv1.forward(e));
        out.data += l0.data;
        return out;
    }

    Tensor<S> backward(const Tensor<S>& g) {
        Tensor<S> ge = conv1.backward(act2.backward(g));
        Tensor<S> gl0 = deconv0.backward(act1.backward(ge));
        gl0.data += g.data;
        Tensor<S> gx = conv0.backward(act0.backward(gl0));
        gx.data -= ge.data;
        return gx;
    }

    void init(SplitMix64& rng) {
        conv0.init(rng);
        act0.init(rng);
        deconv0.init(rng);
        act1.init(rng);
        conv1.init(rng);
        act2.init(rng);
    }
    void zero_grad() {
        conv0.zero_grad();
        conv1.zero_grad();
        deconv0.zero_grad();
        act0.zero_grad();
        act1.zero_grad();
        act2.zero_grad();
    }
    void clear_cache() {
        conv0.clear_cache();
        conv1.clear_cache();
        deconv0.clear_cache();
        act0.clear_cache();
        act1.clear_cache();
        act2.clear_cache();
    }
    void visit_params(const std::string& prefix, const ParamVisitor<S>& fn) {
        conv0.visit_params(prefix + ".conv0", fn);
        act0.visit_params(prefix + ".act0", fn);
        deconv0.visit_params(prefix + ".deconv0", fn);
        act1.visit_params(prefix + ".act1", fn);
        conv1.visit_params(prefix + ".conv1", fn);
        act2.visit_params(prefix + ".act2", fn);
    }
};

/// Stride-1 conv+relu pairs; stands in for the projection units in the
/// interpolated pre-upsampling ablation.
template <typename S>
struct ConvReluStack {
    std::vector<Conv2d<S>> convs;
    std::vector<ReLU<S>> relus;

    ConvReluStack() = default;
    ConvReluStack(int in_c, int out_c, int n_layers) {
        if (n_layers < 1) throw ConfigError("ConvReluStack: n_layers must be >= 1");
        convs.reserve(n_layers);
        relus.resize(n_layers);
        for (int i = 0; i < n_layers; ++i)
            convs.emplace_back(i == 0 ? in_c : out_c, out_c, 3);
    }

    Tensor<S> forward(const Tensor<S>& x) {
        Tensor<S> h = x;
        for (std::size_t i = 0; i < convs.size(); ++i)
            h = relus[i].forward(convs[i].forward(h));
        return h;
    }

    Tensor<S> backward(const Tensor<S>& g) {
        Tensor<S> gh = g;
        for (std::size_t i = convs.size(); i-- > 0;)
            gh = convs[i].backward(relus[i].backward(gh));
        return gh;
    }

    void init(SplitMix64& rng) {
        for (auto& c : convs) c.init(rng);
    }
    void zero_grad() {
        for (auto& c : convs) c.zero_grad();
    }
    void clear_cache() {
        for (std::size_t i = 0; i < convs.size(); ++i) {
            convs[i].clear_cache();
            relus[i].clear_cache();
        }
    }
    void visit_params(const std::string& prefix, const ParamVisitor<S>& fn) {
        for (std::size_t i = 0; i < convs.size(); ++i)
            convs[i].visit_params(prefix + ".conv" + std::to_string(i), fn);
    }
};

}  // namespace suft
