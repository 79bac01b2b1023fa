#pragma once

#include <utility>
#include <vector>

#include "suft/blocks.hpp"
#include "suft/tensor.hpp"

namespace suft {

/// |depth_hr - hflip(flipped_hr)| elementwise.
template <typename S>
Tensor<S> diff_map(const Tensor<S>& depth_hr, const Tensor<S>& flipped_hr) {
    require_same_shape(depth_hr, flipped_hr, "diff_map");
    Tensor<S> re = hflip(flipped_hr);
    Tensor<S> out(depth_hr.channels, depth_hr.height, depth_hr.width);
    out.data = (depth_hr.data - re.data).abs();
    return out;
}

/// Per-pixel mean and maximum over the channel axis.
template <typename S>
std::pair<Tensor<S>, Tensor<S>> channel_pool(const Tensor<S>& d) {
    Tensor<S> avg(1, d.height, d.width);
    Tensor<S> mx(1, d.height, d.width);
    const auto m = d.as_matrix();
    avg.as_matrix().row(0) = m.colwise().mean();
    mx.as_matrix().row(0) = m.colwise().maxCoeff();
    return {std::move(avg), std::move(mx)};
}

/// (x - min) / ((max - min) + eps); maps constants to all-zeros.
template <typename S>
Tensor<S> normalize_map(const Tensor<S>& x, S eps = S(1e-12)) {
    const S mn = x.data.minCoeff();
    const S mx = x.data.maxCoeff();
    Tensor<S> out(x.channels, x.height, x.width);
    out.data = (x.data - mn) / ((mx - mn) + eps);
    return out;
}

template <typename S>
Plane<S> normalize_map(const Plane<S>& x, S eps = S(1e-12)) {
    const S mn = x.minCoeff();
    const S mx = x.maxCoeff();
    return (x - mn) / ((mx - mn) + eps);
}

/// Staged Symmetric Uncertainty map: normalize(conv(concat(pool(diff)))).
/// The head convolution must map 2 channels to 1. Its cache entry is popped
/// again so the call leaves `head` as it was found.
template <typename S>
Tensor<S> symmetric_uncertainty(const Tensor<S>& depth_hr, const Tensor<S>& flipped_hr,
                                Conv2d<S>& head, S eps = S(1e-12)) {
    if (head.in_c != 2 || head.out_c != 1)
        throw ShapeError("symmetric_uncertainty: head must be a 2-in/1-out convolution");
    auto [avg, mx] = channel_pool(diff_map(depth_hr, flipped_hr));
    Tensor<S> h = head.forward(concat_channels(avg, mx));
    head.cached_x.pop_back();
    return normalize_map(h, eps);
}

/// Channel average+max pooling with cached argmax routing for backward.
template <typename S>
struct ChannelPoolOp {
    struct Cache {
        int channels = 0;
        std::vector<int> argmax;
    };
    std::vector<Cache> caches;

    /// Returns a 2-channel map: channel 0 = mean, channel 1 = max.
    Tensor<S> forward(const Tensor<S>& d) {
        Tensor<S> out(2, d.height, d.width);
        Cache c;
        c.channels = d.channels;
        c.argmax.resize(static_cast<std::size_t>(d.pixels()));
        const auto m = d.as_matrix();
        out.as_matrix().row(0) = m.colwise().mean();
        for (Eigen::Index p = 0; p < m.cols(); ++p) {
            Eigen::Index arg = 0;
            out.data[d.pixels() + p] = m.col(p).maxCoeff(&arg);
            c.argmax[static_cast<std::size_t>(p)] = static_cast<int>(arg);
        }
        caches.push_back(std::move(c));
        return out;
    }

    Tensor<S> backward(const Tensor<S>& g) {
        if (caches.empty()) throw Error("ChannelPoolOp: backward without matching forward");
        Cache c = std::move(caches.back());
        caches.pop_back();
        Tensor<S> gx(c.channels, g.height, g.width);
        const S inv_c = S(1) / static_cast<S>(c.channels);
        gx.as_matrix() = (g.as_matrix().row(0) * inv_c).replicate(c.channels, 1);
        const Eigen::Index hw = g.pixels();
        for (Eigen::Index p = 0; p < hw; ++p)
            gx.data[static_cast<Eigen::Index>(c.argmax[static_cast<std::size_t>(p)]) * hw + p] +=
                g.data[hw + p];
        return gx;
    }

    void clear_cache() { caches.clear(); }
};

/// Min-max normalization with cached extremum routing for backward.
template <typename S>
struct NormalizeMapOp {
    S eps = S(1e-12);
    struct Cache {
        Eigen::Index argmin = 0, argmax = 0;
        S inv_d = S(0);
        ArrayX<S> y;
    };
    std::vector<Cache> caches;

    Tensor<S> forward(const Tensor<S>& x) {
        Eigen::Index imin = 0, imax = 0;
        const S mn = x.data.minCoeff(&imin);
        const S mx = x.data.maxCoeff(&imax);
        const S d = (mx - mn) + eps;
        Tensor<S> out(x.channels, x.height, x.width);
        out.data = (x.data - mn) / d;
        caches.push_back({imin, imax, S(1) / d, out.data});
        return out;
    }

    Tensor<S> backward(const Tensor<S>& g) {
        if (caches.empty()) throw Error("NormalizeMapOp: backward without matching forward");
        Cache c = std::move(caches.back());
        caches.pop_back();
        const S s1 = g.data.sum();
        const S sy = (g.data * c.y).sum();
        Tensor<S> gx(g.channels, g.height, g.width);
        gx.data = g.data * c.inv_d;
        gx.data[c.argmin] -= (s1 - sy) * c.inv_d;
        gx.data[c.argmax] -= sy * c.inv_d;
        return gx;
    }

    void clear_cache() { caches.clear(); }
};

/// One SUFT transmission stage (Figure 3): project depth features to HR,
/// compute the Symmetric Uncertainty map from the mirrored branch, gate the
/// RGB features, concatenate, and map back to LR.
///
/// iterative=false replaces the projection units with stride-1 conv+relu
/// stacks (interpolated pre-upsampling ablation, where features already sit
/// at target resolution). uncertainty=false skips the mirrored branch and
/// gates with an all-ones map.
template <typename S>
struct SuftModule {
    int channels = 0;
    bool iterative = true;
    bool uncertainty = true;
    bool share_flip = true;

    UpProjection<S> up, up_flip;
    DownProjection<S> down;
    ConvReluStack<S> up_stack, up_stack_flip, down_stack;
    Conv2d<S> head;
    ChannelPoolOp<S> pool;
    NormalizeMapOp<S> norm;

    struct Cache {
        Tensor<S> sign_dt;
        Tensor<S> rgb;
        Tensor<S> m;
        bool used_uncertainty = true;
    };
    std::vector<Cache> caches;

    SuftModule() = default;
    SuftModule(int c, const ProjectionSpec& spec, bool iterative_, bool uncertainty_,
               bool share_flip_)
        : channels(c), iterative(iterative_), uncertainty(uncertainty_), share_flip(share_flip_) {
        if (iterative) {
            up = UpProjection<S>(c, spec);
            if (uncertainty && !share_flip) up_flip = UpProjection<S>(c, spec);
            down = DownProjection<S>(2 * c, c, spec);
        } else {
            up_stack = ConvReluStack<S>(c, c, 2);
            if (uncertainty && !share_flip) up_stack_flip = ConvReluStack<S>(c, c, 2);
            down_stack = ConvReluStack<S>(2 * c, c, 2);
        }
        if (uncertainty) head = Conv2d<S>(2, 1, 7, 1, 3);
    }

    Tensor<S> project(const Tensor<S>& x) {
        return iterative ? up.forward(x) : up_stack.forward(x);
    }
    Tensor<S> project_flip(const Tensor<S>& x) {
        if (share_flip) return project(x);
        return iterative ? up_flip.forward(x) : up_stack_flip.forward(x);
    }
    Tensor<S> project_backward(const Tensor<S>& g) {
        return iterative ? up.backward(g) : up_stack.backward(g);
    }
    Tensor<S> project_flip_backward(const Tensor<S>& g) {
        if (share_flip) return project_backward(g);
        return iterative ? up_flip.backward(g) : up_stack_flip.backward(g);
    }

    /// f_rgb must match the projected depth resolution; m_out, when given,
    /// receives the stage's uncertainty map (all ones when uncertainty=off).
    Tensor<S> forward(const Tensor<S>& f_depth, const Tensor<S>& f_rgb,
                      Tensor<S>* m_out = nullptr) {
        Tensor<S> a = project(f_depth);
        if (f_rgb.channels != channels || a.height != f_rgb.height || a.width != f_rgb.width)
            throw ShapeError("SuftModule: RGB features do not match projected depth resolution");
        Cache c;
        c.used_uncertainty = uncertainty;
        Tensor<S> gated(channels, a.height, a.width);
        if (uncertainty) {
            Tensor<S> b = project_flip(hflip(f_depth));
            Tensor<S> dt(a.channels, a.height, a.width);
            dt.data = a.data - hflip(b).data;
            c.sign_dt = Tensor<S>(a.channels, a.height, a.width);
            c.sign_dt.data = dt.data.sign();
            Tensor<S> dabs(a.channels, a.height, a.width);
            dabs.data = dt.data.abs();
            c.m = norm.forward(head.forward(pool.forward(dabs)));
            for (int ch = 0; ch < channels; ++ch)
                gated.channel(ch) = f_rgb.channel(ch) * c.m.channel(0);
        } else {
            c.m = Tensor<S>(1, a.height, a.width);
            c.m.data.setOnes();
            gated.data = f_rgb.data;
        }
        if (m_out) *m_out = c.m;
        c.rgb = f_rgb;
        Tensor<S> fused = concat_channels(a, gated);
        caches.push_back(std::move(c));
        return iterative ? down.forward(fused) : down_stack.forward(fused);
    }

    /// Returns (grad wrt depth features, grad wrt RGB features).
    std::pair<Tensor<S>, Tensor<S>> backward(const Tensor<S>& g) {
        if (caches.empty()) throw Error("SuftModule: backward without matching forward");
        Cache c = std::move(caches.back());
        caches.pop_back();
        Tensor<S> gfused = iterative ? down.backward(g) : down_stack.backward(g);
        Tensor<S> ga = slice_channels(gfused, 0, channels);
        Tensor<S> ggated = slice_channels(gfused, channels, channels);
        Tensor<S> grgb(channels, ga.height, ga.width);
        if (!c.used_uncertainty) {
            grgb.data = ggated.data;
            return {project_backward(ga), std::move(grgb)};
        }
        for (int ch = 0; ch < channels; ++ch)
            grgb.channel(ch) = ggated.channel(ch) * c.m.channel(0);
        Tensor<S> gm(1, ga.height, ga.width);
        gm.as_matrix().row(0) =
            (ggated.as_matrix().array() * c.rgb.as_matrix().array()).colwise().sum().matrix();
        Tensor<S> gdabs = pool.backward(head.backward(norm.backward(gm)));
        Tensor<S> gdt(ga.channels, ga.height, ga.width);
        gdt.data = gdabs.data * c.sign_dt.data;
        // dt = a - hflip(b): the mirrored branch must unwind before the main
        // branch so the shared projection's cache stack pops in LIFO order.
        Tensor<S> gb(gdt.channels, gdt.height, gdt.width);
        gb.data = -hflip(gdt).data;
        Tensor<S> gx_flip = hflip(project_flip_backward(gb));
        ga.data += gdt.data;
        Tensor<S> gx = project_backward(ga);
        gx.data += gx_flip.data;
        return {std::move(gx), std::move(grgb)};
    }

    void init(SplitMix64& rng) {
        if (iterative) {
            up.init(rng);
            if (uncertainty && !share_flip) up_flip.init(rng);
        } else {
            up_stack.init(rng);
            if (uncertainty && !share_flip) up_stack_flip.init(rng);
        }
        if (uncertainty) head.init(rng);
        if (iterative)
            down.init(rng);
        else
            down_stack.init(rng);
    }

    void zero_grad() {
        if (iterative) {
            up.zero_grad();
            if (uncertainty && !share_flip) up_flip.zero_grad();
            down.zero_grad();
        } else {
            up_stack.zero_grad();
            if (uncertainty && !share_flip) up_stack_flip.zero_grad();
            down_stack.zero_grad();
        }
        if (uncertainty) head.zero_grad();
    }

    void clear_cache() {
        if (iterative) {
            up.clear_cache();
            if (uncertainty && !share_flip) up_flip.clear_cache();
            down.clear_cache();
        } else {
            up_stack.clear_cache();
            if (uncertainty && !share_flip) up_stack_flip.clear_cache();
            down_stack.clear_cache();
        }
        if (uncertainty) head.clear_cache();
        pool.clear_cache();
        norm.clear_cache();
        caches.clear();
    }

    void visit_params(const std::string& prefix, const ParamVisitor<S>& fn) {
        if (iterative) {
            up.visit_params(prefix + ".up", fn);
            if (uncertainty && !share_flip) up_flip.visit_params(prefix + ".up_flip", fn);
        } else {
            up_stack.visit_params(prefix + ".up", fn);
            if (uncertainty && !share_flip) up_stack_flip.visit_params(prefix + ".up_flip", fn);
        }
        if (uncertainty) head.visit_params(prefix + ".head", fn);
        if (iterative)
            down.visit_params(prefix + ".down", fn);
        else
            down_stack.visit_params(prefix + ".down", fn);
    }
};

}  // namespace suft
