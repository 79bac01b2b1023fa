#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "suft/blocks.hpp"
#include "suft/resample.hpp"
#include "suft/suft.hpp"

namespace suft {

struct NetworkConfig {
    int scale = 4;
    int base_channels = 64;
    int rgb_blocks = 3;
    int shallow_groups = 4;
    int shallow_blocks = 4;
    int deep_groups = 2;
    int deep_blocks = 8;
    int suft_stages = 3;
    enum class Fusion { iterative, pre_upsample };
    Fusion fusion_mode = Fusion::iterative;
    bool uncertainty = true;
    int attention_reduction = 16;
    bool share_flip_projection = true;
    std::uint64_t seed = 0;

    bool iterative() const { return fusion_mode == Fusion::iterative; }

    void validate() const {
        ProjectionSpec::for_scale(scale);
        if (base_channels < 1) throw ConfigError("NetworkConfig: base_channels must be >= 1");
        if (rgb_blocks < 1) throw ConfigError("NetworkConfig: rgb_blocks must be >= 1");
        if (shallow_groups < 1 || shallow_blocks < 1)
            throw ConfigError("NetworkConfig: shallow groups/blocks must be >= 1");
        if (deep_groups < 1 || deep_blocks < 1)
            throw ConfigError("NetworkConfig: deep groups/blocks must be >= 1");
        if (suft_stages < 1) throw ConfigError("NetworkConfig: suft_stages must be >= 1");
        if (suft_stages > rgb_blocks)
            throw ConfigError("NetworkConfig: suft_stages must not exceed rgb_blocks");
        if (suft_stages > shallow_groups)
            throw ConfigError("NetworkConfig: suft_stages must not exceed shallow_groups");
        if (attention_reduction < 1 || base_channels % attention_reduction != 0)
            throw ConfigError("NetworkConfig: base_channels must be divisible by attention_reduction");
    }
};

inline std::string fusion_mode_name(NetworkConfig::Fusion f) {
    return f == NetworkConfig::Fusion::iterative ? "iterative" : "pre_upsample";
}

inline std::string config_fingerprint(const NetworkConfig& c) {
    std::string s = "s" + std::to_string(c.scale) + "-c" + std::to_string(c.base_channels) +
                    "-r" + std::to_string(c.rgb_blocks) + "-g" + std::to_string(c.shallow_groups) +
                    "x" + std::to_string(c.shallow_blocks) + "-d" + std::to_string(c.deep_groups) +
                    "x" + std::to_string(c.deep_blocks) + "-t" + std::to_string(c.suft_stages) +
                    "-" + fusion_mode_name(c.fusion_mode) + (c.uncertainty ? "-su" : "-nosu") +
                    "-a" + std::to_string(c.attention_reduction) +
                    (c.share_flip_projection ? "" : "-unshared");
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char ch : s) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ull;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return s + "-" + std::string(hex, 8);
}

template <typename S>
struct ModelOutput {
    Plane<S> depth_sr;
    std::vector<Tensor<S>> uncertainty;  // one 1xHxW map per SUFT stage (diagnostics)
};

/// Full SUFT network: HR RGB branch, LR depth branch with shallow residual
/// groups interleaved with SUFT stages, multi-stage aggregation, a final
/// up-projection, deep residual groups, and a bicubic long skip.
template <typename S>
class SuftNetwork {
public:
    SuftNetwork() = default;

    explicit SuftNetwork(const NetworkConfig& cfg) : cfg_(cfg) {
        cfg.validate();
        const int c = cfg.base_channels;
        const ProjectionSpec spec = ProjectionSpec::for_scale(cfg.scale);
        conv_in_rgb_ = Conv2d<S>(3, c, 3);
        rgb_blocks_.reserve(cfg.rgb_blocks);
        for (int i = 0; i < cfg.rgb_blocks; ++i) rgb_blocks_.emplace_back(c);
        conv_in_depth_ = Conv2d<S>(1, c, 3);
        shallow_.reserve(cfg.shallow_groups);
        for (int i = 0; i < cfg.shallow_groups; ++i)
            shallow_.emplace_back(c, cfg.shallow_blocks, cfg.attention_reduction);
        stages_.reserve(cfg.suft_stages);
        for (int i = 0; i < cfg.suft_stages; ++i)
            stages_.emplace_back(c, spec, cfg.iterative(), cfg.uncertainty,
                                 cfg.share_flip_projection);
        agg_conv_ = Conv2d<S>(cfg.shallow_groups * c, c, 1);
        if (cfg.iterative())
            up_final_ = UpProjection<S>(c, spec);
        else
            up_final_stack_ = ConvReluStack<S>(c, c, 2);
        deep_.reserve(cfg.deep_groups);
        for (int i = 0; i < cfg.deep_groups; ++i)
            deep_.emplace_back(c, cfg.deep_blocks, cfg.attention_reduction);
        conv_out_ = Conv2d<S>(c, 1, 3);
    }

    const NetworkConfig& config() const { return cfg_; }

    void init_params(std::uint64_t seed) {
        cfg_.seed = seed;
        SplitMix64 rng(seed);
        conv_in_rgb_.init(rng);
        for (auto& b : rgb_blocks_) b.init(rng);
        conv_in_depth_.init(rng);
        for (int gi = 0; gi < cfg_.shallow_groups; ++gi) {
            shallow_[gi].init(rng);
            if (gi < cfg_.suft_stages) stages_[gi].init(rng);
        }
        agg_conv_.init(rng);
        if (cfg_.iterative())
            up_final_.init(rng);
        else
            up_final_stack_.init(rng);
        for (auto& g : deep_) g.init(rng);
        conv_out_.init(rng);
    }

    /// d_lr is the normalized 1xHxW depth plane; rgb the 3x(sH)x(sW) guide.
    /// Caches are retained for backward(); inference paths should use infer().
    ModelOutput<S> forward(const Plane<S>& d_lr, const Tensor<S>& rgb,
                           bool want_diagnostics = false) {
        const int h = static_cast<int>(d_lr.rows());
        const int w = static_cast<int>(d_lr.cols());
        if (h < 1 || w < 1) throw ShapeError("SuftNetwork: empty depth input");
        if (rgb.channels != 3) throw ShapeError("SuftNetwork: guidance must have 3 channels");
        if (rgb.height != cfg_.scale * h || rgb.width != cfg_.scale * w)
            throw ShapeError("SuftNetwork: guidance dims must be scale x depth dims");
        if (!d_lr.isFinite().all() || !rgb.data.isFinite().all())
            throw InvalidArgument("SuftNetwork: inputs must be finite");

        const int sh = cfg_.scale * h;
        const int sw = cfg_.scale * w;
        Plane<S> skip = bicubic_resample(d_lr, sh, sw);

        Tensor<S> r = conv_in_rgb_.forward(rgb);
        std::vector<Tensor<S>> rgb_taps;
        rgb_taps.reserve(rgb_blocks_.size());
        for (auto& b : rgb_blocks_) {
            r = b.forward(r);
            rgb_taps.push_back(r);
        }

        Tensor<S> d0(1, cfg_.iterative() ? h : sh, cfg_.iterative() ? w : sw);
        d0.channel(0) = cfg_.iterative() ? d_lr : skip;
        Tensor<S> d = conv_in_depth_.forward(d0);

        ModelOutput<S> out;
        std::vector<Tensor<S>> taps;
        taps.reserve(shallow_.size());
        for (int gi = 0; gi < cfg_.shallow_groups; ++gi) {
            d = shallow_[gi].forward(d);
            if (gi < cfg_.suft_stages) {
                Tensor<S> m;
                d = stages_[gi].forward(d, rgb_taps[gi], want_diagnostics ? &m : nullptr);
                if (want_diagnostics) out.uncertainty.push_back(std::move(m));
            }
            taps.push_back(d);
        }

        Tensor<S> agg = agg_conv_.forward(concat_channels(taps));
        Tensor<S> hr = cfg_.iterative() ? up_final_.forward(agg) : up_final_stack_.forward(agg);
        for (auto& g : deep_) hr = g.forward(hr);
        Tensor<S> resid = conv_out_.forward(hr);
        out.depth_sr = resid.channel(0) + skip;
        return out;
    }

    /// Forward without growing the layer caches.
    ModelOutput<S> infer(const Plane<S>& d_lr, const Tensor<S>& rgb,
                         bool want_diagnostics = false) {
        ModelOutput<S> out = forward(d_lr, rgb, want_diagnostics);
        clear_caches();
        return out;
    }

    /// Propagates the loss gradient wrt depth_sr into all parameter grads.
    void backward(const Plane<S>& g_sr) {
        const int c = cfg_.base_channels;
        Tensor<S> g(1, static_cast<int>(g_sr.rows()), static_cast<int>(g_sr.cols()));
        g.channel(0) = g_sr;
        Tensor<S> gh = conv_out_.backward(g);
        for (std::size_t i = deep_.size(); i-- > 0;) gh = deep_[i].backward(gh);
        Tensor<S> gagg = cfg_.iterative() ? up_final_.backward(gh) : up_final_stack_.backward(gh);
        Tensor<S> gcat = agg_conv_.backward(gagg);

        std::vector<Tensor<S>> grgb(static_cast<std::size_t>(cfg_.suft_stages));
        Tensor<S> gd = slice_channels(gcat, (cfg_.shallow_groups - 1) * c, c);
        for (int gi = cfg_.shallow_groups - 1; gi >= 0; --gi) {
            if (gi < cfg_.suft_stages) {
                auto [gdep, gr] = stages_[gi].backward(gd);
                gd = std::move(gdep);
                grgb[static_cast<std::size_t>(gi)] = std::move(gr);
            }
            gd = shallow_[gi].backward(gd);
            if (gi > 0) gd.data += slice_channels(gcat, (gi - 1) * c, c).data;
        }
        conv_in_depth_.backward(gd);

        const Tensor<S>& top = grgb[static_cast<std::size_t>(cfg_.suft_stages - 1)];
        Tensor<S> gr(c, top.height, top.width);
        for (int bi = cfg_.rgb_blocks - 1; bi >= 0; --bi) {
            if (bi < cfg_.suft_stages) gr.data += grgb[static_cast<std::size_t>(bi)].data;
            gr = rgb_blocks_[static_cast<std::size_t>(bi)].backward(gr);
        }
        conv_in_rgb_.backward(gr);
    }

    /// Eq. (9): |forward(x) - hflip(forward(hflip(x)))| in pixel space.
    Plane<S> pixel_space_uncertainty(const Plane<S>& d_lr, const Tensor<S>& rgb) {
        const Plane<S> a = infer(d_lr, rgb).depth_sr;
        const Plane<S> d_flip = d_lr.rowwise().reverse();
        const Plane<S> b = infer(d_flip, hflip(rgb)).depth_sr;
        return (a - b.rowwise().reverse()).abs();
    }

    void zero_grad() {
        conv_in_rgb_.zero_grad();
        for (auto& b : rgb_blocks_) b.zero_grad();
        conv_in_depth_.zero_grad();
        for (int gi = 0; gi < cfg_.shallow_groups; ++gi) {
            shallow_[gi].zero_grad();
            if (gi < cfg_.suft_stages) stages_[gi].zero_grad();
        }
        agg_conv_.zero_grad();
        if (cfg_.iterative())
            up_final_.zero_grad();
        else
            up_final_stack_.zero_grad();
        for (auto& g : deep_) g.zero_grad();
        conv_out_.zero_grad();
    }

    void clear_caches() {
        conv_in_rgb_.clear_cache();
        for (auto& b : rgb_blocks_) b.clear_cache();
        conv_in_depth_.clear_cache();
        for (int gi = 0; gi < cfg_.shallow_groups; ++gi) {
            shallow_[gi].clear_cache();
            if (gi < cfg_.suft_stages) stages_[gi].clear_cache();
        }
        agg_conv_.clear_cache();
        if (cfg_.iterative())
            up_final_.clear_cache();
        else
            up_final_stack_.clear_cache();
        for (auto& g : deep_) g.clear_cache();
        conv_out_.clear_cache();
    }

    void visit_params(const ParamVisitor<S>& fn) {
        conv_in_rgb_.visit_params("rgb.conv_in", fn);
        for (std::size_t i = 0; i < rgb_blocks_.size(); ++i)
            rgb_blocks_[i].visit_params("rgb.block" + std::to_string(i), fn);
        conv_in_depth_.visit_params("depth.conv_in", fn);
        for (int gi = 0; gi < cfg_.shallow_groups; ++gi) {
            shallow_[gi].visit_params("depth.group" + std::to_string(gi), fn);
            if (gi < cfg_.suft_stages)
                stages_[gi].visit_params("suft" + std::to_string(gi), fn);
        }
        agg_conv_.visit_params("agg", fn);
        if (cfg_.iterative())
            up_final_.visit_params("up_final", fn);
        else
            up_final_stack_.visit_params("up_final", fn);
        for (std::size_t i = 0; i < deep_.size(); ++i)
            deep_[i].visit_params("deep.group" + std::to_string(i), fn);
        conv_out_.visit_params("conv_out", fn);
    }

    Eigen::Index parameter_count() {
        Eigen::Index n = 0;
        visit_params([&](const ParamView<S>& p) { n += p.size; });
        return n;
    }

private:
    NetworkConfig cfg_;
    Conv2d<S> conv_in_rgb_;
    std::vector<ResidualBlock<S>> rgb_blocks_;
    Conv2d<S> conv_in_depth_;
    std::vector<ResidualGroup<S>> shallow_;
    std::vector<SuftModule<S>> stages_;
    Conv2d<S> agg_conv_;
    UpProjection<S> up_final_;
    ConvReluStack<S> up_final_stack_;
    std::vector<ResidualGroup<S>> deep_;
    Conv2d<S> conv_out_;
};

}  // namespace suft
