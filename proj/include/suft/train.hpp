#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "suft/data.hpp"
#include "suft/network.hpp"

namespace suft {

struct TrainConfig {
    double lr0 = 1e-4;
    double decay_factor = 0.1;
    int decay_period = 100;
    int batch_size = 1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_opt = 1e-8;
    int epochs = 100;
    int patch_size = 256;
    std::uint64_t seed = 0;
    int checkpoint_every = 10;
    float d_max = 10.0f;  // normalization constant, captured from the manifest

    /// §4.2 schedule: lr 6e-5, halved every 70 epochs.
    static TrainConfig real_world() {
        TrainConfig c;
        c.lr0 = 6e-5;
        c.decay_factor = 0.5;
        c.decay_period = 70;
        return c;
    }

    void validate() const {
        if (lr0 <= 0) throw ConfigError("TrainConfig: lr0 must be > 0");
        if (decay_factor <= 0 || decay_period < 1)
            throw ConfigError("TrainConfig: invalid decay schedule");
        if (batch_size != 1) throw ConfigError("TrainConfig: only batch_size = 1 is supported");
        if (epochs < 0) throw ConfigError("TrainConfig: epochs must be >= 0");
        if (patch_size < 1) throw ConfigError("TrainConfig: patch_size must be >= 1");
        if (checkpoint_every < 1) throw ConfigError("TrainConfig: checkpoint_every must be >= 1");
        if (d_max <= 0) throw ConfigError("TrainConfig: d_max must be > 0");
    }
};

/// Piecewise-constant step schedule: lr0 * factor^floor(epoch / period).
inline double lr_for_epoch(int epoch, const TrainConfig& cfg) {
    if (epoch < 0) throw InvalidArgument("lr_for_epoch: epoch must be >= 0");
    return cfg.lr0 * std::pow(cfg.decay_factor, epoch / cfg.decay_period);
}

/// Mean absolute error over valid pixels.
template <typename S>
S l1_loss(const Plane<S>& pred, const Plane<S>& gt, const Mask& mask) {
    if (pred.rows() != gt.rows() || pred.cols() != gt.cols() || pred.rows() != mask.rows() ||
        pred.cols() != mask.cols())
        throw ShapeError("l1_loss: shape mismatch");
    const Eigen::Index n = mask.count();
    if (n == 0) throw InvalidArgument("l1_loss: mask has no valid pixels");
    const Plane<S> zero = Plane<S>::Zero(pred.rows(), pred.cols());
    return mask.select((pred - gt).abs(), zero).sum() / static_cast<S>(n);
}

template <typename S>
Plane<S> l1_loss_grad(const Plane<S>& pred, const Plane<S>& gt, const Mask& mask) {
    if (pred.rows() != gt.rows() || pred.cols() != gt.cols() || pred.rows() != mask.rows() ||
        pred.cols() != mask.cols())
        throw ShapeError("l1_loss_grad: shape mismatch");
    const Eigen::Index n = mask.count();
    if (n == 0) throw InvalidArgument("l1_loss_grad: mask has no valid pixels");
    const Plane<S> zero = Plane<S>::Zero(pred.rows(), pred.cols());
    return mask.select((pred - gt).sign() / static_cast<S>(n), zero);
}

/// First/second moment trees keyed by parameter name.
template <typename S>
struct AdamState {
    std::int64_t step = 0;
    std::map<std::string, std::pair<ArrayX<S>, ArrayX<S>>> moments;
};

/// One bias-corrected Adam update over every parameter the model exposes.
template <typename S, typename Model>
void adam_step(Model& model, AdamState<S>& st, double lr, const TrainConfig& cfg) {
    st.step += 1;
    const S b1 = static_cast<S>(cfg.beta1);
    const S b2 = static_cast<S>(cfg.beta2);
    const S eps = static_cast<S>(cfg.eps_opt);
    const S bc1 = S(1) - static_cast<S>(std::pow(cfg.beta1, static_cast<double>(st.step)));
    const S bc2 = S(1) - static_cast<S>(std::pow(cfg.beta2, static_cast<double>(st.step)));
    const S step_size = static_cast<S>(lr);
    model.visit_params([&](const ParamView<S>& p) {
        auto& mv = st.moments[p.name];
        if (mv.first.size() != p.size) {
            mv.first = ArrayX<S>::Zero(p.size);
            mv.second = ArrayX<S>::Zero(p.size);
        }
        Eigen::Map<ArrayX<S>> theta(p.value, p.size);
        Eigen::Map<const ArrayX<S>> g(p.grad, p.size);
        mv.first = b1 * mv.first + (S(1) - b1) * g;
        mv.second = b2 * mv.second + (S(1) - b2) * g.square();
        theta -= step_size * (mv.first / bc1) / ((mv.second / bc2).sqrt() + eps);
    });
}

struct TrainState {
    int epoch = 0;
    AdamState<float> adam;
};

struct TraceEntry {
    std::int64_t step = 0;
    int epoch = 0;
    double lr = 0;
    double loss = 0;
};

using TraceSink = std::function<void(const TraceEntry&)>;

/// One pass over the training manifest: seeded shuffle, one random patch per
/// sample, bicubic degradation, forward, masked L1, Adam. Increments
/// state.epoch when the pass completes.
void train_epoch(SuftNetwork<float>& net, const DatasetManifest& manifest,
                 const TrainConfig& cfg, TrainState& state, const TraceSink& sink = {});

/// Loss trace file: `step<TAB>epoch<TAB>lr<TAB>loss` lines.
void append_trace(const std::string& path, const TraceEntry& e);
std::vector<TraceEntry> read_trace(const std::string& path);

inline constexpr int kCheckpointFormatVersion = 1;

struct LoadedCheckpoint {
    NetworkConfig net_config;
    TrainConfig train_config;
    TrainState state;
    SuftNetwork<float> net;
};

/// Text manifest + keyed little-endian f32 tensor blobs + trailing CRC32.
/// Written atomically (temp file + rename).
void save_checkpoint(const std::string& path, SuftNetwork<float>& net,
                     const TrainConfig& train_config, const TrainState& state);
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace suft
