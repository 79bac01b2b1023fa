#pragma once

#include <string>

#include "suft/config.hpp"

namespace suft {

/// Subcommand bodies for the `suft` binary. All of them throw suft::Error
/// subclasses on failure; the CLI maps those to exit codes.

struct PrepareOptions {
    std::string data_root;
    std::string out_manifest;
    std::string split = "train";
    float d_max = 10.0f;
    float unit_to_cm = 100.0f;
};

/// Scans data_root for `*_depth.png` / `*_depth.raw` with `*_rgb.png`
/// siblings, validates each pair by loading it, and writes a manifest.
/// Returns the number of records written.
int cmd_prepare(const PrepareOptions& opts);

/// Trains for config.train.epochs epochs with periodic checkpoints and a
/// loss trace under paths.out_dir. Resumes from paths.resume when set.
void cmd_train(const RunConfig& config);

/// Evaluates a checkpoint over the test manifest; writes the model report,
/// the bicubic baseline report, and per-sample image exports. Returns the
/// number of per-sample failures.
int cmd_eval(const RunConfig& config);

struct InferOptions {
    std::string checkpoint;
    std::string depth_path;
    std::string rgb_path;
    std::string out_path = "prediction.png";
    float unit_to_cm = 100.0f;
};

/// Runs one LR depth + HR RGB pair through a trained model and writes the
/// 16-bit prediction PNG.
void cmd_infer(const InferOptions& opts);

/// Trains and evaluates the four (fusion mode x uncertainty) variants from a
/// shared seed; writes one report per variant plus a summary table.
void cmd_ablate(const RunConfig& config);

struct UncertaintyDemoOptions {
    std::string checkpoint;
    /// Either a manifest + record index (the LR input is synthesized at the
    /// checkpoint's scale) or an explicit LR depth + HR RGB pair.
    std::string manifest;
    int index = 0;
    std::string depth_path;
    std::string rgb_path;
    std::string out_path = "uncertainty.png";
    float unit_to_cm = 100.0f;
};

/// Writes the false-color pixel-space flip uncertainty map for one sample.
void cmd_uncertainty_demo(const UncertaintyDemoOptions& opts);

}  // namespace suft
