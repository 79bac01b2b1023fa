#pragma once

#include <string>
#include <utility>
#include <vector>

#include "suft/data.hpp"
#include "suft/network.hpp"

namespace suft {

/// RMSE in reporting units: sqrt(mean over valid pixels of
/// ((pred - gt) * unit_to_cm)^2). Accumulates in double.
template <typename S>
double rmse(const Plane<S>& pred, const Plane<S>& gt, const Mask& mask, double unit_to_cm) {
    if (pred.rows() != gt.rows() || pred.cols() != gt.cols() || pred.rows() != mask.rows() ||
        pred.cols() != mask.cols())
        throw ShapeError("rmse: shape mismatch");
    const Eigen::Index n = mask.count();
    if (n == 0) throw InvalidArgument("rmse: mask has no valid pixels");
    const Eigen::ArrayXX<double> err =
        ((pred.template cast<double>() - gt.template cast<double>()) * unit_to_cm).square();
    const Eigen::ArrayXX<double> zero = Eigen::ArrayXX<double>::Zero(pred.rows(), pred.cols());
    return std::sqrt(mask.select(err, zero).sum() / static_cast<double>(n));
}

/// Per-sample RMSE table plus its arithmetic mean.
struct MetricReport {
    std::string unit = "cm";  // "cm" or "disparity"
    int scale = 4;
    std::string fingerprint;
    std::vector<std::pair<std::string, double>> per_sample;
    double mean_rmse = 0.0;

    double recompute_mean() const;
    void save(const std::string& path) const;
    static MetricReport load(const std::string& path);
};

struct EvalOptions {
    std::string export_dir;     // empty: no image exports
    bool export_uncertainty = true;
    float d_max = 10.0f;
};

struct EvalResult {
    MetricReport report;
    /// (sample id, error message) for records that failed to evaluate.
    std::vector<std::pair<std::string, std::string>> failures;

    bool ok() const { return failures.empty(); }
};

/// Stable per-record identifier: depth filename stem minus any trailing
/// "_depth" suffix.
std::string sample_id(const ManifestRecord& record);

/// Runs the model over every record of a test-split manifest. Per-sample
/// failures are recorded and evaluation continues.
EvalResult evaluate(SuftNetwork<float>& net, const DatasetManifest& manifest,
                    const DegradationSpec& spec, const EvalOptions& opts = {});

/// Same metric path with bicubic upsampling as the predictor.
EvalResult baseline_bicubic(const DatasetManifest& manifest, const DegradationSpec& spec);

/// Writes `<id>_sr.png` (16-bit millimeters), `<id>_err.png` (false-color
/// absolute error, ramp over [0, max]), `<id>_unc<k>.png` (false-color, ramp
/// over [0, 1]) and `<id>_meta.txt` describing the ramps.
void export_maps(const std::string& out_dir, const std::string& id, const DepthMap& prediction,
                 const DepthMap& gt, const std::vector<Tensor<float>>& uncertainty);

}  // namespace suft
