#pragma once

#include <string>
#include <utility>
#include <vector>

#include "suft/image.hpp"
#include "suft/resample.hpp"

namespace suft {

struct DegradationSpec {
    enum class Mode { synthetic_bicubic, provided_lr };
    Mode mode = Mode::synthetic_bicubic;
    int scale = 4;

    void validate() const;
};

bool valid_scale(int s);

struct ManifestRecord {
    std::string depth_path;
    std::string rgb_path;
    float unit_to_cm = 100.0f;
    std::string lr_path;  // optional 4th column, used when mode = provided_lr
};

/// Line-delimited dataset manifest. Header `split=train|test, d_max=<real>`,
/// then `depth_path<TAB>rgb_path<TAB>unit_to_cm[<TAB>lr_path]` records.
/// Relative record paths are resolved against the manifest's directory.
struct DatasetManifest {
    std::string split = "train";
    float d_max = 10.0f;
    std::vector<ManifestRecord> records;
    std::string base_dir;

    std::size_t count() const { return records.size(); }

    /// Record with relative paths resolved against base_dir.
    ManifestRecord resolved(std::size_t index) const;

    static DatasetManifest load(const std::string& path);
    void save(const std::string& path) const;
};

/// Registered (D_lr, I_g, D_hr) triple with a consistent scale factor.
struct SamplePair {
    DepthMap depth_hr;
    GuidanceImage guidance;
    DepthMap depth_lr;
    int scale = 1;

    void validate() const;
};

/// Synthesizes the LR depth by bicubic downsampling; the mask is reduced by
/// logical AND over each scale×scale cell.
DepthMap degrade(const DepthMap& depth_hr, const DegradationSpec& spec);

/// Co-located random crops from both modalities; the offset is drawn from a
/// generator seeded only by `seed`.
std::pair<DepthMap, GuidanceImage> crop_training_patch(const DepthMap& depth_hr,
                                                       const GuidanceImage& guidance,
                                                       int size, std::uint64_t seed);

/// values / d_max clamped to [0, 1].
Plane<float> normalize_depth(const DepthMap& d, float d_max);
Plane<float> denormalize_depth(const Plane<float>& normalized, float d_max);

/// Loads one HR depth + RGB pair. Depth source is chosen by extension:
/// .png (16-bit millimeters) or .raw (header + float32).
std::pair<DepthMap, GuidanceImage> load_sample(const ManifestRecord& record);

/// Loads and assembles the full training/eval triple for a record.
SamplePair load_sample_pair(const DatasetManifest& manifest, std::size_t index,
                            const DegradationSpec& spec);

}  // namespace suft
