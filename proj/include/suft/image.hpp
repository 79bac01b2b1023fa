#pragma once

#include <string>

#include "suft/tensor.hpp"

namespace suft {

/// Single-channel depth with validity mask. Values are meters for NYU-style
/// data (unit_to_cm = 100) or disparity units reported as-is (unit_to_cm = 1).
struct DepthMap {
    Plane<float> values;   // H×W, valid values >= 0
    Mask valid_mask;       // H×W
    float unit_to_cm = 100.0f;

    int height() const { return static_cast<int>(values.rows()); }
    int width() const { return static_cast<int>(values.cols()); }

    void validate() const;
};

/// Registered 3-channel RGB guidance, each channel in [0, 1].
struct GuidanceImage {
    Tensor<float> values;  // 3×H×W

    int height() const { return values.height; }
    int width() const { return values.width; }

    void validate() const;
};

/// 16-bit grayscale PNG, value = millimeters. Returned values are meters,
/// zero pixels are marked invalid.
DepthMap read_depth_png(const std::string& path);

/// Writes meters as 16-bit millimeter PNG (clamped to [0, 65.535 m]).
/// Invalid pixels are written as 0.
void write_depth_png(const std::string& path, const DepthMap& depth);

/// Raw float file: two little-endian int32 (height, width), then
/// height*width little-endian float32 values stored as-is.
DepthMap read_depth_raw(const std::string& path, float unit_to_cm);
void write_depth_raw(const std::string& path, const Plane<float>& values);

/// 8-bit PNG, scaled to [0, 1]. Grayscale and palette inputs are expanded.
GuidanceImage read_rgb_png(const std::string& path);
void write_rgb_png(const std::string& path, const GuidanceImage& img);

/// 8-bit RGB rendering of a scalar map through a linear blue-to-red ramp
/// over [0, vmax]. vmax <= 0 renders all black.
void write_false_color_png(const std::string& path, const Plane<float>& values, float vmax);

}  // namespace suft
