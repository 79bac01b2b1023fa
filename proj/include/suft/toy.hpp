#pragma once

#include <cstdint>
#include <string>

namespace suft {

/// Parameters for the bundled synthetic RGB-D set: piecewise-constant depth
/// (gradient background + random rectangles and discs) with textured RGB
/// whose edges partially align with the depth edges.
struct ToySpec {
    int count = 5;
    int size = 96;
    std::uint64_t seed = 1;
    float d_max = 10.0f;
    std::string split = "train";
    bool holes = false;
    float unit_to_cm = 100.0f;
};

/// Writes `toy_<i>_depth.png` / `toy_<i>_rgb.png` pairs plus a manifest into
/// `dir` and returns the manifest path.
std::string make_toy_dataset(const std::string& dir, const ToySpec& spec);

}  // namespace suft
