#include "suft/toy.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "suft/data.hpp"
#include "suft/image.hpp"
#include "suft/rng.hpp"

namespace fs = std::filesystem;

namespace suft {

namespace {

float uniform(SplitMix64& rng, float lo, float hi) {
    return lo + (hi - lo) * static_cast<float>(rng.next_double());
}

struct Shape {
    bool disc = false;
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // rect bounds, or disc bbox
    float cx = 0, cy = 0, r = 0;
    float depth = 1.0f;
    float color[3] = {0.5f, 0.5f, 0.5f};

    bool contains(int y, int x) const {
        if (!disc) return x >= x0 && x < x1 && y >= y0 && y < y1;
        const float dx = static_cast<float>(x) - cx;
        const float dy = static_cast<float>(y) - cy;
        return dx * dx + dy * dy <= r * r;
    }
};

}  // namespace

std::string make_toy_dataset(const std::string& dir, const ToySpec& spec) {
    if (spec.count < 1) throw InvalidArgument("make_toy_dataset: count must be >= 1");
    if (spec.size < 16) throw InvalidArgument("make_toy_dataset: size must be >= 16");
    fs::create_directories(dir);

    DatasetManifest manifest;
    manifest.split = spec.split;
    manifest.d_max = spec.d_max;
    manifest.base_dir = dir;

    const int n = spec.size;
    for (int i = 0; i < spec.count; ++i) {
        SplitMix64 rng(mix_seed(spec.seed, static_cast<std::uint64_t>(i), 0x70ff));

        const float base = uniform(rng, 2.0f, 6.0f);
        const float gx = uniform(rng, -1.5f, 1.5f);
        const float gy = uniform(rng, -1.5f, 1.5f);

        const int n_shapes = 3 + static_cast<int>(rng.next_below(4));
        std::vector<Shape> shapes(n_shapes);
        for (Shape& s : shapes) {
            s.disc = rng.next_below(2) == 0;
            s.depth = uniform(rng, 0.5f, 9.0f);
            for (float& c : s.color) c = uniform(rng, 0.1f, 0.9f);
            if (s.disc) {
                s.r = uniform(rng, n / 12.0f, n / 5.0f);
                s.cx = uniform(rng, s.r, n - s.r);
                s.cy = uniform(rng, s.r, n - s.r);
            } else {
                const int w = n / 8 + static_cast<int>(rng.next_below(n / 3));
                const int h = n / 8 + static_cast<int>(rng.next_below(n / 3));
                s.x0 = static_cast<int>(rng.next_below(std::max(1, n - w)));
                s.y0 = static_cast<int>(rng.next_below(std::max(1, n - h)));
                s.x1 = std::min(n, s.x0 + w);
                s.y1 = std::min(n, s.y0 + h);
            }
        }

        const int stripe_w = 4 + static_cast<int>(rng.next_below(6));
        const bool stripes_vertical = rng.next_below(2) == 0;
        float bg_color[3];
        for (float& c : bg_color) c = uniform(rng, 0.2f, 0.8f);

        DepthMap depth;
        depth.values = Plane<float>(n, n);
        depth.valid_mask = Mask::Constant(n, n, true);
        depth.unit_to_cm = spec.unit_to_cm;
        GuidanceImage rgb;
        rgb.values = Tensor<float>(3, n, n);

        for (int y = 0; y < n; ++y) {
            for (int x = 0; x < n; ++x) {
                float d = base + gx * (static_cast<float>(x) / n) +
                          gy * (static_cast<float>(y) / n);
                const float* col = bg_color;
                for (const Shape& s : shapes) {
                    if (s.contains(y, x)) {
                        d = s.depth;
                        col = s.color;
                    }
                }
                const int band = (stripes_vertical ? x : y) / stripe_w;
                const float tex = (band % 2 == 0) ? 1.0f : 0.78f;
                depth.values(y, x) = std::clamp(d, 0.3f, 9.5f);
                for (int c = 0; c < 3; ++c)
                    rgb.values.channel(c)(y, x) = std::clamp(col[c] * tex, 0.0f, 1.0f);
            }
        }

        if (spec.holes) {
            const int n_holes = 1 + static_cast<int>(rng.next_below(3));
            for (int hidx = 0; hidx < n_holes; ++hidx) {
                const float r = uniform(rng, 2.0f, n / 10.0f);
                const float cx = uniform(rng, 0.0f, static_cast<float>(n));
                const float cy = uniform(rng, 0.0f, static_cast<float>(n));
                for (int y = 0; y < n; ++y)
                    for (int x = 0; x < n; ++x) {
                        const float dx = static_cast<float>(x) - cx;
                        const float dy = static_cast<float>(y) - cy;
                        if (dx * dx + dy * dy <= r * r) {
                            depth.valid_mask(y, x) = false;
                            depth.values(y, x) = 0.0f;
                        }
                    }
            }
        }

        char stem[32];
        std::snprintf(stem, sizeof(stem), "toy_%03d", i);
        const std::string depth_name = std::string(stem) + "_depth.png";
        const std::string rgb_name = std::string(stem) + "_rgb.png";
        write_depth_png((fs::path(dir) / depth_name).string(), depth);
        write_rgb_png((fs::path(dir) / rgb_name).string(), rgb);
        manifest.records.push_back({depth_name, rgb_name, spec.unit_to_cm, ""});
    }

    const std::string manifest_path = (fs::path(dir) / "manifest.tsv").string();
    manifest.save(manifest_path);
    return manifest_path;
}

}  // namespace suft
