#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "suft/data.hpp"
#include "suft/image.hpp"

using namespace suft;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("suft_data_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

DepthMap ramp_depth(int h, int w, float unit_to_cm = 100.0f) {
    DepthMap d;
    d.values = Plane<float>(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            d.values(y, x) = 1.0f + 0.01f * static_cast<float>(y) +
                             0.02f * static_cast<float>(x) + ((x + y) % 5 == 0 ? 0.5f : 0.0f);
    d.valid_mask = Mask::Constant(h, w, true);
    d.unit_to_cm = unit_to_cm;
    return d;
}

GuidanceImage stripes_rgb(int h, int w) {
    GuidanceImage g;
    g.values = Tensor<float>(3, h, w);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                g.values.channel(c)(y, x) =
                    static_cast<float>(((x / 3 + y / 2 + c) % 4)) / 4.0f;
    return g;
}

}  // namespace

TEST_CASE("manifest round trip preserves header and records") {
    const fs::path dir = fresh_dir("manifest_rt");
    DatasetManifest m;
    m.split = "test";
    m.d_max = 7.5f;
    m.records.push_back({"a_depth.png", "a_rgb.png", 100.0f, ""});
    m.records.push_back({"b_depth.raw", "b_rgb.png", 1.0f, "b_lr.raw"});
    const std::string path = (dir / "manifest.tsv").string();
    m.save(path);

    const DatasetManifest r = DatasetManifest::load(path);
    CHECK(r.split == "test");
    CHECK(r.d_max == doctest::Approx(7.5f));
    REQUIRE(r.count() == 2);
    CHECK(r.records[0].depth_path == "a_depth.png");
    CHECK(r.records[0].lr_path.empty());
    CHECK(r.records[1].unit_to_cm == doctest::Approx(1.0f));
    CHECK(r.records[1].lr_path == "b_lr.raw");
    CHECK(r.base_dir == dir.string());

    const ManifestRecord abs0 = r.resolved(0);
    CHECK(abs0.depth_path == (dir / "a_depth.png").string());
    const ManifestRecord abs1 = r.resolved(1);
    CHECK(abs1.lr_path == (dir / "b_lr.raw").string());
    CHECK_THROWS_AS(r.resolved(2), InvalidArgument);
}

TEST_CASE("manifest loader rejects malformed files") {
    const fs::path dir = fresh_dir("manifest_bad");
    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream(dir / name) << text;
        return (dir / name).string();
    };
    CHECK_THROWS_AS(DatasetManifest::load((dir / "missing.tsv").string()), FileNotFound);
    CHECK_THROWS_AS(DatasetManifest::load(write("empty.tsv", "")), MalformedFile);
    CHECK_THROWS_AS(DatasetManifest::load(write("split.tsv", "split=val, d_max=10\n")),
                    MalformedFile);
    CHECK_THROWS_AS(DatasetManifest::load(write("nokey.tsv", "split=train\n")), MalformedFile);
    CHECK_THROWS_AS(
        DatasetManifest::load(write("unknown.tsv", "split=train, d_max=10, foo=1\n")),
        MalformedFile);
    CHECK_THROWS_AS(
        DatasetManifest::load(write("cols.tsv", "split=train, d_max=10\na.png\tb.png\n")),
        MalformedFile);
    CHECK_THROWS_AS(DatasetManifest::load(
                        write("unit.tsv", "split=train, d_max=10\na.png\tb.png\t-3\n")),
                    MalformedFile);
    CHECK_THROWS_AS(DatasetManifest::load(write("dmax.tsv", "split=train, d_max=0\n")),
                    MalformedFile);
    try {
        DatasetManifest::load(write("line.tsv", "split=train, d_max=10\na\tb\t100\nbad line\n"));
        FAIL("expected MalformedFile");
    } catch (const MalformedFile& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
}

TEST_CASE("degrade downsamples by bicubic and ANDs the mask") {
    DepthMap hr = ramp_depth(16, 24);
    hr.valid_mask(5, 9) = false;
    const DegradationSpec spec{DegradationSpec::Mode::synthetic_bicubic, 4};
    const DepthMap lr = degrade(hr, spec);
    CHECK(lr.height() == 4);
    CHECK(lr.width() == 6);
    CHECK(lr.unit_to_cm == hr.unit_to_cm);

    const Plane<double> ref = oracle::bicubic_dense(hr.values, 4, 6);
    CHECK((lr.values.cast<double>() - ref.max(0.0)).abs().maxCoeff() <= 1e-6);

    CHECK_FALSE(lr.valid_mask(1, 2));  // cell containing the hole
    CHECK(lr.valid_mask.count() == 23);
}

TEST_CASE("degrade preserves constants and clamps negatives") {
    DepthMap hr;
    hr.values = Plane<float>::Constant(8, 8, 2.0f);
    hr.valid_mask = Mask::Constant(8, 8, true);
    const DepthMap lr = degrade(hr, {DegradationSpec::Mode::synthetic_bicubic, 2});
    CHECK(((lr.values - 2.0f).abs().maxCoeff()) <= 1e-6f);
    CHECK((lr.values >= 0.0f).all());
}

TEST_CASE("degrade validates geometry") {
    DepthMap hr = ramp_depth(10, 10);
    CHECK_THROWS_AS(degrade(hr, {DegradationSpec::Mode::synthetic_bicubic, 4}), ShapeError);
    CHECK_THROWS_AS(degrade(hr, {DegradationSpec::Mode::synthetic_bicubic, 3}), ConfigError);
}

TEST_CASE("crop_training_patch is deterministic per seed and co-located") {
    const DepthMap hr = ramp_depth(32, 40);
    const GuidanceImage g = stripes_rgb(32, 40);

    auto [d1, g1] = crop_training_patch(hr, g, 16, 99);
    auto [d2, g2] = crop_training_patch(hr, g, 16, 99);
    CHECK((d1.values == d2.values).all());
    CHECK((g1.values.data == g2.values.data).all());

    bool found_offset = false;
    for (int oy = 0; oy <= 16 && !found_offset; ++oy)
        for (int ox = 0; ox <= 24 && !found_offset; ++ox)
            if ((hr.values.block(oy, ox, 16, 16) == d1.values).all()) {
                found_offset = true;
                for (int c = 0; c < 3; ++c) {
                    const Plane<float> want = g.values.channel(c).block(oy, ox, 16, 16);
                    CHECK((Plane<float>(g1.values.channel(c)) == want).all());
                }
            }
    CHECK(found_offset);

    bool any_differ = false;
    for (std::uint64_t seed = 0; seed < 8 && !any_differ; ++seed) {
        auto [d3, g3] = crop_training_patch(hr, g, 16, seed);
        any_differ = !(d3.values == d1.values).all();
    }
    CHECK(any_differ);
}

TEST_CASE("crop_training_patch covers the full image and validates size") {
    const DepthMap hr = ramp_depth(12, 12);
    const GuidanceImage g = stripes_rgb(12, 12);
    auto [d, gc] = crop_training_patch(hr, g, 12, 5);
    CHECK((d.values == hr.values).all());
    CHECK_THROWS_AS(crop_training_patch(hr, g, 13, 5), InvalidArgument);
    CHECK_THROWS_AS(crop_training_patch(hr, g, 0, 5), InvalidArgument);
    const GuidanceImage small = stripes_rgb(10, 12);
    CHECK_THROWS_AS(crop_training_patch(hr, small, 8, 5), ShapeError);
}

TEST_CASE("normalize_depth clamps to the unit interval") {
    DepthMap d = ramp_depth(4, 4);
    d.values(0, 0) = -1.0f;
    d.values(0, 1) = 99.0f;
    const Plane<float> n = normalize_depth(d, 2.0f);
    CHECK(n(0, 0) == 0.0f);
    CHECK(n(0, 1) == 1.0f);
    CHECK(n(1, 1) == doctest::Approx(d.values(1, 1) / 2.0f));
    CHECK((denormalize_depth(n, 2.0f)(1, 1)) == doctest::Approx(d.values(1, 1)));
    CHECK_THROWS_AS(normalize_depth(d, 0.0f), InvalidArgument);
    CHECK_THROWS_AS(denormalize_depth(n, -1.0f), InvalidArgument);
}

TEST_CASE("depth png round trip quantizes to millimeters") {
    const fs::path dir = fresh_dir("depth_png");
    DepthMap d = ramp_depth(6, 7);
    d.values(2, 3) = 0.0f;
    d.valid_mask(2, 3) = false;
    const std::string path = (dir / "d.png").string();
    write_depth_png(path, d);
    const DepthMap r = read_depth_png(path);
    CHECK(r.height() == 6);
    CHECK(r.width() == 7);
    CHECK_FALSE(r.valid_mask(2, 3));
    CHECK(r.values(2, 3) == 0.0f);
    Mask both = d.valid_mask && r.valid_mask;
    CHECK(both.count() == 41);
    CHECK((r.values - d.values).abs().maxCoeff() <= 0.0006f);
}

TEST_CASE("raw depth round trip is exact") {
    const fs::path dir = fresh_dir("depth_raw");
    const DepthMap d = ramp_depth(5, 9);
    const std::string path = (dir / "d.raw").string();
    write_depth_raw(path, d.values);
    const DepthMap r = read_depth_raw(path, 1.0f);
    CHECK(r.unit_to_cm == 1.0f);
    CHECK((r.values == d.values).all());
    CHECK(r.valid_mask.all());
}

TEST_CASE("rgb png round trip stays within quantization error") {
    const fs::path dir = fresh_dir("rgb_png");
    const GuidanceImage g = stripes_rgb(8, 5);
    const std::string path = (dir / "g.png").string();
    write_rgb_png(path, g);
    const GuidanceImage r = read_rgb_png(path);
    CHECK(r.height() == 8);
    CHECK(r.width() == 5);
    CHECK((r.values.data - g.values.data).abs().maxCoeff() <= 0.5f / 255.0f + 1e-6f);
}

TEST_CASE("false color export writes a file") {
    const fs::path dir = fresh_dir("false_color");
    Plane<float> v = Plane<float>::Zero(4, 4);
    v(1, 1) = 1.0f;
    const std::string path = (dir / "fc.png").string();
    write_false_color_png(path, v, 1.0f);
    CHECK(fs::file_size(path) > 0);
}

TEST_CASE("load_sample dispatches on extension and validates dims") {
    const fs::path dir = fresh_dir("load_sample");
    const DepthMap d = ramp_depth(8, 8);
    const GuidanceImage g = stripes_rgb(8, 8);
    write_depth_png((dir / "s_depth.png").string(), d);
    write_depth_raw((dir / "s_depth.raw").string(), d.values);
    write_rgb_png((dir / "s_rgb.png").string(), g);

    auto [dp, gp] = load_sample({(dir / "s_depth.png").string(), (dir / "s_rgb.png").string(),
                                 100.0f, ""});
    CHECK(dp.unit_to_cm == 100.0f);
    CHECK(gp.height() == 8);

    auto [dr, gr] = load_sample({(dir / "s_depth.raw").string(), (dir / "s_rgb.png").string(),
                                 1.0f, ""});
    CHECK(dr.unit_to_cm == 1.0f);
    CHECK((dr.values == d.values).all());

    const GuidanceImage small = stripes_rgb(4, 8);
    write_rgb_png((dir / "small_rgb.png").string(), small);
    CHECK_THROWS_AS(load_sample({(dir / "s_depth.png").string(),
                                 (dir / "small_rgb.png").string(), 100.0f, ""}),
                    DimensionMismatch);
    CHECK_THROWS_AS(load_sample({(dir / "absent.png").string(), (dir / "s_rgb.png").string(),
                                 100.0f, ""}),
                    FileNotFound);
}

TEST_CASE("load_sample_pair synthesizes or loads the LR depth") {
    const fs::path dir = fresh_dir("sample_pair");
    const DepthMap hr = ramp_depth(16, 16);
    const GuidanceImage g = stripes_rgb(16, 16);
    write_depth_png((dir / "p_depth.png").string(), hr);
    write_rgb_png((dir / "p_rgb.png").string(), g);

    DatasetManifest m;
    m.base_dir = dir.string();
    m.records.push_back({"p_depth.png", "p_rgb.png", 100.0f, ""});

    const DegradationSpec synth{DegradationSpec::Mode::synthetic_bicubic, 4};
    const SamplePair pair = load_sample_pair(m, 0, synth);
    CHECK(pair.scale == 4);
    CHECK(pair.depth_lr.height() == 4);
    const DepthMap expect = degrade(pair.depth_hr, synth);
    CHECK((pair.depth_lr.values == expect.values).all());

    const DegradationSpec provided{DegradationSpec::Mode::provided_lr, 4};
    CHECK_THROWS_AS(load_sample_pair(m, 0, provided), MalformedFile);

    write_depth_raw((dir / "p_lr.raw").string(), expect.values);
    m.records[0].lr_path = "p_lr.raw";
    const SamplePair pl = load_sample_pair(m, 0, provided);
    CHECK((pl.depth_lr.values == expect.values).all());

    const Plane<float> half = bicubic_resample(hr.values, 8, 8).max(0.0f);
    write_depth_raw((dir / "p_lr8.raw").string(), half);
    m.records[0].lr_path = "p_lr8.raw";
    const SamplePair ps = load_sample_pair(m, 0, provided);
    CHECK(ps.depth_lr.height() == 4);
    CHECK(ps.depth_lr.width() == 4);
}

TEST_CASE("valid_scale accepts only the supported factors") {
    CHECK(valid_scale(2));
    CHECK(valid_scale(16));
    CHECK_FALSE(valid_scale(1));
    CHECK_FALSE(valid_scale(3));
    CHECK_FALSE(valid_scale(32));
}
