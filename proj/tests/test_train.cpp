#include "doctest.h"

#include <zlib.h>

#include <filesystem>
#include <fstream>

#include "suft/toy.hpp"
#include "suft/train.hpp"

using namespace suft;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("suft_train_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

NetworkConfig tiny_net_config() {
    NetworkConfig c;
    c.scale = 2;
    c.base_channels = 4;
    c.rgb_blocks = 1;
    c.shallow_groups = 1;
    c.shallow_blocks = 1;
    c.deep_groups = 1;
    c.deep_blocks = 1;
    c.suft_stages = 1;
    c.attention_reduction = 2;
    return c;
}

DatasetManifest tiny_toy_manifest(const fs::path& dir) {
    ToySpec spec;
    spec.count = 2;
    spec.size = 16;
    spec.seed = 3;
    return DatasetManifest::load(make_toy_dataset(dir.string(), spec));
}

TrainConfig tiny_train_config(const DatasetManifest& m) {
    TrainConfig c;
    c.lr0 = 1e-3;
    c.patch_size = 8;
    c.seed = 5;
    c.epochs = 2;
    c.d_max = m.d_max;
    return c;
}

struct OneParamModel {
    float value = 0.0f;
    float grad = 1.0f;
    void visit_params(const ParamVisitor<float>& fn) { fn({"theta", &value, &grad, 1, {1}}); }
};

std::vector<float> dump_params(SuftNetwork<float>& net) {
    std::vector<float> v;
    net.visit_params([&](const ParamView<float>& p) {
        v.insert(v.end(), p.value, p.value + p.size);
    });
    return v;
}

}  // namespace

TEST_CASE("lr schedule follows lr0 * factor^(epoch div period)") {
    TrainConfig std_cfg;  // 1e-4, x0.1 every 100
    CHECK(lr_for_epoch(0, std_cfg) == 1e-4);
    CHECK(lr_for_epoch(99, std_cfg) == 1e-4);
    CHECK(std::abs(lr_for_epoch(100, std_cfg) - 1e-5) <= 1e-12 * 1e-5);
    CHECK(std::abs(lr_for_epoch(199, std_cfg) - 1e-5) <= 1e-12 * 1e-5);
    CHECK(std::abs(lr_for_epoch(200, std_cfg) - 1e-6) <= 1e-12 * 1e-6);

    const TrainConfig rw = TrainConfig::real_world();
    CHECK(lr_for_epoch(0, rw) == 6e-5);
    CHECK(lr_for_epoch(69, rw) == 6e-5);
    CHECK(lr_for_epoch(70, rw) == 3e-5);
    CHECK(lr_for_epoch(140, rw) == 1.5e-5);
    CHECK_THROWS_AS(lr_for_epoch(-1, rw), InvalidArgument);
}

TEST_CASE("masked L1 loss and its gradient") {
    Plane<float> pred(2, 2), gt(2, 2);
    pred << 1, 2, 3, 4;
    gt << 1, 1, 1, 1;
    const Mask all = Mask::Constant(2, 2, true);
    CHECK(l1_loss(pred, gt, all) == doctest::Approx(1.5).epsilon(1e-7));

    Mask m = all;
    m(1, 1) = false;
    CHECK(l1_loss(pred, gt, m) == doctest::Approx(1.0).epsilon(1e-7));
    const Plane<float> g = l1_loss_grad(pred, gt, m);
    CHECK(g(0, 0) == 0.0f);
    CHECK(g(0, 1) == doctest::Approx(1.0f / 3.0f));
    CHECK(g(1, 0) == doctest::Approx(1.0f / 3.0f));
    CHECK(g(1, 1) == 0.0f);

    const Mask none = Mask::Constant(2, 2, false);
    CHECK_THROWS_AS(l1_loss(pred, gt, none), InvalidArgument);
    const Plane<float> wide = Plane<float>::Zero(2, 3);
    CHECK_THROWS_AS(l1_loss(pred, wide, all), ShapeError);
    const Mask tall = Mask::Constant(3, 2, true);
    CHECK_THROWS_AS(l1_loss_grad(pred, gt, tall), ShapeError);
}

TEST_CASE("adam takes the documented first steps") {
    OneParamModel model;
    AdamState<float> st;
    TrainConfig cfg;
    adam_step(model, st, 0.1, cfg);
    CHECK(st.step == 1);
    CHECK(st.moments.count("theta") == 1);
    // m_hat = v_hat = 1 regardless of beta, so the first step is -lr/(1+eps).
    CHECK(model.value == doctest::Approx(-0.1).epsilon(1e-6));
    adam_step(model, st, 0.1, cfg);
    CHECK(model.value == doctest::Approx(-0.2).epsilon(1e-5));

    OneParamModel scaled;
    scaled.grad = -2.5f;
    AdamState<float> st2;
    adam_step(scaled, st2, 0.01, cfg);
    CHECK(scaled.value == doctest::Approx(0.01).epsilon(1e-5));
}

TEST_CASE("train_epoch is deterministic in seed and records a trace") {
    const fs::path dir = fresh_dir("det");
    const DatasetManifest manifest = tiny_toy_manifest(dir);
    const TrainConfig cfg = tiny_train_config(manifest);

    auto run = [&](std::uint64_t data_seed) {
        TrainConfig c = cfg;
        c.seed = data_seed;
        SuftNetwork<float> net(tiny_net_config());
        net.init_params(7);
        TrainState state;
        std::vector<TraceEntry> trace;
        for (int e = 0; e < 2; ++e)
            train_epoch(net, manifest, c, state, [&](const TraceEntry& t) { trace.push_back(t); });
        CHECK(state.epoch == 2);
        return std::make_pair(dump_params(net), trace);
    };

    const auto [pa, ta] = run(5);
    const auto [pb, tb] = run(5);
    CHECK(pa == pb);
    REQUIRE(ta.size() == 4);
    REQUIRE(tb.size() == 4);
    for (std::size_t i = 0; i < ta.size(); ++i) {
        CHECK(ta[i].step == static_cast<std::int64_t>(i + 1));
        CHECK(ta[i].epoch == static_cast<int>(i / 2));
        CHECK(ta[i].lr == lr_for_epoch(ta[i].epoch, cfg));
        CHECK(ta[i].loss == tb[i].loss);
        CHECK(std::isfinite(ta[i].loss));
    }

    const auto [pc, tc] = run(6);
    bool differs = false;
    for (std::size_t i = 0; i < tc.size() && !differs; ++i) differs = tc[i].loss != ta[i].loss;
    CHECK(differs);
    (void)pc;
}

TEST_CASE("train_epoch validates split, records and patch geometry") {
    const fs::path dir = fresh_dir("validate");
    DatasetManifest manifest = tiny_toy_manifest(dir);
    const TrainConfig cfg = tiny_train_config(manifest);
    SuftNetwork<float> net(tiny_net_config());
    net.init_params(7);
    TrainState state;

    DatasetManifest wrong = manifest;
    wrong.split = "test";
    CHECK_THROWS_AS(train_epoch(net, wrong, cfg, state), ConfigError);

    DatasetManifest empty = manifest;
    empty.records.clear();
    CHECK_THROWS_AS(train_epoch(net, empty, cfg, state), ConfigError);

    TrainConfig odd = cfg;
    odd.patch_size = 9;  // not divisible by scale 2
    CHECK_THROWS_AS(train_epoch(net, manifest, odd, state), ConfigError);

    TrainConfig huge = cfg;
    huge.patch_size = 32;  // larger than the 16x16 toy images
    try {
        train_epoch(net, manifest, huge, state);
        FAIL("expected Error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("sample ") != std::string::npos);
    }
    CHECK(state.epoch == 0);
}

TEST_CASE("trace files round trip exactly") {
    const fs::path dir = fresh_dir("trace");
    const std::string path = (dir / "trace.tsv").string();
    const std::vector<TraceEntry> entries = {
        {1, 0, 1e-4, 0.123456789012345678},
        {2, 0, 1e-4, 3.0e-17},
        {3, 1, 1e-5, 42.0},
    };
    for (const auto& e : entries) append_trace(path, e);
    const std::vector<TraceEntry> back = read_trace(path);
    REQUIRE(back.size() == entries.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].step == entries[i].step);
        CHECK(back[i].epoch == entries[i].epoch);
        CHECK(back[i].lr == entries[i].lr);
        CHECK(back[i].loss == entries[i].loss);
    }

    CHECK_THROWS_AS(read_trace((dir / "absent.tsv").string()), FileNotFound);
    std::ofstream(dir / "bad.tsv") << "not a trace line\n";
    CHECK_THROWS_AS(read_trace((dir / "bad.tsv").string()), MalformedFile);
}

TEST_CASE("checkpoints round trip the model and optimizer bit for bit") {
    const fs::path dir = fresh_dir("ckpt");
    const DatasetManifest manifest = tiny_toy_manifest(dir);
    TrainConfig cfg = tiny_train_config(manifest);
    cfg.epochs = 3;
    cfg.checkpoint_every = 2;

    SuftNetwork<float> net(tiny_net_config());
    net.init_params(7);
    TrainState state;
    train_epoch(net, manifest, cfg, state);

    const std::string path = (dir / "model.suft").string();
    save_checkpoint(path, net, cfg, state);
    LoadedCheckpoint ck = load_checkpoint(path);

    CHECK(ck.net_config.scale == 2);
    CHECK(ck.net_config.base_channels == 4);
    CHECK(ck.net_config.uncertainty == true);
    CHECK(ck.net_config.seed == 7);
    CHECK(ck.train_config.lr0 == cfg.lr0);
    CHECK(ck.train_config.decay_factor == cfg.decay_factor);
    CHECK(ck.train_config.epochs == 3);
    CHECK(ck.train_config.patch_size == 8);
    CHECK(ck.train_config.d_max == cfg.d_max);
    CHECK(ck.state.epoch == 1);
    CHECK(ck.state.adam.step == state.adam.step);

    CHECK(dump_params(ck.net) == dump_params(net));
    REQUIRE(ck.state.adam.moments.size() == state.adam.moments.size());
    for (const auto& [name, mv] : state.adam.moments) {
        REQUIRE(ck.state.adam.moments.count(name) == 1);
        const auto& lv = ck.state.adam.moments.at(name);
        CHECK((lv.first == mv.first).all());
        CHECK((lv.second == mv.second).all());
    }

    // Identical nets must produce identical predictions.
    SplitMix64 rng(14);
    Plane<float> d(6, 6);
    for (Eigen::Index i = 0; i < d.size(); ++i) d.data()[i] = static_cast<float>(rng.next_double());
    Tensor<float> rgb(3, 12, 12);
    for (Eigen::Index i = 0; i < rgb.size(); ++i)
        rgb.data[i] = static_cast<float>(rng.next_double());
    const Plane<float> p1 = net.infer(d, rgb).depth_sr;
    const Plane<float> p2 = ck.net.infer(d, rgb).depth_sr;
    CHECK((p1 == p2).all());
}

TEST_CASE("checkpoint loader rejects damage, wrong versions and bad paths") {
    const fs::path dir = fresh_dir("ckpt_bad");
    SuftNetwork<float> net(tiny_net_config());
    net.init_params(1);
    TrainConfig cfg;
    cfg.d_max = 10.0f;
    TrainState state;
    const std::string path = (dir / "model.suft").string();
    save_checkpoint(path, net, cfg, state);

    CHECK_THROWS_AS(load_checkpoint((dir / "absent.suft").string()), FileNotFound);

    std::string bytes;
    {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        bytes = ss.str();
    }

    std::string corrupt = bytes;
    corrupt[corrupt.size() / 2] ^= static_cast<char>(0xff);
    const std::string corrupt_path = (dir / "corrupt.suft").string();
    std::ofstream(corrupt_path, std::ios::binary) << corrupt;
    CHECK_THROWS_AS(load_checkpoint(corrupt_path), ChecksumMismatch);

    std::string future = bytes;
    const auto pos = future.find("format_version=1");
    REQUIRE(pos != std::string::npos);
    future[pos + std::string("format_version=").size()] = '9';
    const std::uint32_t crc = static_cast<std::uint32_t>(crc32(
        0L, reinterpret_cast<const Bytef*>(future.data()), static_cast<uInt>(future.size() - 4)));
    for (int i = 0; i < 4; ++i)
        future[future.size() - 4 + static_cast<std::size_t>(i)] =
            static_cast<char>((crc >> (8 * i)) & 0xff);
    const std::string future_path = (dir / "future.suft").string();
    std::ofstream(future_path, std::ios::binary) << future;
    CHECK_THROWS_AS(load_checkpoint(future_path), VersionMismatch);

    const std::string tiny_path = (dir / "tiny.suft").string();
    std::ofstream(tiny_path, std::ios::binary) << "hi";
    CHECK_THROWS_AS(load_checkpoint(tiny_path), MalformedFile);
}

TEST_CASE("training resumed from a checkpoint matches an uninterrupted run") {
    const fs::path dir = fresh_dir("resume");
    const DatasetManifest manifest = tiny_toy_manifest(dir);
    const TrainConfig cfg = tiny_train_config(manifest);

    SuftNetwork<float> cont(tiny_net_config());
    cont.init_params(7);
    TrainState cont_state;
    std::vector<TraceEntry> cont_trace;
    for (int e = 0; e < 2; ++e)
        train_epoch(cont, manifest, cfg, cont_state,
                    [&](const TraceEntry& t) { cont_trace.push_back(t); });

    SuftNetwork<float> first(tiny_net_config());
    first.init_params(7);
    TrainState first_state;
    std::vector<TraceEntry> split_trace;
    train_epoch(first, manifest, cfg, first_state,
                [&](const TraceEntry& t) { split_trace.push_back(t); });
    const std::string path = (dir / "mid.suft").string();
    save_checkpoint(path, first, cfg, first_state);

    LoadedCheckpoint ck = load_checkpoint(path);
    CHECK(ck.state.epoch == 1);
    train_epoch(ck.net, manifest, ck.train_config, ck.state,
                [&](const TraceEntry& t) { split_trace.push_back(t); });

    CHECK(dump_params(ck.net) == dump_params(cont));
    REQUIRE(split_trace.size() == cont_trace.size());
    for (std::size_t i = 0; i < cont_trace.size(); ++i) {
        CHECK(split_trace[i].step == cont_trace[i].step);
        CHECK(split_trace[i].epoch == cont_trace[i].epoch);
        CHECK(split_trace[i].lr == cont_trace[i].lr);
        CHECK(split_trace[i].loss == cont_trace[i].loss);
    }
}
