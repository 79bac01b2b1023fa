#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "suft/config.hpp"

using namespace suft;
namespace fs = std::filesystem;

namespace {

std::string check_config_error(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const ConfigError& e) {
        return e.what();
    }
    FAIL("expected ConfigError");
    return "";
}

}  // namespace

TEST_CASE("run config parses every section") {
    const std::string text =
        "# demo config\n"
        "[paths]\n"
        "manifest = data/train.tsv\n"
        "test_manifest = data/test.tsv\n"
        "checkpoint = out/model.suft\n"
        "out_dir = out\n"
        "resume = out/old.suft\n"
        "\n"
        "[data]\n"
        "scale = 8\n"
        "mode = provided_lr\n"
        "\n"
        "[network]\n"
        "base_channels = 32\n"
        "rgb_blocks = 2\n"
        "shallow_groups = 3\n"
        "shallow_blocks = 2\n"
        "deep_groups = 1\n"
        "deep_blocks = 4\n"
        "suft_stages = 2\n"
        "fusion_mode = pre_upsample\n"
        "uncertainty = false\n"
        "attention_reduction = 8\n"
        "share_flip_projection = 0\n"
        "\n"
        "[train]\n"
        "preset = real_world\n"
        "epochs = 12\n"
        "patch_size = 64\n"
        "batch_size = 1\n"
        "seed = 77\n"
        "checkpoint_every = 3\n"
        "d_max = 6.5\n";
    const RunConfig cfg = RunConfig::from_text(text, "demo.cfg");
    CHECK(cfg.paths.manifest == "data/train.tsv");
    CHECK(cfg.paths.test_manifest == "data/test.tsv");
    CHECK(cfg.paths.checkpoint == "out/model.suft");
    CHECK(cfg.paths.resume == "out/old.suft");
    CHECK(cfg.degradation.scale == 8);
    CHECK(cfg.network.scale == 8);
    CHECK(cfg.degradation.mode == DegradationSpec::Mode::provided_lr);
    CHECK(cfg.network.base_channels == 32);
    CHECK(cfg.network.rgb_blocks == 2);
    CHECK(cfg.network.shallow_groups == 3);
    CHECK(cfg.network.deep_blocks == 4);
    CHECK(cfg.network.suft_stages == 2);
    CHECK(cfg.network.fusion_mode == NetworkConfig::Fusion::pre_upsample);
    CHECK_FALSE(cfg.network.uncertainty);
    CHECK(cfg.network.attention_reduction == 8);
    CHECK_FALSE(cfg.network.share_flip_projection);
    CHECK(cfg.train.lr0 == 6e-5);
    CHECK(cfg.train.decay_factor == 0.5);
    CHECK(cfg.train.decay_period == 70);
    CHECK(cfg.train.epochs == 12);
    CHECK(cfg.train.patch_size == 64);
    CHECK(cfg.train.seed == 77);
    CHECK(cfg.train.checkpoint_every == 3);
    CHECK(cfg.train.d_max == doctest::Approx(6.5f));
    CHECK(cfg.d_max_set);
    cfg.validate();
}

TEST_CASE("defaults survive an empty config and d_max stays unset") {
    const RunConfig cfg = RunConfig::from_text("", "empty.cfg");
    CHECK(cfg.network.base_channels == 64);
    CHECK(cfg.network.scale == 4);
    CHECK(cfg.degradation.scale == 4);
    CHECK(cfg.train.lr0 == 1e-4);
    CHECK(cfg.paths.out_dir == "out");
    CHECK_FALSE(cfg.d_max_set);
    cfg.validate();
}

TEST_CASE("config errors carry their source location") {
    const std::string msg1 = check_config_error(
        [] { RunConfig::from_text("[data]\nscale = 4\nbogus = 1\n", "demo.cfg"); });
    CHECK(msg1.find("data.bogus") != std::string::npos);
    CHECK(msg1.find("demo.cfg:3") != std::string::npos);

    const std::string msg2 = check_config_error(
        [] { RunConfig::from_text("[nosuch]\nkey = 1\n", "x.cfg"); });
    CHECK(msg2.find("nosuch") != std::string::npos);

    const std::string msg3 =
        check_config_error([] { RunConfig::from_text("scale = 4\n", "x.cfg"); });
    CHECK(msg3.find("before any section") != std::string::npos);

    CHECK_THROWS_AS(RunConfig::from_text("[data\nscale = 4\n", "x.cfg"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_text("[data]\nscale\n", "x.cfg"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_text("[data]\nscale = pony\n", "x.cfg"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_text("[train]\nepochs = 1.5\n", "x.cfg"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_text("[network]\nuncertainty = maybe\n", "x.cfg"),
                    ConfigError);
    CHECK_THROWS_AS(RunConfig::from_text("[train]\npreset = magic\n", "x.cfg"), ConfigError);
}

TEST_CASE("preset application is positional") {
    const RunConfig a = RunConfig::from_text(
        "[train]\npreset = real_world\nlr0 = 5e-6\n", "a.cfg");
    CHECK(a.train.lr0 == 5e-6);       // explicit key after preset wins
    CHECK(a.train.decay_period == 70);

    const RunConfig b = RunConfig::from_text(
        "[train]\nlr0 = 5e-6\npreset = real_world\n", "b.cfg");
    CHECK(b.train.lr0 == 6e-5);       // preset after key resets the schedule
}

TEST_CASE("overrides apply after the file in argument order") {
    const std::string text = "[data]\nscale = 4\n[train]\nepochs = 3\n";
    const RunConfig cfg = RunConfig::from_text(
        text, "f.cfg", {"train.epochs=9", "data.scale=2", "network.base_channels=16"});
    CHECK(cfg.train.epochs == 9);
    CHECK(cfg.network.scale == 2);
    CHECK(cfg.degradation.scale == 2);
    CHECK(cfg.network.base_channels == 16);

    const std::string msg = check_config_error(
        [&] { RunConfig::from_text(text, "f.cfg", {"no_dot=1"}); });
    CHECK(msg.find("--set #1") != std::string::npos);
    CHECK_THROWS_AS(RunConfig::from_text(text, "f.cfg", {"train.epochs"}), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_text(text, "f.cfg", {"train.nope=1"}), ConfigError);
}

TEST_CASE("validate rejects inconsistent geometry") {
    RunConfig cfg = RunConfig::from_text("", "v.cfg");
    cfg.network.scale = 2;  // degradation still 4
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    const RunConfig bad_scale = RunConfig::from_text("[data]\nscale = 3\n", "v.cfg");
    CHECK_THROWS_AS(bad_scale.validate(), ConfigError);

    const RunConfig bad_stage =
        RunConfig::from_text("[network]\nsuft_stages = 9\n", "v.cfg");
    CHECK_THROWS_AS(bad_stage.validate(), ConfigError);

    const RunConfig bad_patch = RunConfig::from_text("[train]\npatch_size = 0\n", "v.cfg");
    CHECK_THROWS_AS(bad_patch.validate(), ConfigError);
}

TEST_CASE("from_file reads configs and reports missing paths") {
    const fs::path dir = fs::temp_directory_path() / "suft_cfg";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path path = dir / "run.cfg";
    std::ofstream(path) << "[data]\nscale = 2\n[train]\nepochs = 4\n";
    const RunConfig cfg = RunConfig::from_file(path.string());
    CHECK(cfg.network.scale == 2);
    CHECK(cfg.train.epochs == 4);
    CHECK_THROWS_AS(RunConfig::from_file((dir / "absent.cfg").string()), FileNotFound);
}
