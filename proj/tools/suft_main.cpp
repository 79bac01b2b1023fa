#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "suft/commands.hpp"

namespace {

struct ConfigArgs {
    std::string config_path;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
};

void add_config_flags(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("--config", args.config_path, "run config file");
    cmd->add_option("--set", args.sets, "override, section.key=value (repeatable)");
    cmd->add_option("--seed", args.seed, "training seed override");
    cmd->add_option("--out", args.out_dir, "output directory override");
}

suft::RunConfig resolve_config(const ConfigArgs& args) {
    suft::RunConfig cfg = args.config_path.empty()
                              ? suft::RunConfig::from_text("", "<no config file>", args.sets)
                              : suft::RunConfig::from_file(args.config_path, args.sets);
    if (args.seed) cfg.train.seed = *args.seed;
    if (args.out_dir) cfg.paths.out_dir = *args.out_dir;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"suft: color-guided depth super-resolution"};
    app.require_subcommand(1);

    suft::PrepareOptions prep;
    if (const char* env_root = std::getenv("SUFT_DATA_ROOT")) prep.data_root = env_root;
    auto* prepare = app.add_subcommand("prepare", "scan a directory into a dataset manifest");
    prepare->add_option("--data-root", prep.data_root,
                        "directory of *_depth.png|raw + *_rgb.png pairs (default $SUFT_DATA_ROOT)");
    prepare->add_option("--out", prep.out_manifest, "manifest path to write");
    prepare->add_option("--split", prep.split, "train or test");
    prepare->add_option("--d-max", prep.d_max, "normalization ceiling in native units");
    prepare->add_option("--unit-to-cm", prep.unit_to_cm, "unit multiplier (100 meters, 1 disparity)");

    ConfigArgs train_args;
    auto* train = app.add_subcommand("train", "train a model from a run config");
    add_config_flags(train, train_args);

    ConfigArgs eval_args;
    std::string eval_checkpoint;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint over the test manifest");
    add_config_flags(eval, eval_args);
    eval->add_option("--checkpoint", eval_checkpoint, "checkpoint path override");

    suft::InferOptions infer_opts;
    auto* infer = app.add_subcommand("infer", "super-resolve one LR depth + HR RGB pair");
    infer->add_option("--checkpoint", infer_opts.checkpoint, "trained checkpoint");
    infer->add_option("--depth", infer_opts.depth_path, "LR depth (.png millimeters or .raw)");
    infer->add_option("--rgb", infer_opts.rgb_path, "HR RGB png");
    infer->add_option("--out", infer_opts.out_path, "prediction png path");
    infer->add_option("--unit-to-cm", infer_opts.unit_to_cm, "unit multiplier for raw depth");

    ConfigArgs ablate_args;
    auto* ablate = app.add_subcommand("ablate", "train + evaluate the four fusion/uncertainty variants");
    add_config_flags(ablate, ablate_args);

    suft::UncertaintyDemoOptions unc_opts;
    auto* unc = app.add_subcommand("uncertainty-demo", "export the pixel-space flip uncertainty map");
    unc->add_option("--checkpoint", unc_opts.checkpoint, "trained checkpoint");
    unc->add_option("--manifest", unc_opts.manifest, "take the sample from this manifest");
    unc->add_option("--index", unc_opts.index, "record index within --manifest");
    unc->add_option("--depth", unc_opts.depth_path, "LR depth (.png millimeters or .raw)");
    unc->add_option("--rgb", unc_opts.rgb_path, "HR RGB png");
    unc->add_option("--out", unc_opts.out_path, "false-color png path");
    unc->add_option("--unit-to-cm", unc_opts.unit_to_cm, "unit multiplier for raw depth");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (prepare->parsed()) {
            suft::cmd_prepare(prep);
        } else if (train->parsed()) {
            suft::cmd_train(resolve_config(train_args));
        } else if (eval->parsed()) {
            suft::RunConfig cfg = resolve_config(eval_args);
            if (!eval_checkpoint.empty()) cfg.paths.checkpoint = eval_checkpoint;
            if (suft::cmd_eval(cfg) != 0) return 1;
        } else if (infer->parsed()) {
            suft::cmd_infer(infer_opts);
        } else if (ablate->parsed()) {
            suft::cmd_ablate(resolve_config(ablate_args));
        } else if (unc->parsed()) {
            suft::cmd_uncertainty_demo(unc_opts);
        }
    } catch (const suft::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const suft::FileNotFound& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const suft::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
