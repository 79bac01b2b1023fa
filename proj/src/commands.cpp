#include "suft/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "suft/eval.hpp"
#include "suft/image.hpp"
#include "suft/toy.hpp"

namespace fs = std::filesystem;

namespace suft {

namespace {

DepthMap read_depth_any(const std::string& path, float unit_to_cm) {
    const std::string ext = fs::path(path).extension().string();
    if (ext == ".raw") return read_depth_raw(path, unit_to_cm);
    if (ext == ".png") {
        DepthMap d = read_depth_png(path);
        d.unit_to_cm = unit_to_cm;
        return d;
    }
    throw InvalidArgument("unsupported depth extension '" + ext + "': " + path);
}

std::string checkpoint_path_for(const RunConfig& cfg) {
    if (!cfg.paths.checkpoint.empty()) return cfg.paths.checkpoint;
    return (fs::path(cfg.paths.out_dir) / "checkpoint.suft").string();
}

void run_epochs(SuftNetwork<float>& net, const DatasetManifest& manifest, TrainConfig tcfg,
                TrainState& state, const std::string& trace_path,
                const std::string& checkpoint_path) {
    while (state.epoch < tcfg.epochs) {
        double loss_sum = 0.0;
        std::int64_t loss_n = 0;
        train_epoch(net, manifest, tcfg, state, [&](const TraceEntry& e) {
            append_trace(trace_path, e);
            loss_sum += e.loss;
            loss_n += 1;
        });
        std::printf("epoch %d/%d  lr %.8g  mean L1 %.6g\n", state.epoch, tcfg.epochs,
                    lr_for_epoch(state.epoch - 1, tcfg),
                    loss_n ? loss_sum / static_cast<double>(loss_n) : 0.0);
        std::fflush(stdout);
        if (!checkpoint_path.empty() &&
            (state.epoch % tcfg.checkpoint_every == 0 || state.epoch == tcfg.epochs))
            save_checkpoint(checkpoint_path, net, tcfg, state);
    }
    if (!checkpoint_path.empty()) save_checkpoint(checkpoint_path, net, tcfg, state);
}

}  // namespace

int cmd_prepare(const PrepareOptions& opts) {
    if (opts.data_root.empty())
        throw ConfigError("prepare: data root not set (flag --data-root or SUFT_DATA_ROOT)");
    if (opts.out_manifest.empty()) throw ConfigError("prepare: --out manifest path not set");
    if (opts.split != "train" && opts.split != "test")
        throw ConfigError("prepare: split must be 'train' or 'test'");
    if (!fs::is_directory(opts.data_root))
        throw FileNotFound("prepare: data root is not a directory: " + opts.data_root);

    std::vector<std::string> depth_names;
    for (const auto& entry : fs::directory_iterator(opts.data_root)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        const std::string stem = entry.path().stem().string();
        const std::string ext = entry.path().extension().string();
        if ((ext == ".png" || ext == ".raw") && stem.size() > 6 &&
            stem.compare(stem.size() - 6, 6, "_depth") == 0)
            depth_names.push_back(name);
    }
    std::sort(depth_names.begin(), depth_names.end());

    const fs::path out(opts.out_manifest);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    // Record paths must resolve from the manifest's own directory, which is
    // not necessarily the data root.
    const fs::path out_base = fs::absolute(out).parent_path();
    const auto record_path = [&](const std::string& name) {
        const fs::path abs = fs::absolute(fs::path(opts.data_root) / name);
        std::error_code ec;
        const fs::path rel = fs::relative(abs, out_base, ec);
        return (ec || rel.empty()) ? abs.string() : rel.string();
    };

    DatasetManifest manifest;
    manifest.split = opts.split;
    manifest.d_max = opts.d_max;
    manifest.base_dir = out_base.string();
    for (const std::string& depth_name : depth_names) {
        const std::string stem = fs::path(depth_name).stem().string();
        const std::string rgb_name = stem.substr(0, stem.size() - 6) + "_rgb.png";
        if (!fs::exists(fs::path(opts.data_root) / rgb_name)) {
            std::cerr << "prepare: skipping " << depth_name << " (no " << rgb_name << ")\n";
            continue;
        }
        ManifestRecord rec{record_path(depth_name), record_path(rgb_name), opts.unit_to_cm, ""};
        manifest.records.push_back(rec);
        load_sample(manifest.resolved(manifest.records.size() - 1));
    }
    if (manifest.records.empty())
        throw InvalidArgument("prepare: no depth/RGB pairs found under " + opts.data_root);

    manifest.save(opts.out_manifest);
    std::printf("wrote %zu records to %s\n", manifest.records.size(), opts.out_manifest.c_str());
    return static_cast<int>(manifest.records.size());
}

void cmd_train(const RunConfig& cfg) {
    if (cfg.paths.manifest.empty()) throw ConfigError("train: paths.manifest not set");
    const DatasetManifest manifest = DatasetManifest::load(cfg.paths.manifest);
    fs::create_directories(cfg.paths.out_dir);
    const std::string trace_path = (fs::path(cfg.paths.out_dir) / "loss_trace.tsv").string();
    const std::string ckpt_path = checkpoint_path_for(cfg);

    SuftNetwork<float> net;
    TrainConfig tcfg;
    TrainState state;
    if (!cfg.paths.resume.empty()) {
        LoadedCheckpoint ck = load_checkpoint(cfg.paths.resume);
        net = std::move(ck.net);
        tcfg = ck.train_config;
        tcfg.epochs = cfg.train.epochs;
        state = std::move(ck.state);
        std::printf("resumed %s at epoch %d\n", cfg.paths.resume.c_str(), state.epoch);
    } else {
        cfg.validate();
        net = SuftNetwork<float>(cfg.network);
        net.init_params(cfg.train.seed);
        tcfg = cfg.train;
        if (!cfg.d_max_set) tcfg.d_max = manifest.d_max;
    }
    std::printf("model %s, %lld parameters\n", config_fingerprint(net.config()).c_str(),
                static_cast<long long>(net.parameter_count()));
    run_epochs(net, manifest, tcfg, state, trace_path, ckpt_path);
    std::printf("checkpoint: %s\n", ckpt_path.c_str());
}

int cmd_eval(const RunConfig& cfg) {
    if (cfg.paths.checkpoint.empty()) throw ConfigError("eval: paths.checkpoint not set");
    const std::string manifest_path =
        cfg.paths.test_manifest.empty() ? cfg.paths.manifest : cfg.paths.test_manifest;
    if (manifest_path.empty()) throw ConfigError("eval: no test manifest set");

    LoadedCheckpoint ck = load_checkpoint(cfg.paths.checkpoint);
    const DatasetManifest manifest = DatasetManifest::load(manifest_path);
    fs::create_directories(cfg.paths.out_dir);

    DegradationSpec spec = cfg.degradation;
    spec.scale = ck.net_config.scale;

    EvalOptions opts;
    opts.export_dir = (fs::path(cfg.paths.out_dir) / "maps").string();
    opts.d_max = ck.train_config.d_max;
    const EvalResult res = evaluate(ck.net, manifest, spec, opts);
    res.report.save((fs::path(cfg.paths.out_dir) / "report.tsv").string());

    const EvalResult base = baseline_bicubic(manifest, spec);
    base.report.save((fs::path(cfg.paths.out_dir) / "baseline.tsv").string());

    std::printf("model   mean RMSE %.6g %s over %zu samples\n", res.report.mean_rmse,
                res.report.unit.c_str(), res.report.per_sample.size());
    std::printf("bicubic mean RMSE %.6g %s\n", base.report.mean_rmse, base.report.unit.c_str());
    for (const auto& [id, msg] : res.failures)
        std::cerr << "eval: sample " << id << " failed: " << msg << "\n";
    return static_cast<int>(res.failures.size());
}

void cmd_infer(const InferOptions& opts) {
    if (opts.checkpoint.empty()) throw ConfigError("infer: --checkpoint not set");
    if (opts.depth_path.empty() || opts.rgb_path.empty())
        throw ConfigError("infer: --depth and --rgb are required");
    LoadedCheckpoint ck = load_checkpoint(opts.checkpoint);
    const DepthMap d_lr = read_depth_any(opts.depth_path, opts.unit_to_cm);
    const GuidanceImage rgb = read_rgb_png(opts.rgb_path);
    const Plane<float> d_in = normalize_depth(d_lr, ck.train_config.d_max);
    const ModelOutput<float> out = ck.net.infer(d_in, rgb.values);
    DepthMap pred;
    pred.values = denormalize_depth(out.depth_sr, ck.train_config.d_max);
    pred.valid_mask = Mask::Constant(pred.values.rows(), pred.values.cols(), true);
    pred.unit_to_cm = opts.unit_to_cm;
    const fs::path out_path(opts.out_path);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    write_depth_png(opts.out_path, pred);
    std::printf("wrote %s (%dx%d)\n", opts.out_path.c_str(), pred.width(), pred.height());
}

void cmd_ablate(const RunConfig& cfg) {
    if (cfg.paths.manifest.empty()) throw ConfigError("ablate: paths.manifest not set");
    if (cfg.paths.test_manifest.empty()) throw ConfigError("ablate: paths.test_manifest not set");
    cfg.validate();
    const DatasetManifest train_manifest = DatasetManifest::load(cfg.paths.manifest);
    const DatasetManifest test_manifest = DatasetManifest::load(cfg.paths.test_manifest);
    fs::create_directories(cfg.paths.out_dir);

    struct Variant {
        const char* name;
        NetworkConfig::Fusion fusion;
        bool uncertainty;
    };
    const Variant variants[] = {
        {"pre_upsample_nosu", NetworkConfig::Fusion::pre_upsample, false},
        {"pre_upsample_su", NetworkConfig::Fusion::pre_upsample, true},
        {"iterative_nosu", NetworkConfig::Fusion::iterative, false},
        {"iterative_su", NetworkConfig::Fusion::iterative, true},
    };

    std::string summary = "fusion\tuncertainty\tmean_rmse\tunit\n";
    for (const Variant& v : variants) {
        NetworkConfig ncfg = cfg.network;
        ncfg.fusion_mode = v.fusion;
        ncfg.uncertainty = v.uncertainty;
        SuftNetwork<float> net(ncfg);
        net.init_params(cfg.train.seed);
        TrainConfig tcfg = cfg.train;
        if (!cfg.d_max_set) tcfg.d_max = train_manifest.d_max;
        TrainState state;
        const std::string trace =
            (fs::path(cfg.paths.out_dir) / (std::string("ablate_") + v.name + "_trace.tsv"))
                .string();
        std::printf("[%s]\n", v.name);
        run_epochs(net, train_manifest, tcfg, state, trace, "");

        DegradationSpec spec = cfg.degradation;
        EvalOptions opts;
        opts.d_max = tcfg.d_max;
        const EvalResult res = evaluate(net, test_manifest, spec, opts);
        res.report.save(
            (fs::path(cfg.paths.out_dir) / (std::string("ablate_") + v.name + ".tsv")).string());
        char row[160];
        std::snprintf(row, sizeof(row), "%s\t%s\t%.17g\t%s\n", fusion_mode_name(v.fusion).c_str(),
                      v.uncertainty ? "yes" : "no", res.report.mean_rmse,
                      res.report.unit.c_str());
        summary += row;
        std::printf("[%s] mean RMSE %.6g %s\n", v.name, res.report.mean_rmse,
                    res.report.unit.c_str());
        if (!res.failures.empty())
            throw Error("ablate: " + std::to_string(res.failures.size()) +
                        " samples failed under variant " + v.name);
    }
    const std::string summary_path =
        (fs::path(cfg.paths.out_dir) / "ablation_summary.txt").string();
    std::ofstream out(summary_path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + summary_path);
    out << summary;
    std::printf("summary: %s\n", summary_path.c_str());
}

void cmd_uncertainty_demo(const UncertaintyDemoOptions& opts) {
    if (opts.checkpoint.empty()) throw ConfigError("uncertainty-demo: --checkpoint not set");
    if (opts.manifest.empty() && (opts.depth_path.empty() || opts.rgb_path.empty()))
        throw ConfigError("uncertainty-demo: either --manifest or --depth/--rgb is required");
    LoadedCheckpoint ck = load_checkpoint(opts.checkpoint);
    DepthMap d_lr;
    GuidanceImage rgb;
    if (!opts.manifest.empty()) {
        const DatasetManifest manifest = DatasetManifest::load(opts.manifest);
        if (opts.index < 0 || static_cast<std::size_t>(opts.index) >= manifest.count())
            throw InvalidArgument("uncertainty-demo: record index out of range");
        const DegradationSpec spec{DegradationSpec::Mode::synthetic_bicubic,
                                   ck.net_config.scale};
        SamplePair pair =
            load_sample_pair(manifest, static_cast<std::size_t>(opts.index), spec);
        d_lr = std::move(pair.depth_lr);
        rgb = std::move(pair.guidance);
    } else {
        d_lr = read_depth_any(opts.depth_path, opts.unit_to_cm);
        rgb = read_rgb_png(opts.rgb_path);
    }
    const Plane<float> d_in = normalize_depth(d_lr, ck.train_config.d_max);
    const Plane<float> u =
        ck.net.pixel_space_uncertainty(d_in, rgb.values) * ck.train_config.d_max;
    const fs::path out_path(opts.out_path);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    write_false_color_png(opts.out_path, u, u.maxCoeff());
    std::printf("wrote %s (max |D_sr - flip| %.6g native units)\n", opts.out_path.c_str(),
                static_cast<double>(u.maxCoeff()));
}

}  // namespace suft
