#include "suft/eval.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "suft/image.hpp"
#include "suft/resample.hpp"

namespace fs = std::filesystem;

namespace suft {

namespace {

std::string fmt_double(double v) {
    char b[64];
    std::snprintf(b, sizeof(b), "%.17g", v);
    return b;
}

}  // namespace

double MetricReport::recompute_mean() const {
    if (per_sample.empty()) return 0.0;
    double s = 0.0;
    for (const auto& [id, v] : per_sample) s += v;
    return s / static_cast<double>(per_sample.size());
}

void MetricReport::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write report: " + path);
    out << "unit=" << unit << "\n";
    out << "scale=" << scale << "\n";
    out << "fingerprint=" << fingerprint << "\n";
    for (const auto& [id, v] : per_sample) out << id << '\t' << fmt_double(v) << "\n";
    out << "mean\t" << fmt_double(mean_rmse) << "\n";
    if (!out) throw IoError("report write failed: " + path);
}

MetricReport MetricReport::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound("cannot open report: " + path);
    MetricReport r;
    std::string line;
    int lineno = 0;
    bool saw_mean = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto where = [&] { return path + ":" + std::to_string(lineno); };
        if (lineno <= 3) {
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw MalformedFile("report header expects key=value at " + where());
            const std::string k = line.substr(0, eq);
            const std::string v = line.substr(eq + 1);
            if (k == "unit") r.unit = v;
            else if (k == "scale") r.scale = std::stoi(v);
            else if (k == "fingerprint") r.fingerprint = v;
            else throw MalformedFile("unknown report header key '" + k + "' at " + where());
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw MalformedFile("report line expects id<TAB>value at " + where());
        const std::string id = line.substr(0, tab);
        double v = 0;
        try {
            v = std::stod(line.substr(tab + 1));
        } catch (const std::exception&) {
            throw MalformedFile("report value is not a number at " + where());
        }
        if (id == "mean") {
            r.mean_rmse = v;
            saw_mean = true;
        } else {
            if (saw_mean) throw MalformedFile("report has samples after mean at " + where());
            r.per_sample.emplace_back(id, v);
        }
    }
    if (!saw_mean) throw MalformedFile("report has no mean line: " + path);
    return r;
}

std::string sample_id(const ManifestRecord& record) {
    std::string stem = fs::path(record.depth_path).stem().string();
    const std::string suffix = "_depth";
    if (stem.size() > suffix.size() && stem.compare(stem.size() - suffix.size(),
                                                    suffix.size(), suffix) == 0)
        stem.resize(stem.size() - suffix.size());
    return stem;
}

namespace {

std::string report_unit(const DatasetManifest& manifest) {
    for (const auto& r : manifest.records)
        if (r.unit_to_cm == 1.0f) return "disparity";
    return "cm";
}

EvalResult run_metric(const DatasetManifest& manifest, const DegradationSpec& spec,
                      const std::string& fingerprint,
                      const std::function<Plane<float>(const SamplePair&, std::size_t)>& predict) {
    if (manifest.split != "test") throw ConfigError("evaluate: manifest split must be 'test'");
    if (manifest.records.empty()) throw ConfigError("evaluate: manifest has no records");
    EvalResult res;
    res.report.unit = report_unit(manifest);
    res.report.scale = spec.scale;
    res.report.fingerprint = fingerprint;
    for (std::size_t i = 0; i < manifest.count(); ++i) {
        const std::string id = sample_id(manifest.records[i]);
        try {
            const SamplePair pair = load_sample_pair(manifest, i, spec);
            const Plane<float> pred = predict(pair, i);
            const double v = rmse(pred, pair.depth_hr.values, pair.depth_hr.valid_mask,
                                  static_cast<double>(pair.depth_hr.unit_to_cm));
            res.report.per_sample.emplace_back(id, v);
        } catch (const Error& e) {
            res.failures.emplace_back(id, e.what());
        }
    }
    res.report.mean_rmse = res.report.recompute_mean();
    return res;
}

}  // namespace

EvalResult evaluate(SuftNetwork<float>& net, const DatasetManifest& manifest,
                    const DegradationSpec& spec, const EvalOptions& opts) {
    if (net.config().scale != spec.scale)
        throw ConfigError("evaluate: network scale does not match degradation scale");
    const bool want_maps = !opts.export_dir.empty();
    if (want_maps) fs::create_directories(opts.export_dir);
    const bool want_unc =
        want_maps && opts.export_uncertainty && net.config().uncertainty;
    return run_metric(
        manifest, spec, config_fingerprint(net.config()),
        [&](const SamplePair& pair, std::size_t i) {
            const Plane<float> d_in = normalize_depth(pair.depth_lr, opts.d_max);
            ModelOutput<float> out = net.infer(d_in, pair.guidance.values, want_unc);
            Plane<float> pred = denormalize_depth(out.depth_sr, opts.d_max);
            if (want_maps) {
                DepthMap pm{pred, pair.depth_hr.valid_mask, pair.depth_hr.unit_to_cm};
                export_maps(opts.export_dir, sample_id(manifest.records[i]), pm, pair.depth_hr,
                            out.uncertainty);
            }
            return pred;
        });
}

EvalResult baseline_bicubic(const DatasetManifest& manifest, const DegradationSpec& spec) {
    return run_metric(manifest, spec, "bicubic-baseline",
                      [](const SamplePair& pair, std::size_t) {
                          return bicubic_resample(pair.depth_lr.values,
                                                  pair.depth_hr.height(), pair.depth_hr.width());
                      });
}

void export_maps(const std::string& out_dir, const std::string& id, const DepthMap& prediction,
                 const DepthMap& gt, const std::vector<Tensor<float>>& uncertainty) {
    const fs::path dir(out_dir);
    write_depth_png((dir / (id + "_sr.png")).string(), prediction);

    const Plane<float> zero = Plane<float>::Zero(gt.values.rows(), gt.values.cols());
    const Plane<float> err =
        gt.valid_mask.select((prediction.values - gt.values).abs(), zero);
    const float err_max = err.maxCoeff();
    write_false_color_png((dir / (id + "_err.png")).string(), err, err_max);

    std::ofstream meta((dir / (id + "_meta.txt")).string(), std::ios::trunc);
    if (!meta) throw IoError("cannot write metadata sidecar for " + id);
    meta << "sr: 16-bit PNG, value = millimeters\n";
    meta << "err: false color, linear ramp over [0, " << err_max << "] native units\n";
    for (std::size_t k = 0; k < uncertainty.size(); ++k) {
        const auto& u = uncertainty[k];
        if (u.channels < 1) continue;
        const std::string name = id + "_unc" + std::to_string(k) + ".png";
        write_false_color_png((dir / name).string(), u.channel(0), 1.0f);
        meta << "unc" << k << ": false color, linear ramp over [0, 1]\n";
    }
    if (!meta) throw IoError("metadata write failed for " + id);
}

}  // namespace suft
