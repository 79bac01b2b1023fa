#include "suft/data.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "suft/errors.hpp"

namespace fs = std::filesystem;

namespace suft {

bool valid_scale(int s) { return s == 2 || s == 4 || s == 8 || s == 16; }

void DegradationSpec::validate() const {
    if (!valid_scale(scale)) throw ConfigError("DegradationSpec: scale must be in {2,4,8,16}");
}

void SamplePair::validate() const {
    depth_hr.validate();
    depth_lr.validate();
    guidance.validate();
    if (!valid_scale(scale)) throw ConfigError("SamplePair: scale must be in {2,4,8,16}");
    if (guidance.height() != depth_hr.height() || guidance.width() != depth_hr.width())
        throw DimensionMismatch("SamplePair: guidance dims differ from HR depth");
    if (depth_hr.height() != scale * depth_lr.height() || depth_hr.width() != scale * depth_lr.width())
        throw DimensionMismatch("SamplePair: HR dims are not scale x LR dims");
}

DatasetManifest DatasetManifest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound("cannot open manifest: " + path);

    DatasetManifest m;
    m.base_dir = fs::path(path).parent_path().string();

    std::string header;
    if (!std::getline(in, header)) throw MalformedFile("manifest is empty: " + path);
    // header: split=train|test, d_max=<real>
    {
        std::string s = header;
        for (char& c : s)
            if (c == ',') c = ' ';
        std::istringstream hs(s);
        std::string tok;
        bool have_split = false, have_dmax = false;
        while (hs >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) throw MalformedFile("manifest header token without '=': " + tok);
            const std::string key = tok.substr(0, eq);
            const std::string val = tok.substr(eq + 1);
            if (key == "split") {
                if (val != "train" && val != "test")
                    throw MalformedFile("manifest split must be train or test, got: " + val);
                m.split = val;
                have_split = true;
            } else if (key == "d_max") {
                try {
                    m.d_max = std::stof(val);
                } catch (const std::exception&) {
                    throw MalformedFile("manifest d_max is not a number: " + val);
                }
                have_dmax = true;
            } else {
                throw MalformedFile("manifest header has unknown key: " + key);
            }
        }
        if (!have_split || !have_dmax)
            throw MalformedFile("manifest header must provide split and d_max");
        if (m.d_max <= 0.0f) throw MalformedFile("manifest d_max must be > 0");
    }

    std::string line;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::size_t start = 0;
        while (true) {
            const auto tab = line.find('\t', start);
            if (tab == std::string::npos) {
                cols.push_back(line.substr(start));
                break;
            }
            cols.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        if (cols.size() != 3 && cols.size() != 4)
            throw MalformedFile("manifest line " + std::to_string(line_no) + ": expected 3 or 4 tab-separated fields");
        ManifestRecord rec;
        rec.depth_path = cols[0];
        rec.rgb_path = cols[1];
        try {
            rec.unit_to_cm = std::stof(cols[2]);
        } catch (const std::exception&) {
            throw MalformedFile("manifest line " + std::to_string(line_no) + ": unit_to_cm is not a number");
        }
        if (rec.unit_to_cm <= 0.0f)
            throw MalformedFile("manifest line " + std::to_string(line_no) + ": unit_to_cm must be > 0");
        if (cols.size() == 4) rec.lr_path = cols[3];
        m.records.push_back(std::move(rec));
    }
    return m;
}

void DatasetManifest::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path);
    out << "split=" << split << ", d_max=" << d_max << "\n";
    for (const auto& r : records) {
        out << r.depth_path << '\t' << r.rgb_path << '\t' << r.unit_to_cm;
        if (!r.lr_path.empty()) out << '\t' << r.lr_path;
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

DepthMap degrade(const DepthMap& depth_hr, const DegradationSpec& spec) {
    spec.validate();
    const int s = spec.scale;
    const int h = depth_hr.height();
    const int w = depth_hr.width();
    if (h % s != 0 || w % s != 0)
        throw ShapeError("degrade: dims " + std::to_string(h) + "x" + std::to_string(w) +
                         " not divisible by scale " + std::to_string(s));

    DepthMap lr;
    lr.unit_to_cm = depth_hr.unit_to_cm;
    lr.values = bicubic_resample(depth_hr.values, h / s, w / s);
    lr.values = lr.values.max(0.0f);  // cubic overshoot can dip below zero
    lr.valid_mask.resize(h / s, w / s);
    for (int y = 0; y < h / s; ++y) {
        for (int x = 0; x < w / s; ++x) {
            bool all = true;
            for (int dy = 0; dy < s && all; ++dy)
                for (int dx = 0; dx < s && all; ++dx)
                    all = depth_hr.valid_mask(y * s + dy, x * s + dx);
            lr.valid_mask(y, x) = all;
        }
    }
    return lr;
}

std::pair<DepthMap, GuidanceImage> crop_training_patch(const DepthMap& depth_hr,
                                                       const GuidanceImage& guidance,
                                                       int size, std::uint64_t seed) {
    const int h = depth_hr.height();
    const int w = depth_hr.width();
    if (guidance.height() != h || guidance.width() != w)
        throw ShapeError("crop_training_patch: modalities are not aligned");
    if (size < 1 || size > h || size > w)
        throw InvalidArgument("crop_training_patch: patch size " + std::to_string(size) +
                              " does not fit " + std::to_string(h) + "x" + std::to_string(w));

    SplitMix64 rng(seed);
    const int oy = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(h - size + 1)));
    const int ox = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(w - size + 1)));

    DepthMap d;
    d.unit_to_cm = depth_hr.unit_to_cm;
    d.values = depth_hr.values.block(oy, ox, size, size);
    d.valid_mask = depth_hr.valid_mask.block(oy, ox, size, size);

    GuidanceImage g;
    g.values = Tensor<float>(3, size, size);
    for (int c = 0; c < 3; ++c)
        g.values.channel(c) = guidance.values.channel(c).block(oy, ox, size, size);
    return {std::move(d), std::move(g)};
}

Plane<float> normalize_depth(const DepthMap& d, float d_max) {
    if (d_max <= 0.0f) throw InvalidArgument("normalize_depth: d_max must be > 0");
    return (d.values / d_max).cwiseMax(0.0f).cwiseMin(1.0f);
}

Plane<float> denormalize_depth(const Plane<float>& normalized, float d_max) {
    if (d_max <= 0.0f) throw InvalidArgument("denormalize_depth: d_max must be > 0");
    return normalized * d_max;
}

namespace {

std::string resolve(const std::string& base_dir, const std::string& path) {
    fs::path p(path);
    if (p.is_absolute() || base_dir.empty()) return path;
    return (fs::path(base_dir) / p).string();
}

}  // namespace

ManifestRecord DatasetManifest::resolved(std::size_t index) const {
    if (index >= records.size())
        throw InvalidArgument("DatasetManifest: record index out of range");
    ManifestRecord rec = records[index];
    rec.depth_path = resolve(base_dir, rec.depth_path);
    rec.rgb_path = resolve(base_dir, rec.rgb_path);
    if (!rec.lr_path.empty()) rec.lr_path = resolve(base_dir, rec.lr_path);
    return rec;
}

namespace {

DepthMap load_depth_any(const std::string& path, float unit_to_cm) {
    const std::string ext = fs::path(path).extension().string();
    if (ext == ".raw") return read_depth_raw(path, unit_to_cm);
    DepthMap d = read_depth_png(path);
    d.unit_to_cm = unit_to_cm;
    return d;
}

}  // namespace

std::pair<DepthMap, GuidanceImage> load_sample(const ManifestRecord& record) {
    DepthMap depth = load_depth_any(record.depth_path, record.unit_to_cm);
    GuidanceImage rgb = read_rgb_png(record.rgb_path);
    if (rgb.height() != depth.height() || rgb.width() != depth.width())
        throw DimensionMismatch("load_sample: depth " + std::to_string(depth.height()) + "x" +
                                std::to_string(depth.width()) + " vs RGB " +
                                std::to_string(rgb.height()) + "x" + std::to_string(rgb.width()));
    return {std::move(depth), std::move(rgb)};
}

SamplePair load_sample_pair(const DatasetManifest& manifest, std::size_t index,
                            const DegradationSpec& spec) {
    const ManifestRecord rec = manifest.resolved(index);

    SamplePair pair;
    std::tie(pair.depth_hr, pair.guidance) = load_sample(rec);
    pair.scale = spec.scale;

    if (spec.mode == DegradationSpec::Mode::provided_lr) {
        if (rec.lr_path.empty())
            throw MalformedFile("provided_lr mode needs an lr_path column in the manifest");
        DepthMap lr = load_depth_any(rec.lr_path, rec.unit_to_cm);
        // Real-world track: resample the sensor LR map to the nearest
        // supported factor (x2) of the HR target.
        const int th = pair.depth_hr.height() / spec.scale;
        const int tw = pair.depth_hr.width() / spec.scale;
        if (pair.depth_hr.height() % spec.scale != 0 || pair.depth_hr.width() % spec.scale != 0)
            throw DimensionMismatch("provided_lr: HR dims not divisible by scale");
        if (lr.height() != th || lr.width() != tw) {
            DepthMap scaled;
            scaled.unit_to_cm = lr.unit_to_cm;
            scaled.values = bicubic_resample(lr.values, th, tw).max(0.0f);
            scaled.valid_mask = Mask::Constant(th, tw, true);
            for (int y = 0; y < th; ++y)
                for (int x = 0; x < tw; ++x) {
                    const int sy = std::min<int>(lr.height() - 1, y * lr.height() / th);
                    const int sx = std::min<int>(lr.width() - 1, x * lr.width() / tw);
                    scaled.valid_mask(y, x) = lr.valid_mask(sy, sx);
                }
            lr = std::move(scaled);
        }
        pair.depth_lr = std::move(lr);
    } else {
        pair.depth_lr = degrade(pair.depth_hr, spec);
    }
    pair.validate();
    return pair;
}

}  // namespace suft
