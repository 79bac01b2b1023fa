#include "suft/config.hpp"

#include <fstream>
#include <sstream>

namespace suft {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

int parse_int(const std::string& v, const std::string& where) {
    try {
        std::size_t pos = 0;
        const int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("expected integer, got '" + v + "' at " + where);
    }
}

double parse_double(const std::string& v, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("expected number, got '" + v + "' at " + where);
    }
}

std::uint64_t parse_seed(const std::string& v, const std::string& where) {
    try {
        std::size_t pos = 0;
        const std::uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("expected unsigned integer, got '" + v + "' at " + where);
    }
}

bool parse_bool(const std::string& v, const std::string& where) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError("expected true/false/1/0, got '" + v + "' at " + where);
}

void apply_key(RunConfig& cfg, const std::string& section, const std::string& key,
               const std::string& value, const std::string& where) {
    if (section == "paths") {
        if (key == "manifest") cfg.paths.manifest = value;
        else if (key == "test_manifest") cfg.paths.test_manifest = value;
        else if (key == "checkpoint") cfg.paths.checkpoint = value;
        else if (key == "out_dir") cfg.paths.out_dir = value;
        else if (key == "resume") cfg.paths.resume = value;
        else throw ConfigError("unknown key 'paths." + key + "' at " + where);
        return;
    }
    if (section == "data") {
        if (key == "scale") {
            const int s = parse_int(value, where);
            cfg.degradation.scale = s;
            cfg.network.scale = s;
        } else if (key == "mode") {
            if (value == "synthetic_bicubic")
                cfg.degradation.mode = DegradationSpec::Mode::synthetic_bicubic;
            else if (value == "provided_lr")
                cfg.degradation.mode = DegradationSpec::Mode::provided_lr;
            else throw ConfigError("unknown degradation mode '" + value + "' at " + where);
        } else {
            throw ConfigError("unknown key 'data." + key + "' at " + where);
        }
        return;
    }
    if (section == "network") {
        if (key == "base_channels") cfg.network.base_channels = parse_int(value, where);
        else if (key == "rgb_blocks") cfg.network.rgb_blocks = parse_int(value, where);
        else if (key == "shallow_groups") cfg.network.shallow_groups = parse_int(value, where);
        else if (key == "shallow_blocks") cfg.network.shallow_blocks = parse_int(value, where);
        else if (key == "deep_groups") cfg.network.deep_groups = parse_int(value, where);
        else if (key == "deep_blocks") cfg.network.deep_blocks = parse_int(value, where);
        else if (key == "suft_stages") cfg.network.suft_stages = parse_int(value, where);
        else if (key == "fusion_mode") {
            if (value == "iterative") cfg.network.fusion_mode = NetworkConfig::Fusion::iterative;
            else if (value == "pre_upsample")
                cfg.network.fusion_mode = NetworkConfig::Fusion::pre_upsample;
            else throw ConfigError("unknown fusion_mode '" + value + "' at " + where);
        } else if (key == "uncertainty") cfg.network.uncertainty = parse_bool(value, where);
        else if (key == "attention_reduction")
            cfg.network.attention_reduction = parse_int(value, where);
        else if (key == "share_flip_projection")
            cfg.network.share_flip_projection = parse_bool(value, where);
        else throw ConfigError("unknown key 'network." + key + "' at " + where);
        return;
    }
    if (section == "train") {
        if (key == "preset") {
            if (value == "standard") {
                const TrainConfig base;
                cfg.train.lr0 = base.lr0;
                cfg.train.decay_factor = base.decay_factor;
                cfg.train.decay_period = base.decay_period;
            } else if (value == "real_world") {
                const TrainConfig rw = TrainConfig::real_world();
                cfg.train.lr0 = rw.lr0;
                cfg.train.decay_factor = rw.decay_factor;
                cfg.train.decay_period = rw.decay_period;
            } else {
                throw ConfigError("unknown preset '" + value + "' at " + where);
            }
        } else if (key == "lr0") cfg.train.lr0 = parse_double(value, where);
        else if (key == "decay_factor") cfg.train.decay_factor = parse_double(value, where);
        else if (key == "decay_period") cfg.train.decay_period = parse_int(value, where);
        else if (key == "epochs") cfg.train.epochs = parse_int(value, where);
        else if (key == "patch_size") cfg.train.patch_size = parse_int(value, where);
        else if (key == "batch_size") cfg.train.batch_size = parse_int(value, where);
        else if (key == "seed") cfg.train.seed = parse_seed(value, where);
        else if (key == "checkpoint_every") cfg.train.checkpoint_every = parse_int(value, where);
        else if (key == "d_max") {
            cfg.train.d_max = static_cast<float>(parse_double(value, where));
            cfg.d_max_set = true;
        } else throw ConfigError("unknown key 'train." + key + "' at " + where);
        return;
    }
    throw ConfigError("unknown section '[" + section + "]' at " + where);
}

}  // namespace

void RunConfig::validate() const {
    network.validate();
    train.validate();
    if (!valid_scale(degradation.scale))
        throw ConfigError("RunConfig: scale must be one of 2, 4, 8, 16");
    if (degradation.scale != network.scale)
        throw ConfigError("RunConfig: data.scale and network scale disagree");
}

RunConfig RunConfig::from_text(const std::string& text, const std::string& source_name,
                               const std::vector<std::string>& overrides) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        const std::string where = source_name + ":" + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("unterminated section header at " + where);
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw ConfigError("empty section name at " + where);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key = value at " + where);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key at " + where);
        if (section.empty())
            throw ConfigError("key '" + key + "' before any section at " + where);
        apply_key(cfg, section, key, value, where);
    }
    for (std::size_t i = 0; i < overrides.size(); ++i) {
        const std::string& ov = overrides[i];
        const std::string where = "--set #" + std::to_string(i + 1) + " ('" + ov + "')";
        const auto eq = ov.find('=');
        const auto dot = ov.find('.');
        if (eq == std::string::npos || dot == std::string::npos || dot > eq)
            throw ConfigError("override must be section.key=value for " + where);
        apply_key(cfg, trim(ov.substr(0, dot)), trim(ov.substr(dot + 1, eq - dot - 1)),
                  trim(ov.substr(eq + 1)), where);
    }
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path,
                               const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw FileNotFound("cannot open config: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str(), path, overrides);
}

}  // namespace suft
