#include "suft/train.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <zlib.h>

namespace fs = std::filesystem;

namespace suft {

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace {

std::string fmt_double(double v) {
    char b[64];
    std::snprintf(b, sizeof(b), "%.17g", v);
    return b;
}

void put_u32(std::string& s, std::uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    s.append(b, 4);
}

std::uint32_t get_u32(const std::string& s, std::size_t& off) {
    if (off + 4 > s.size()) throw MalformedFile("checkpoint: truncated binary section");
    std::uint32_t v = 0;
    std::memcpy(&v, s.data() + off, 4);
    off += 4;
    return v;
}

std::string take_line(const std::string& s, std::size_t& off) {
    const auto nl = s.find('\n', off);
    if (nl == std::string::npos) throw MalformedFile("checkpoint: truncated header");
    std::string line = s.substr(off, nl - off);
    off = nl + 1;
    return line;
}

std::pair<std::string, std::string> split_kv(const std::string& line) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw MalformedFile("checkpoint: expected key=value, got: " + line);
    return {line.substr(0, eq), line.substr(eq + 1)};
}

long long parse_ll(const std::string& v) {
    try {
        return std::stoll(v);
    } catch (const std::exception&) {
        throw MalformedFile("checkpoint: not an integer: " + v);
    }
}

std::uint64_t parse_u64(const std::string& v) {
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        throw MalformedFile("checkpoint: not an unsigned integer: " + v);
    }
}

double parse_d(const std::string& v) {
    try {
        return std::stod(v);
    } catch (const std::exception&) {
        throw MalformedFile("checkpoint: not a number: " + v);
    }
}

void apply_network_key(NetworkConfig& c, const std::string& k, const std::string& v) {
    if (k == "scale") c.scale = static_cast<int>(parse_ll(v));
    else if (k == "base_channels") c.base_channels = static_cast<int>(parse_ll(v));
    else if (k == "rgb_blocks") c.rgb_blocks = static_cast<int>(parse_ll(v));
    else if (k == "shallow_groups") c.shallow_groups = static_cast<int>(parse_ll(v));
    else if (k == "shallow_blocks") c.shallow_blocks = static_cast<int>(parse_ll(v));
    else if (k == "deep_groups") c.deep_groups = static_cast<int>(parse_ll(v));
    else if (k == "deep_blocks") c.deep_blocks = static_cast<int>(parse_ll(v));
    else if (k == "suft_stages") c.suft_stages = static_cast<int>(parse_ll(v));
    else if (k == "fusion_mode") {
        if (v == "iterative") c.fusion_mode = NetworkConfig::Fusion::iterative;
        else if (v == "pre_upsample") c.fusion_mode = NetworkConfig::Fusion::pre_upsample;
        else throw MalformedFile("checkpoint: unknown fusion_mode: " + v);
    } else if (k == "uncertainty") c.uncertainty = parse_ll(v) != 0;
    else if (k == "attention_reduction") c.attention_reduction = static_cast<int>(parse_ll(v));
    else if (k == "share_flip_projection") c.share_flip_projection = parse_ll(v) != 0;
    else if (k == "seed") c.seed = parse_u64(v);
    else throw MalformedFile("checkpoint: unknown network key: " + k);
}

void apply_train_key(TrainConfig& c, const std::string& k, const std::string& v) {
    if (k == "lr0") c.lr0 = parse_d(v);
    else if (k == "decay_factor") c.decay_factor = parse_d(v);
    else if (k == "decay_period") c.decay_period = static_cast<int>(parse_ll(v));
    else if (k == "batch_size") c.batch_size = static_cast<int>(parse_ll(v));
    else if (k == "beta1") c.beta1 = parse_d(v);
    else if (k == "beta2") c.beta2 = parse_d(v);
    else if (k == "eps_opt") c.eps_opt = parse_d(v);
    else if (k == "epochs") c.epochs = static_cast<int>(parse_ll(v));
    else if (k == "patch_size") c.patch_size = static_cast<int>(parse_ll(v));
    else if (k == "seed") c.seed = parse_u64(v);
    else if (k == "checkpoint_every") c.checkpoint_every = static_cast<int>(parse_ll(v));
    else if (k == "d_max") c.d_max = static_cast<float>(parse_d(v));
    else throw MalformedFile("checkpoint: unknown train key: " + k);
}

}  // namespace

void train_epoch(SuftNetwork<float>& net, const DatasetManifest& manifest,
                 const TrainConfig& cfg, TrainState& state, const TraceSink& sink) {
    cfg.validate();
    if (manifest.split != "train") throw ConfigError("train_epoch: manifest split must be 'train'");
    if (manifest.records.empty()) throw ConfigError("train_epoch: manifest has no records");
    const int s = net.config().scale;
    if (cfg.patch_size % s != 0)
        throw ConfigError("train_epoch: patch_size must be divisible by scale");

    const double lr = lr_for_epoch(state.epoch, cfg);
    const DegradationSpec deg{DegradationSpec::Mode::synthetic_bicubic, s};

    std::vector<std::size_t> order(manifest.count());
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 shuffle_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(state.epoch), 0x517ffull));
    for (std::size_t i = order.size(); i-- > 1;)
        std::swap(order[i], order[shuffle_rng.next_below(i + 1)]);

    for (const std::size_t idx : order) {
        try {
            const ManifestRecord rec = manifest.resolved(idx);
            auto [hr, guide] = load_sample(rec);
            const std::uint64_t crop_seed =
                mix_seed(cfg.seed, static_cast<std::uint64_t>(state.epoch), idx);
            auto [hr_crop, g_crop] = crop_training_patch(hr, guide, cfg.patch_size, crop_seed);
            const DepthMap lr_crop = degrade(hr_crop, deg);
            const Plane<float> d_in = normalize_depth(lr_crop, cfg.d_max);
            const Plane<float> gt = normalize_depth(hr_crop, cfg.d_max);
            ModelOutput<float> out = net.forward(d_in, g_crop.values);
            const double loss =
                static_cast<double>(l1_loss(out.depth_sr, gt, hr_crop.valid_mask));
            net.zero_grad();
            net.backward(l1_loss_grad(out.depth_sr, gt, hr_crop.valid_mask));
            adam_step(net, state.adam, lr, cfg);
            if (sink) sink({state.adam.step, state.epoch, lr, loss});
        } catch (const Error& e) {
            net.clear_caches();
            throw Error("sample " + std::to_string(idx) + " (" +
                        manifest.records[idx].depth_path + "): " + e.what());
        }
    }
    state.epoch += 1;
}

void append_trace(const std::string& path, const TraceEntry& e) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError("cannot open trace file: " + path);
    out << e.step << '\t' << e.epoch << '\t' << fmt_double(e.lr) << '\t' << fmt_double(e.loss)
        << "\n";
    if (!out) throw IoError("trace write failed: " + path);
}

std::vector<TraceEntry> read_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound("cannot open trace file: " + path);
    std::vector<TraceEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        TraceEntry e;
        if (!(ls >> e.step >> e.epoch >> e.lr >> e.loss))
            throw MalformedFile("trace line is not step/epoch/lr/loss: " + line);
        entries.push_back(e);
    }
    return entries;
}

void save_checkpoint(const std::string& path, SuftNetwork<float>& net,
                     const TrainConfig& train_config, const TrainState& state) {
    const NetworkConfig& nc = net.config();
    std::string buf;
    buf += "suft-checkpoint\n";
    buf += "format_version=" + std::to_string(kCheckpointFormatVersion) + "\n";
    buf += "[network]\n";
    buf += "scale=" + std::to_string(nc.scale) + "\n";
    buf += "base_channels=" + std::to_string(nc.base_channels) + "\n";
    buf += "rgb_blocks=" + std::to_string(nc.rgb_blocks) + "\n";
    buf += "shallow_groups=" + std::to_string(nc.shallow_groups) + "\n";
    buf += "shallow_blocks=" + std::to_string(nc.shallow_blocks) + "\n";
    buf += "deep_groups=" + std::to_string(nc.deep_groups) + "\n";
    buf += "deep_blocks=" + std::to_string(nc.deep_blocks) + "\n";
    buf += "suft_stages=" + std::to_string(nc.suft_stages) + "\n";
    buf += "fusion_mode=" + fusion_mode_name(nc.fusion_mode) + "\n";
    buf += "uncertainty=" + std::string(nc.uncertainty ? "1" : "0") + "\n";
    buf += "attention_reduction=" + std::to_string(nc.attention_reduction) + "\n";
    buf += "share_flip_projection=" + std::string(nc.share_flip_projection ? "1" : "0") + "\n";
    buf += "seed=" + std::to_string(nc.seed) + "\n";
    buf += "[train]\n";
    buf += "lr0=" + fmt_double(train_config.lr0) + "\n";
    buf += "decay_factor=" + fmt_double(train_config.decay_factor) + "\n";
    buf += "decay_period=" + std::to_string(train_config.decay_period) + "\n";
    buf += "batch_size=" + std::to_string(train_config.batch_size) + "\n";
    buf += "beta1=" + fmt_double(train_config.beta1) + "\n";
    buf += "beta2=" + fmt_double(train_config.beta2) + "\n";
    buf += "eps_opt=" + fmt_double(train_config.eps_opt) + "\n";
    buf += "epochs=" + std::to_string(train_config.epochs) + "\n";
    buf += "patch_size=" + std::to_string(train_config.patch_size) + "\n";
    buf += "seed=" + std::to_string(train_config.seed) + "\n";
    buf += "checkpoint_every=" + std::to_string(train_config.checkpoint_every) + "\n";
    buf += "d_max=" + fmt_double(static_cast<double>(train_config.d_max)) + "\n";
    buf += "[state]\n";
    buf += "epoch=" + std::to_string(state.epoch) + "\n";
    buf += "step=" + std::to_string(state.adam.step) + "\n";

    struct Entry {
        std::string key;
        std::vector<int> shape;
        const float* data;
        Eigen::Index size;
    };
    std::vector<Entry> entries;
    net.visit_params([&](const ParamView<float>& p) {
        entries.push_back({p.name, p.shape, p.value, p.size});
    });
    for (const auto& [name, mv] : state.adam.moments) {
        entries.push_back({"adam.m." + name, {static_cast<int>(mv.first.size())},
                           mv.first.data(), mv.first.size()});
        entries.push_back({"adam.v." + name, {static_cast<int>(mv.second.size())},
                           mv.second.data(), mv.second.size()});
    }

    buf += "[tensors]\n";
    buf += "count=" + std::to_string(entries.size()) + "\n";
    for (const auto& e : entries) {
        put_u32(buf, static_cast<std::uint32_t>(e.key.size()));
        buf += e.key;
        put_u32(buf, static_cast<std::uint32_t>(e.shape.size()));
        for (int d : e.shape) put_u32(buf, static_cast<std::uint32_t>(d));
        buf.append(reinterpret_cast<const char*>(e.data),
                   static_cast<std::size_t>(e.size) * sizeof(float));
    }

    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
    put_u32(buf, crc);

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint: " + tmp);
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out) throw IoError("checkpoint write failed: " + tmp);
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileNotFound("cannot open checkpoint: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string buf = ss.str();
    if (buf.size() < 4) throw MalformedFile("checkpoint too small: " + path);

    std::size_t crc_off = buf.size() - 4;
    const std::uint32_t stored_crc = [&] {
        std::size_t o = crc_off;
        return get_u32(buf, o);
    }();
    const auto actual_crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(crc_off)));
    if (stored_crc != actual_crc)
        throw ChecksumMismatch("checkpoint checksum mismatch: " + path);

    std::size_t off = 0;
    if (take_line(buf, off) != "suft-checkpoint")
        throw MalformedFile("not a suft checkpoint: " + path);
    {
        auto [k, v] = split_kv(take_line(buf, off));
        if (k != "format_version") throw MalformedFile("checkpoint: missing format_version");
        if (parse_ll(v) != kCheckpointFormatVersion)
            throw VersionMismatch("checkpoint format_version " + v + " is not supported");
    }

    LoadedCheckpoint ck;
    std::string section;
    std::size_t tensor_count = 0;
    for (;;) {
        const std::string line = take_line(buf, off);
        if (line == "[network]" || line == "[train]" || line == "[state]") {
            section = line;
            continue;
        }
        if (line == "[tensors]") {
            auto [k, v] = split_kv(take_line(buf, off));
            if (k != "count") throw MalformedFile("checkpoint: missing tensor count");
            tensor_count = static_cast<std::size_t>(parse_ll(v));
            break;
        }
        auto [k, v] = split_kv(line);
        if (section == "[network]") apply_network_key(ck.net_config, k, v);
        else if (section == "[train]") apply_train_key(ck.train_config, k, v);
        else if (section == "[state]") {
            if (k == "epoch") ck.state.epoch = static_cast<int>(parse_ll(v));
            else if (k == "step") ck.state.adam.step = parse_ll(v);
            else throw MalformedFile("checkpoint: unknown state key: " + k);
        } else {
            throw MalformedFile("checkpoint: key before any section: " + line);
        }
    }

    std::map<std::string, std::pair<std::vector<int>, std::vector<float>>> tensors;
    for (std::size_t t = 0; t < tensor_count; ++t) {
        const std::uint32_t klen = get_u32(buf, off);
        if (off + klen > crc_off) throw MalformedFile("checkpoint: truncated tensor key");
        std::string key = buf.substr(off, klen);
        off += klen;
        const std::uint32_t rank = get_u32(buf, off);
        std::vector<int> shape(rank);
        std::size_t n = 1;
        for (std::uint32_t r = 0; r < rank; ++r) {
            shape[r] = static_cast<int>(get_u32(buf, off));
            n *= static_cast<std::size_t>(shape[r]);
        }
        if (off + n * sizeof(float) > crc_off)
            throw MalformedFile("checkpoint: truncated tensor data for " + key);
        std::vector<float> data(n);
        std::memcpy(data.data(), buf.data() + off, n * sizeof(float));
        off += n * sizeof(float);
        if (!tensors.emplace(std::move(key), std::make_pair(std::move(shape), std::move(data)))
                 .second)
            throw MalformedFile("checkpoint: duplicate tensor key");
    }

    ck.net = SuftNetwork<float>(ck.net_config);
    std::map<std::string, Eigen::Index> param_sizes;
    ck.net.visit_params([&](const ParamView<float>& p) {
        param_sizes[p.name] = p.size;
        auto it = tensors.find(p.name);
        if (it == tensors.end())
            throw MalformedFile("checkpoint: missing parameter tensor: " + p.name);
        if (static_cast<Eigen::Index>(it->second.second.size()) != p.size)
            throw MalformedFile("checkpoint: tensor size mismatch for " + p.name);
        std::memcpy(p.value, it->second.second.data(),
                    static_cast<std::size_t>(p.size) * sizeof(float));
        tensors.erase(it);
    });
    for (auto& [key, sv] : tensors) {
        const bool is_m = key.rfind("adam.m.", 0) == 0;
        const bool is_v = key.rfind("adam.v.", 0) == 0;
        if (!is_m && !is_v)
            throw MalformedFile("checkpoint: unexpected tensor key: " + key);
        const std::string pname = key.substr(7);
        const auto ps = param_sizes.find(pname);
        if (ps == param_sizes.end())
            throw MalformedFile("checkpoint: moment for unknown parameter: " + pname);
        if (static_cast<Eigen::Index>(sv.second.size()) != ps->second)
            throw MalformedFile("checkpoint: moment size mismatch for " + pname);
        auto& mv = ck.state.adam.moments[pname];
        auto& dst = is_m ? mv.first : mv.second;
        dst = Eigen::Map<const ArrayX<float>>(sv.second.data(),
                                              static_cast<Eigen::Index>(sv.second.size()));
    }
    for (const auto& [pname, mv] : ck.state.adam.moments)
        if (mv.first.size() != mv.second.size())
            throw MalformedFile("checkpoint: unpaired adam moments for: " + pname);
    return ck;
}

}  // namespace suft
