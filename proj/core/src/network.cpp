#include "transmamba/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "transmamba/ops.hpp"

namespace transmamba {

// ---------------------------------------------------------------------------
// key/value text

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::size_t parse_size(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        if (!value.empty() && value[0] == '-') throw std::invalid_argument("negative");
        v = std::stoull(value, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': expected a non-negative integer, got '" + value + "'");
    }
    if (pos != value.size()) {
        throw std::invalid_argument("config key '" + key + "': expected a non-negative integer, got '" + value + "'");
    }
    return static_cast<std::size_t>(v);
}

double parse_double(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(value, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': expected a number, got '" + value + "'");
    }
    if (pos != value.size()) throw std::invalid_argument("config key '" + key + "': expected a number, got '" + value + "'");
    return v;
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& value) {
    std::vector<std::size_t> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_size(key, trim(item)));
    if (out.empty()) throw std::invalid_argument("config key '" + key + "': empty list");
    return out;
}

std::string format_size_list(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return os.str();
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("line " + std::to_string(lineno) + ": expected 'key = value', got '" + line + "'");
        }
        std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw std::invalid_argument("line " + std::to_string(lineno) + ": empty key");
        if (kv.count(key)) throw std::invalid_argument("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        kv[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

std::string format_key_values(const KeyValues& kv) {
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// enums

std::string to_string(FlipAxis v) { return v == FlipAxis::channel ? "channel" : "sequence"; }
std::string to_string(ScaleMode v) { return v == ScaleMode::heads ? "heads" : "token_dim"; }
std::string to_string(DirectionOrder v) {
    switch (v) {
        case DirectionOrder::forward_backward: return "forward_backward";
        case DirectionOrder::backward_forward: return "backward_forward";
        case DirectionOrder::forward_forward: return "forward_forward";
        case DirectionOrder::backward_backward: return "backward_backward";
    }
    return "?";
}

FlipAxis parse_flip_axis(const std::string& s) {
    if (s == "channel") return FlipAxis::channel;
    if (s == "sequence") return FlipAxis::sequence;
    throw std::invalid_argument("flip_axis must be 'channel' or 'sequence', got '" + s + "'");
}

ScaleMode parse_scale_mode(const std::string& s) {
    if (s == "heads") return ScaleMode::heads;
    if (s == "token_dim") return ScaleMode::token_dim;
    throw std::invalid_argument("scale_mode must be 'heads' or 'token_dim', got '" + s + "'");
}

DirectionOrder parse_direction_order(const std::string& s) {
    for (auto v : {DirectionOrder::forward_backward, DirectionOrder::backward_forward, DirectionOrder::forward_forward,
                   DirectionOrder::backward_backward}) {
        if (s == to_string(v)) return v;
    }
    throw std::invalid_argument("direction_order must be one of forward_backward, backward_forward, forward_forward, "
                                "backward_backward; got '" + s + "'");
}

// ---------------------------------------------------------------------------
// ModelConfig

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper() {
    ModelConfig c;
    c.base_channels = 36;
    c.ssm_state_dim = 16;
    return c;
}

void ModelConfig::validate() const {
    if (base_channels == 0) throw std::invalid_argument("base_channels must be positive");
    const std::size_t n = levels();
    if (n == 0) throw std::invalid_argument("at least one level is required");
    if (cbsm_counts.size() != n || heads.size() != n) {
        throw std::invalid_argument("sdtb_counts, cbsm_counts and heads must all have one entry per level (" +
                                    std::to_string(n) + ")");
    }
    if (bands == 0) throw std::invalid_argument("bands must be positive");
    if (!(seff_ratio > 0)) throw std::invalid_argument("seff_ratio must be positive");
    if (seff_weight_size < 2) throw std::invalid_argument("seff_weight_size must be at least 2");
    if (ssm_state_dim == 0) throw std::invalid_argument("ssm_state_dim must be positive");
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = channels_at(i);
        if (sdtb_counts[i] == 0 || cbsm_counts[i] == 0) {
            throw std::invalid_argument("level " + std::to_string(i + 1) + ": block counts must be positive");
        }
        if (heads[i] == 0 || (2 * c * bands) % heads[i] != 0) {
            throw std::invalid_argument("level " + std::to_string(i + 1) + ": heads=" + std::to_string(heads[i]) +
                                        " must divide 2*C*b = " + std::to_string(2 * c * bands));
        }
        seff_hidden_channels(c, seff_ratio);
    }
}

bool ModelConfig::accepts_extent(std::size_t height, std::size_t width) const {
    const std::size_t d = spatial_divisor();
    if (height == 0 || width == 0 || height % d || width % d) return false;
    for (std::size_t i = 0; i < levels(); ++i) {
        if (((height >> i) * (width >> i)) % bands) return false;
    }
    return true;
}

void ModelConfig::apply(const KeyValues& kv) {
    auto get = [&](const char* key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    if (auto v = get("base_channels")) base_channels = parse_size("base_channels", *v);
    if (auto v = get("sdtb_counts")) sdtb_counts = parse_size_list("sdtb_counts", *v);
    if (auto v = get("cbsm_counts")) cbsm_counts = parse_size_list("cbsm_counts", *v);
    if (auto v = get("heads")) heads = parse_size_list("heads", *v);
    if (auto v = get("bands")) bands = parse_size("bands", *v);
    if (auto v = get("seff_ratio")) seff_ratio = parse_double("seff_ratio", *v);
    if (auto v = get("seff_weight_size")) seff_weight_size = parse_size("seff_weight_size", *v);
    if (auto v = get("ssm_state_dim")) ssm_state_dim = parse_size("ssm_state_dim", *v);
    if (auto v = get("flip_axis")) flip_axis = parse_flip_axis(*v);
    if (auto v = get("scale_mode")) scale_mode = parse_scale_mode(*v);
    if (auto v = get("direction_order")) direction_order = parse_direction_order(*v);
}

KeyValues ModelConfig::to_key_values() const {
    return {
        {"base_channels", std::to_string(base_channels)},
        {"sdtb_counts", format_size_list(sdtb_counts)},
        {"cbsm_counts", format_size_list(cbsm_counts)},
        {"heads", format_size_list(heads)},
        {"bands", std::to_string(bands)},
        {"seff_ratio", format_double(seff_ratio)},
        {"seff_weight_size", std::to_string(seff_weight_size)},
        {"ssm_state_dim", std::to_string(ssm_state_dim)},
        {"flip_axis", to_string(flip_axis)},
        {"scale_mode", to_string(scale_mode)},
        {"direction_order", to_string(direction_order)},
    };
}

// ---------------------------------------------------------------------------
// parameters

namespace {

StageParams make_stage(ParamSource& src, const std::string& prefix, const ModelConfig& cfg, std::size_t level) {
    const std::size_t c = cfg.channels_at(level);
    StageParams s;
    for (std::size_t j = 0; j < cfg.sdtb_counts[level]; ++j) {
        s.sdtbs.push_back(make_sdtb_params(src, prefix + ".sdtb" + std::to_string(j), c, cfg.heads[level], cfg.bands,
                                           cfg.seff_ratio, cfg.seff_weight_size));
    }
    for (std::size_t j = 0; j < cfg.cbsm_counts[level]; ++j) {
        s.cbsms.push_back(make_cbsm_params(src, prefix + ".cbsm" + std::to_string(j), c, cfg.ssm_state_dim));
    }
    s.fuse = src.get(prefix + ".fuse", {c, 2 * c, 1, 1}, Init::kaiming_uniform);
    return s;
}

}  // namespace

NetworkParams build_network_params(ParamSource& src, const ModelConfig& cfg) {
    cfg.validate();
    const std::size_t levels = cfg.levels();
    NetworkParams p;
    p.embed = src.get("embed", {cfg.base_channels, 3, 3, 3}, Init::kaiming_uniform);
    for (std::size_t i = 0; i < levels; ++i) {
        const std::string lvl = std::to_string(i + 1);
        p.encoder.push_back(make_stage(src, "enc" + lvl, cfg, i));
        if (i + 1 < levels) {
            const std::size_t c = cfg.channels_at(i);
            p.down.push_back(src.get("down" + lvl, {2 * c, 4 * c, 1, 1}, Init::kaiming_uniform));
        }
    }
    // decoder stages are indexed by level, built from the deepest upward
    p.up.resize(levels - 1);
    p.skip_fuse.resize(levels - 1);
    p.decoder.resize(levels - 1);
    for (std::size_t i = levels - 1; i-- > 0;) {
        const std::string lvl = std::to_string(i + 1);
        const std::size_t c = cfg.channels_at(i);
        p.up[i] = src.get("up" + lvl, {4 * c, 2 * c, 1, 1}, Init::kaiming_uniform);
        p.skip_fuse[i] = src.get("dec" + lvl + ".skip", {c, 2 * c, 1, 1}, Init::kaiming_uniform);
        p.decoder[i] = make_stage(src, "dec" + lvl, cfg, i);
    }
    p.output = src.get("output", {3, cfg.base_channels, 3, 3}, Init::kaiming_uniform);
    return p;
}

ModelState init_model_state(const ModelConfig& cfg, std::uint64_t seed) {
    ModelState state;
    ParamInitializer init(state, seed);
    build_network_params(init, cfg);
    return state;
}

std::vector<LayoutRecorder::Entry> parameter_layout(const ModelConfig& cfg) {
    LayoutRecorder rec;
    build_network_params(rec, cfg);
    return rec.entries();
}

std::size_t parameter_count(const ModelState& state) { return state.parameter_count(); }

std::size_t parameter_count(const ModelConfig& cfg) {
    LayoutRecorder rec;
    build_network_params(rec, cfg);
    return rec.parameter_count();
}

ModelDescription describe(const ModelConfig& cfg) {
    cfg.validate();
    ModelDescription d;
    std::map<std::string, std::size_t> per_level;
    for (const auto& e : parameter_layout(cfg)) {
        const std::size_t n = shape_numel(e.shape);
        d.total_parameters += n;
        // "enc3.sdtb0..." / "dec3..." belong to level 3; transitions and embed/output are not level-local
        if ((e.name.rfind("enc", 0) == 0 || e.name.rfind("dec", 0) == 0) && e.name.size() > 3) {
            per_level[e.name.substr(3, e.name.find('.') - 3)] += n;
        }
    }
    for (std::size_t i = 0; i < cfg.levels(); ++i) {
        LevelDescription l;
        l.level = i + 1;
        l.scale = std::size_t{1} << i;
        l.channels = cfg.channels_at(i);
        l.sdtbs = cfg.sdtb_counts[i];
        l.cbsms = cfg.cbsm_counts[i];
        l.heads = cfg.heads[i];
        l.attention_rows = 2 * l.channels * cfg.bands;
        l.seff_hidden = seff_hidden_channels(l.channels, cfg.seff_ratio);
        l.parameters = per_level[std::to_string(i + 1)];
        d.levels.push_back(l);
    }
    return d;
}

std::string format_description(const ModelConfig& cfg, const ModelDescription& d) {
    std::ostringstream os;
    os << "bands=" << cfg.bands << " seff_ratio=" << cfg.seff_ratio << " seff_weight=" << cfg.seff_weight_size << "x"
       << cfg.seff_weight_size << " ssm_state=" << cfg.ssm_state_dim << " flip=" << to_string(cfg.flip_axis)
       << " order=" << to_string(cfg.direction_order) << " scale=" << to_string(cfg.scale_mode) << "\n";
    os << std::left << std::setw(7) << "level" << std::setw(9) << "extent" << std::setw(10) << "channels"
       << std::setw(7) << "sdtbs" << std::setw(7) << "cbsms" << std::setw(7) << "heads" << std::setw(11)
       << "attn_rows" << std::setw(12) << "seff_hidden" << "params\n";
    for (const auto& l : d.levels) {
        os << std::left << std::setw(7) << l.level << std::setw(9) << ("H/" + std::to_string(l.scale))
           << std::setw(10) << l.channels << std::setw(7) << l.sdtbs << std::setw(7) << l.cbsms << std::setw(7)
           << l.heads << std::setw(11) << l.attention_rows << std::setw(12) << l.seff_hidden << l.parameters << "\n";
    }
    os << "total parameters: " << d.total_parameters << " (" << std::fixed << std::setprecision(2)
       << static_cast<double>(d.total_parameters) / 1e6 << "M)\n";
    return os.str();
}

std::pair<std::size_t, std::size_t> padded_extent(std::size_t height, std::size_t width, const ModelConfig& cfg) {
    const std::size_t d = cfg.spatial_divisor();
    const std::size_t h0 = (height + d - 1) / d * d;
    const std::size_t w0 = (width + d - 1) / d * d;
    // b-divisibility at the deepest level repeats with period b*d along each axis,
    // so a window of that many steps always contains a solution
    const std::size_t steps = cfg.bands + 1;
    std::pair<std::size_t, std::size_t> best{0, 0};
    std::size_t best_area = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i <= steps; ++i) {
        for (std::size_t j = 0; j <= steps; ++j) {
            const std::size_t h = h0 + i * d, w = w0 + j * d;
            if (!cfg.accepts_extent(h, w)) continue;
            if (h * w < best_area) {
                best_area = h * w;
                best = {h, w};
            }
        }
    }
    if (best_area == std::numeric_limits<std::size_t>::max()) {
        throw std::invalid_argument("no admissible padded extent for " + std::to_string(height) + "x" +
                                    std::to_string(width));
    }
    return best;
}

// ---------------------------------------------------------------------------
// Network

Network::Network(ModelConfig cfg, const ModelState& state) : cfg_(std::move(cfg)) {
    ParamBinder binder(state);
    params_ = build_network_params(binder, cfg_);
}

std::shared_ptr<const MeshIndex> Network::mesh(std::size_t height, std::size_t width) const {
    return meshes_.get(height, width, cfg_.bands);
}

Tensor Network::run_stage(const Tensor& x, const StageParams& stage, AttentionProbe* probe) const {
    const auto m = mesh(x.size(1), x.size(2));
    Tensor t = x;
    for (const auto& block : stage.sdtbs) t = sdtb_forward(t, block, *m, cfg_.scale_mode, probe);
    const Tensor s = mamba_layer(x, stage.cbsms, cfg_.flip_axis, cfg_.direction_order);
    return conv2d_same(concat({t, s}, 0), stage.fuse);
}

Tensor Network::forward_single(const Tensor& rainy, AttentionProbe* probe) const {
    return add(rainy, residual(rainy, probe));
}

Tensor Network::residual(const Tensor& rainy, AttentionProbe* probe) const {
    if (rainy.dim() != 3 || rainy.size(0) != 3) {
        throw std::invalid_argument("forward: expected [3 x H x W], got " + shape_str(rainy.shape()));
    }
    const std::size_t h = rainy.size(1), w = rainy.size(2);
    if (!cfg_.accepts_extent(h, w)) {
        throw std::invalid_argument("forward: " + std::to_string(h) + "x" + std::to_string(w) +
                                    " violates divisibility (multiples of " + std::to_string(cfg_.spatial_divisor()) +
                                    ", per-level area divisible by b=" + std::to_string(cfg_.bands) + ")");
    }
    const std::size_t levels = cfg_.levels();
    std::vector<Tensor> skips;
    Tensor x = conv2d_same(rainy, params_.embed);
    for (std::size_t i = 0; i < levels; ++i) {
        Tensor f = run_stage(x, params_.encoder[i], probe);
        if (i + 1 < levels) x = conv2d_same(pixel_unshuffle(f, 2), params_.down[i]);
        skips.push_back(std::move(f));
    }
    Tensor y = skips.back();
    for (std::size_t i = levels - 1; i-- > 0;) {
        y = pixel_shuffle(conv2d_same(y, params_.up[i]), 2);
        y = conv2d_same(concat({y, skips[i]}, 0), params_.skip_fuse[i]);
        y = run_stage(y, params_.decoder[i], probe);
    }
    return conv2d_same(y, params_.output);
}

Tensor Network::forward(const Tensor& rainy, AttentionProbe* probe) const {
    if (rainy.dim() == 3) return forward_single(rainy, probe);
    if (rainy.dim() != 4) throw std::invalid_argument("forward: expected [3 x H x W] or [B x 3 x H x W], got " +
                                                      shape_str(rainy.shape()));
    std::vector<Tensor> outs;
    for (std::size_t b = 0; b < rainy.size(0); ++b) outs.push_back(forward_single(select(rainy, 0, b), probe));
    return stack(outs, 0);
}

Tensor Network::derain_image(const Tensor& rainy) const {
    if (rainy.dim() == 4) {
        std::vector<Tensor> outs;
        for (std::size_t b = 0; b < rainy.size(0); ++b) outs.push_back(derain_image(select(rainy, 0, b)));
        return stack(outs, 0);
    }
    if (rainy.dim() != 3 || rainy.size(0) != 3) {
        throw std::invalid_argument("derain: expected [3 x H x W], got " + shape_str(rainy.shape()));
    }
    const std::size_t h = rainy.size(1), w = rainy.size(2);
    if (h < 16 || w < 16) {
        throw std::invalid_argument("derain: image " + std::to_string(h) + "x" + std::to_string(w) +
                                    " is smaller than the 16x16 minimum");
    }
    NoGradGuard no_grad;
    const auto [ph, pw] = padded_extent(h, w, cfg_);
    if (ph == h && pw == w) return clamp(forward_single(rainy.detach(), nullptr), 0.0, 1.0);
    const Tensor padded = pad_reflect(rainy.detach(), ph - h, pw - w);
    const Tensor out = forward_single(padded, nullptr);
    return clamp(narrow(narrow(out, 1, 0, h), 2, 0, w), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

constexpr char kMagic[4] = {'T', 'M', 'B', 'A'};

template <class T>
void put_le(std::ostream& os, T v) {
    static_assert(std::is_unsigned_v<T>);
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get_le(std::istream& is, const std::string& what) {
    unsigned char buf[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw std::runtime_error("checkpoint truncated while reading " + what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
}

std::string get_bytes(std::istream& is, std::size_t n, const std::string& what) {
    std::string s(n, '\0');
    if (n && !is.read(s.data(), static_cast<std::streamsize>(n))) throw std::runtime_error("checkpoint truncated while reading " + what);
    return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const ModelState& state) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
    os.write(kMagic, 4);
    put_le<std::uint32_t>(os, kCheckpointVersion);
    const std::string config = format_key_values(cfg.to_key_values());
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(config.size()));
    os.write(config.data(), static_cast<std::streamsize>(config.size()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(state.params.size()));
    for (const auto& [name, t] : state.params) {
        put_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.dim()));
        for (auto e : t.shape()) put_le<std::uint64_t>(os, e);
        for (double v : t.data()) put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    if (!os.flush()) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

std::pair<ModelConfig, ModelState> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
    if (get_bytes(is, 4, "magic") != std::string(kMagic, 4)) throw std::runtime_error(path.string() + ": not a checkpoint (bad magic)");
    const auto version = get_le<std::uint32_t>(is, "version");
    if (version != kCheckpointVersion) {
        throw std::runtime_error(path.string() + ": unsupported checkpoint version " + std::to_string(version));
    }
    const auto config_len = get_le<std::uint32_t>(is, "config length");
    ModelConfig cfg;
    cfg.apply(parse_key_values(get_bytes(is, config_len, "config")));
    cfg.validate();

    std::map<std::string, Shape> expected;
    for (const auto& e : parameter_layout(cfg)) expected[e.name] = e.shape;

    const auto count = get_le<std::uint32_t>(is, "record count");
    ModelState state;
    for (std::uint32_t r = 0; r < count; ++r) {
        const auto name = get_bytes(is, get_le<std::uint32_t>(is, "name length"), "name");
        const auto rank = get_le<std::uint32_t>(is, "rank of " + name);
        Shape shape(rank);
        for (auto& e : shape) e = static_cast<std::size_t>(get_le<std::uint64_t>(is, "shape of " + name));
        const auto it = expected.find(name);
        if (it == expected.end()) throw std::runtime_error(path.string() + ": unknown parameter '" + name + "'");
        if (it->second != shape) {
            throw std::runtime_error(path.string() + ": parameter '" + name + "' has shape " + shape_str(shape) +
                                     ", configuration expects " + shape_str(it->second));
        }
        if (state.params.count(name)) throw std::runtime_error(path.string() + ": duplicate parameter '" + name + "'");
        std::vector<double> values(shape_numel(shape));
        for (auto& v : values) v = std::bit_cast<float>(get_le<std::uint32_t>(is, "values of " + name));
        state.params[name] = Tensor::from(shape, std::move(values), true);
    }
    for (const auto& [name, shape] : expected) {
        if (!state.params.count(name)) throw std::runtime_error(path.string() + ": missing parameter '" + name + "'");
    }
    return {cfg, std::move(state)};
}

std::uint64_t state_checksum(const ModelState& state) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t byte) {
        h ^= byte;
        h *= 1099511628211ull;
    };
    for (const auto& [name, t] : state.params) {
        for (char ch : name) mix(static_cast<unsigned char>(ch));
        for (double v : t.data()) {
            const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
            for (int i = 0; i < 4; ++i) mix((bits >> (8 * i)) & 0xffu);
        }
    }
    return h;
}

}  // namespace transmamba
