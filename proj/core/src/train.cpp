#include "transmamba/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "transmamba/ops.hpp"

namespace transmamba {

namespace {

std::size_t to_size(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
        const auto r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return static_cast<std::size_t>(r);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::vector<PatchStage> parse_stages(const std::string& key, const std::string& v) {
    std::vector<PatchStage> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw std::invalid_argument("config key '" + key + "': expected 'iter:patch,...', got '" + v + "'");
        }
        out.push_back({to_size(key, item.substr(0, colon)), to_size(key, item.substr(colon + 1))});
    }
    return out;
}

const std::set<std::string>& model_keys() {
    static const std::set<std::string> keys = [] {
        std::set<std::string> k;
        for (const auto& [name, value] : ModelConfig{}.to_key_values()) k.insert(name);
        return k;
    }();
    return keys;
}

const std::set<std::string>& recipe_keys() {
    static const std::set<std::string> keys = [] {
        std::set<std::string> k;
        for (const auto& [name, value] : RainRecipe{}.to_key_values()) k.insert(name);
        return k;
    }();
    return keys;
}

}  // namespace

// ---------------------------------------------------------------------------
// schedule

double Schedule::lr_at(std::size_t iter) const {
    if (iter <= warm_iters) return lr0;
    if (iter >= total_iters) return lr_min;
    const double progress = static_cast<double>(iter - warm_iters) / static_cast<double>(total_iters - warm_iters);
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

// ---------------------------------------------------------------------------
// RunConfig

const std::vector<std::string>& RunConfig::preset_names() {
    static const std::vector<std::string> names{"desk", "desk-progressive", "paper-full"};
    return names;
}

RunConfig RunConfig::preset(const std::string& name) {
    RunConfig c;
    c.schedule.lr0 = 2e-3;
    c.optimizer.clip_norm = 0.5;
    c.output_init_scale = 0.1;
    if (name == "desk") return c;
    if (name == "desk-progressive") {
        c.patch_stages = {{0, 32}, {200, 48}};
        return c;
    }
    if (name == "paper-full") {
        c.model = ModelConfig::paper();
        c.schedule = Schedule{3e-4, 1e-6, 92000, 300000};
        c.optimizer.clip_norm = 0;
        c.output_init_scale = 1.0;
        c.batch_size = 8;
        c.patch_stages = {{0, 128}};
        c.synthetic_size = 256;
        c.checkpoint_interval = 10000;
        c.log_interval = 100;
        return c;
    }
    throw std::invalid_argument("unknown preset '" + name + "' (known: desk, desk-progressive, paper-full)");
}

std::size_t RunConfig::patch_at(std::size_t iter) const {
    std::size_t p = patch_stages.front().patch;
    for (const auto& s : patch_stages)
        if (iter >= s.start) p = s.patch;
    return p;
}

void RunConfig::validate() const {
    model.validate();
    recipe.validate();
    if (loss.alpha < 0) throw std::invalid_argument("alpha must be non-negative");
    if (schedule.warm_iters >= schedule.total_iters) throw std::invalid_argument("warm_iters must be < total_iters");
    if (!(schedule.lr0 > 0) || schedule.lr_min < 0 || schedule.lr_min > schedule.lr0) {
        throw std::invalid_argument("learning rates must satisfy 0 <= lr_min <= lr0, lr0 > 0");
    }
    if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
    if (optimizer.clip_norm < 0) throw std::invalid_argument("clip_norm must be non-negative (0 disables)");
    if (!(output_init_scale > 0)) throw std::invalid_argument("output_init_scale must be positive");
    if (patch_stages.empty() || patch_stages.front().start != 0) {
        throw std::invalid_argument("patch stages must start at iteration 0");
    }
    for (std::size_t i = 0; i < patch_stages.size(); ++i) {
        const auto& s = patch_stages[i];
        if (i && s.start <= patch_stages[i - 1].start) throw std::invalid_argument("patch stages must be increasing");
        if (s.patch == 0 || s.patch % 8) throw std::invalid_argument("patch size must be a positive multiple of 8");
        if (!model.accepts_extent(s.patch, s.patch)) {
            throw std::invalid_argument("patch size " + std::to_string(s.patch) + " violates the model's divisibility");
        }
    }
    if (data_dir.empty()) {
        if (synthetic_count == 0) throw std::invalid_argument("synthetic_count must be >= 1");
        for (const auto& s : patch_stages) {
            if (s.patch > synthetic_size) throw std::invalid_argument("patch size exceeds synthetic_size");
        }
    }
}

void RunConfig::apply(const KeyValues& kv) {
    KeyValues model_kv, recipe_kv;
    for (const auto& [k, v] : kv) {
        if (model_keys().count(k)) {
            model_kv[k] = v;
        } else if (recipe_keys().count(k)) {
            recipe_kv[k] = v;
        } else if (k == "preset") {
            // handled by load_run_config
        } else if (k == "alpha") {
            loss.alpha = to_double(k, v);
        } else if (k == "coherence_per_channel") {
            loss.coherence_per_channel = to_bool(k, v);
        } else if (k == "lr0") {
            schedule.lr0 = to_double(k, v);
        } else if (k == "lr_min") {
            schedule.lr_min = to_double(k, v);
        } else if (k == "warm_iters") {
            schedule.warm_iters = to_size(k, v);
        } else if (k == "total_iters") {
            schedule.total_iters = to_size(k, v);
        } else if (k == "beta1") {
            optimizer.beta1 = to_double(k, v);
        } else if (k == "beta2") {
            optimizer.beta2 = to_double(k, v);
        } else if (k == "eps") {
            optimizer.eps = to_double(k, v);
        } else if (k == "weight_decay") {
            optimizer.weight_decay = to_double(k, v);
        } else if (k == "clip_norm") {
            optimizer.clip_norm = to_double(k, v);
        } else if (k == "output_init_scale") {
            output_init_scale = to_double(k, v);
        } else if (k == "batch_size") {
            batch_size = to_size(k, v);
        } else if (k == "patch_size") {
            patch_stages = {{0, to_size(k, v)}};
        } else if (k == "patch_stages") {
            patch_stages = parse_stages(k, v);
        } else if (k == "seed") {
            seed = to_size(k, v);
        } else if (k == "data_dir") {
            data_dir = v;
        } else if (k == "synthetic_count") {
            synthetic_count = to_size(k, v);
        } else if (k == "synthetic_size") {
            synthetic_size = to_size(k, v);
        } else if (k == "checkpoint") {
            checkpoint = v;
        } else if (k == "checkpoint_interval") {
            checkpoint_interval = to_size(k, v);
        } else if (k == "log") {
            log = v;
        } else if (k == "log_interval") {
            log_interval = to_size(k, v);
        } else {
            throw std::invalid_argument("unknown config key '" + k + "'");
        }
    }
    model.apply(model_kv);
    if (!recipe_kv.empty()) recipe.apply(recipe_kv);
}

KeyValues RunConfig::to_key_values() const {
    KeyValues kv = model.to_key_values();
    for (const auto& [k, v] : recipe.to_key_values()) kv[k] = v;
    std::string stages;
    for (const auto& s : patch_stages) stages += (stages.empty() ? "" : ",") + std::to_string(s.start) + ":" + std::to_string(s.patch);
    kv.insert({
        {"alpha", num(loss.alpha)},
        {"coherence_per_channel", loss.coherence_per_channel ? "true" : "false"},
        {"lr0", num(schedule.lr0)},
        {"lr_min", num(schedule.lr_min)},
        {"warm_iters", std::to_string(schedule.warm_iters)},
        {"total_iters", std::to_string(schedule.total_iters)},
        {"beta1", num(optimizer.beta1)},
        {"beta2", num(optimizer.beta2)},
        {"eps", num(optimizer.eps)},
        {"weight_decay", num(optimizer.weight_decay)},
        {"clip_norm", num(optimizer.clip_norm)},
        {"output_init_scale", num(output_init_scale)},
        {"batch_size", std::to_string(batch_size)},
        {"patch_stages", stages},
        {"seed", std::to_string(seed)},
        {"data_dir", data_dir.string()},
        {"synthetic_count", std::to_string(synthetic_count)},
        {"synthetic_size", std::to_string(synthetic_size)},
        {"checkpoint", checkpoint.string()},
        {"checkpoint_interval", std::to_string(checkpoint_interval)},
        {"log", log.string()},
        {"log_interval", std::to_string(log_interval)},
    });
    return kv;
}

RunConfig load_run_config(const std::filesystem::path& path, const KeyValues& overrides) {
    KeyValues kv;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open config file: " + path.string());
        std::stringstream ss;
        ss << in.rdbuf();
        try {
            kv = parse_key_values(ss.str());
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(path.string() + ": " + e.what());
        }
    }
    for (const auto& [k, v] : overrides) kv[k] = v;
    const auto it = kv.find("preset");
    RunConfig cfg = RunConfig::preset(it == kv.end() ? "desk" : it->second);
    cfg.apply(kv);
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// AdamW

void AdamW::step(ModelState& state, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    double sq = 0;
    for (const auto& [name, param] : state.params)
        if (param.has_grad())
            for (double g : param.grad()) sq += g * g;
    last_grad_norm_ = std::sqrt(sq);
    const double gscale =
        (opt_.clip_norm > 0 && last_grad_norm_ > opt_.clip_norm) ? opt_.clip_norm / last_grad_norm_ : 1.0;
    for (auto& [name, param] : state.params) {
        auto& mom = moments_[name];
        const std::size_t n = param.numel();
        if (mom.m.empty()) {
            mom.m.assign(n, 0.0);
            mom.v.assign(n, 0.0);
        }
        auto theta = param.mutable_data();
        const bool has = param.has_grad();
        const auto g = has ? param.grad() : std::span<const double>{};
        for (std::size_t i = 0; i < n; ++i) {
            const double gi = has ? g[i] * gscale : 0.0;
            mom.m[i] = opt_.beta1 * mom.m[i] + (1 - opt_.beta1) * gi;
            mom.v[i] = opt_.beta2 * mom.v[i] + (1 - opt_.beta2) * gi * gi;
            const double mhat = mom.m[i] / bc1;
            const double vhat = mom.v[i] / bc2;
            double updated = theta[i] - lr * (mhat / (std::sqrt(vhat) + opt_.eps) + opt_.weight_decay * theta[i]);
            if (opt_.store_binary32) updated = to_f32(updated);
            theta[i] = updated;
        }
    }
}

// ---------------------------------------------------------------------------
// training

std::vector<RainPair> training_pairs(const RunConfig& cfg) {
    if (!cfg.data_dir.empty()) {
        auto pairs = load_paired_folder(cfg.data_dir / "rain", cfg.data_dir / "clean");
        if (pairs.empty()) throw std::runtime_error("no training pairs found under " + cfg.data_dir.string());
        return pairs;
    }
    std::vector<RainPair> pairs;
    for (std::size_t i = 0; i < cfg.synthetic_count; ++i) pairs.push_back(synthetic_pair(cfg.synthetic_size, cfg.recipe, i));
    return pairs;
}

TrainResult train(const RunConfig& cfg, const TrainObserver& observer) {
    cfg.validate();
    if (!grad_enabled()) throw std::logic_error("train: called while gradient recording is disabled (NoGradGuard)");
    const auto pairs = training_pairs(cfg);
    for (const auto& p : pairs) {
        for (const auto& s : cfg.patch_stages) {
            if (s.patch > p.rainy.size(1) || s.patch > p.rainy.size(2)) {
                throw std::runtime_error("training image " + p.id + " is smaller than patch size " + std::to_string(s.patch));
            }
        }
    }
    TrainResult result;
    result.state = init_model_state(cfg.model, cfg.seed);
    if (cfg.output_init_scale != 1.0) {
        for (double& v : result.state.params.at("output").mutable_data()) v = to_f32(v * cfg.output_init_scale);
    }
    const Network net(cfg.model, result.state);
    AdamW opt(cfg.optimizer);
    Rng rng(item_seed(cfg.seed, 0x7261696eull));

    std::ofstream log_file;
    if (!cfg.log.empty()) {
        log_file.open(cfg.log, std::ios::trunc);
        if (!log_file) throw std::runtime_error("cannot open log file: " + cfg.log.string());
        log_file << "iter\tloss\tlr\n";
    }

    for (std::size_t iter = 0; iter < cfg.schedule.total_iters; ++iter) {
        const std::size_t patch = cfg.patch_at(iter);
        std::vector<Tensor> rainy, clean;
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            const auto& src = pairs[rng.below(pairs.size())];
            const auto sample = flip_augment(random_patch(src, patch, rng), rng);
            rainy.push_back(sample.rainy);
            clean.push_back(sample.clean);
        }
        const Tensor x = stack(rainy, 0), y = stack(clean, 0);
        const double lr = cfg.schedule.lr_at(iter);

        result.state.zero_grad();
        const Tensor loss = total_loss(net.forward(x), y, cfg.loss);
        const double value = loss.item();
        if (!std::isfinite(value)) throw std::runtime_error("non-finite loss at iteration " + std::to_string(iter));
        loss.backward();
        opt.step(result.state, lr);

        const LogEntry entry{iter, value, lr};
        result.log.push_back(entry);
        if (observer) observer(entry);
        if (log_file.is_open()) {
            log_file << iter << "\t" << std::setprecision(9) << value << "\t" << lr << "\n";
            if (!log_file) throw std::runtime_error("failed writing log file: " + cfg.log.string());
        }
        if (!cfg.checkpoint.empty() && cfg.checkpoint_interval && (iter + 1) % cfg.checkpoint_interval == 0) {
            save_checkpoint(cfg.checkpoint, cfg.model, result.state);
        }
    }
    result.state.zero_grad();
    if (!cfg.checkpoint.empty()) save_checkpoint(cfg.checkpoint, cfg.model, result.state);
    return result;
}

// ---------------------------------------------------------------------------
// evaluation

EvalReport evaluate(const Network& net, const std::vector<RainPair>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("evaluate: empty dataset");
    EvalReport r;
    for (const auto& p : pairs) {
        const Tensor out = net.derain_image(p.rainy);
        EvalRow row{p.id, psnr(out, p.clean), ssim(out, p.clean), psnr(p.rainy, p.clean), ssim(p.rainy, p.clean)};
        r.mean_psnr += row.psnr;
        r.mean_ssim += row.ssim;
        r.mean_input_psnr += row.input_psnr;
        r.mean_input_ssim += row.input_ssim;
        r.rows.push_back(std::move(row));
    }
    const double n = static_cast<double>(pairs.size());
    r.mean_psnr /= n;
    r.mean_ssim /= n;
    r.mean_input_psnr /= n;
    r.mean_input_ssim /= n;
    return r;
}

std::string format_report_text(const EvalReport& r) {
    std::ostringstream os;
    os << std::fixed;
    os << std::left << std::setw(16) << "image" << std::right << std::setw(10) << "psnr" << std::setw(9) << "ssim"
       << std::setw(12) << "input_psnr" << std::setw(12) << "input_ssim" << "\n";
    for (const auto& row : r.rows) {
        os << std::left << std::setw(16) << row.id << std::right << std::setprecision(3) << std::setw(10) << row.psnr
           << std::setprecision(4) << std::setw(9) << row.ssim << std::setprecision(3) << std::setw(12)
           << row.input_psnr << std::setprecision(4) << std::setw(12) << row.input_ssim << "\n";
    }
    os << std::left << std::setw(16) << "mean" << std::right << std::setprecision(3) << std::setw(10) << r.mean_psnr
       << std::setprecision(4) << std::setw(9) << r.mean_ssim << std::setprecision(3) << std::setw(12)
       << r.mean_input_psnr << std::setprecision(4) << std::setw(12) << r.mean_input_ssim << "\n";
    return os.str();
}

std::string format_report_jsonl(const EvalReport& r) {
    std::string out;
    for (const auto& row : r.rows) {
        nlohmann::json j{{"id", row.id},           {"psnr", row.psnr},
                         {"ssim", row.ssim},       {"input_psnr", row.input_psnr},
                         {"input_ssim", row.input_ssim}};
        out += j.dump() + "\n";
    }
    nlohmann::json summary{{"id", "mean"},
                           {"psnr", r.mean_psnr},
                           {"ssim", r.mean_ssim},
                           {"input_psnr", r.mean_input_psnr},
                           {"input_ssim", r.mean_input_ssim},
                           {"count", r.rows.size()}};
    out += summary.dump() + "\n";
    return out;
}

}  // namespace transmamba
