#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "transmamba/losses.hpp"
#include "transmamba/network.hpp"
#include "transmamba/rain.hpp"

namespace transmamba {

struct AdamWOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
    /// Global gradient-norm ceiling; the whole gradient is rescaled when its
    /// L2 norm exceeds this. 0 disables clipping.
    double clip_norm = 0;
    /// Round parameters to binary32 after each step so checkpoints are exact.
    bool store_binary32 = true;
};

struct Schedule {
    double lr0 = 3e-4;
    double lr_min = 1e-6;
    std::size_t warm_iters = 120;
    std::size_t total_iters = 400;

    /// Constant lr0 up to warm_iters, then cosine down to lr_min at total_iters.
    double lr_at(std::size_t iter) const;
};

/// Patch size used from iteration `start` on.
struct PatchStage {
    std::size_t start = 0;
    std::size_t patch = 32;
};

struct RunConfig {
    ModelConfig model = ModelConfig::desk();
    LossWeights loss;
    AdamWOptions optimizer;
    Schedule schedule;
    std::size_t batch_size = 2;
    /// Multiplies the freshly initialised output convolution before step 0.
    double output_init_scale = 1.0;
    std::vector<PatchStage> patch_stages{{0, 32}};
    std::uint64_t seed = 0;

    /// Training data: `data_dir/{rain,clean}` when set, otherwise synthetic pairs.
    std::filesystem::path data_dir;
    std::size_t synthetic_count = 16;
    std::size_t synthetic_size = 64;
    RainRecipe recipe;

    std::filesystem::path checkpoint;
    std::size_t checkpoint_interval = 0;  // 0: only at the end
    std::filesystem::path log;
    std::size_t log_interval = 20;

    static RunConfig preset(const std::string& name);
    static const std::vector<std::string>& preset_names();

    std::size_t patch_at(std::size_t iter) const;
    void validate() const;
    /// Applies keys (a leading `preset` key is expected to be handled by the caller);
    /// throws on unknown keys.
    void apply(const KeyValues& kv);
    KeyValues to_key_values() const;
};

/// Loads a run config file: optional `preset = NAME` first, then the other keys.
RunConfig load_run_config(const std::filesystem::path& path, const KeyValues& overrides = {});

/// Decoupled-weight-decay Adam over a ModelState.
class AdamW {
public:
    explicit AdamW(AdamWOptions opt = {}) : opt_(opt) {}
    /// One update using each parameter's current gradient (missing gradient = 0).
    void step(ModelState& state, double lr);
    std::size_t steps() const { return t_; }
    /// Unclipped global gradient norm seen by the latest step.
    double last_grad_norm() const { return last_grad_norm_; }

private:
    struct Moments {
        std::vector<double> m, v;
    };
    AdamWOptions opt_;
    std::size_t t_ = 0;
    double last_grad_norm_ = 0;
    std::map<std::string, Moments> moments_;
};

struct LogEntry {
    std::size_t iter = 0;
    double loss = 0;
    double lr = 0;
};

struct TrainResult {
    ModelState state;
    std::vector<LogEntry> log;
};

using TrainObserver = std::function<void(const LogEntry&)>;

/// Deterministic given `cfg` (single-threaded).
TrainResult train(const RunConfig& cfg, const TrainObserver& observer = {});

/// Training pairs described by `cfg` (loaded or synthesized).
std::vector<RainPair> training_pairs(const RunConfig& cfg);

struct EvalRow {
    std::string id;
    double psnr = 0;
    double ssim = 0;
    double input_psnr = 0;
    double input_ssim = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    double mean_psnr = 0;
    double mean_ssim = 0;
    double mean_input_psnr = 0;
    double mean_input_ssim = 0;
};

EvalReport evaluate(const Network& net, const std::vector<RainPair>& pairs);
std::string format_report_text(const EvalReport& r);
std::string format_report_jsonl(const EvalReport& r);

}  // namespace transmamba
