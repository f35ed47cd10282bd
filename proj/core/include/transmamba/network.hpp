#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "transmamba/attention.hpp"
#include "transmamba/mamba.hpp"
#include "transmamba/params.hpp"
#include "transmamba/spectral.hpp"

namespace transmamba {

/// Flat key/value text: one `key = value` per line, `#` starts a comment.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(const std::string& text);
std::string format_key_values(const KeyValues& kv);

struct ModelConfig {
    std::size_t base_channels = 8;
    std::vector<std::size_t> sdtb_counts{1, 3, 4, 4};
    std::vector<std::size_t> cbsm_counts{1, 3, 4, 4};
    std::vector<std::size_t> heads{1, 2, 4, 8};
    std::size_t bands = 2;
    double seff_ratio = 2.667;
    std::size_t seff_weight_size = 48;
    std::size_t ssm_state_dim = 8;
    FlipAxis flip_axis = FlipAxis::channel;
    ScaleMode scale_mode = ScaleMode::heads;
    DirectionOrder direction_order = DirectionOrder::forward_backward;

    std::size_t levels() const { return sdtb_counts.size(); }
    std::size_t channels_at(std::size_t level) const { return base_channels << level; }
    /// Spatial extents must be multiples of this.
    std::size_t spatial_divisor() const { return std::size_t{1} << (levels() - 1); }

    /// Throws std::invalid_argument describing the first violated constraint.
    void validate() const;
    /// True when an H x W input satisfies the per-level divisibility rules.
    bool accepts_extent(std::size_t height, std::size_t width) const;

    /// Desk-scale default.
    static ModelConfig desk();
    /// Full-size configuration with the published constants.
    static ModelConfig paper();

    /// Applies recognised keys; unknown keys are left for the caller.
    void apply(const KeyValues& kv);
    KeyValues to_key_values() const;
};

std::string to_string(FlipAxis v);
std::string to_string(ScaleMode v);
std::string to_string(DirectionOrder v);
FlipAxis parse_flip_axis(const std::string& s);
ScaleMode parse_scale_mode(const std::string& s);
DirectionOrder parse_direction_order(const std::string& s);

/// Per-level parameters of one dual-branch stage.
struct StageParams {
    std::vector<SdtbParams> sdtbs;
    std::vector<CbsmParams> cbsms;
    Tensor fuse;  // [C x 2C x 1 x 1]
};

struct NetworkParams {
    Tensor embed;                        // [C_f x 3 x 3 x 3]
    std::vector<StageParams> encoder;    // one per level; the last is the bottleneck
    std::vector<Tensor> down;            // level i -> i+1: [2C_i x 4C_i x 1 x 1]
    std::vector<Tensor> up;              // level i+1 -> i: [4C_i x 2C_i x 1 x 1]
    std::vector<Tensor> skip_fuse;       // [C_i x 2C_i x 1 x 1]
    std::vector<StageParams> decoder;    // levels 0..L-2
    Tensor output;                       // [3 x C_f x 3 x 3]
};

NetworkParams build_network_params(ParamSource& src, const ModelConfig& cfg);

/// Fresh parameters for `cfg` drawn deterministically from `seed`.
ModelState init_model_state(const ModelConfig& cfg, std::uint64_t seed);
/// (name, shape) of every parameter, in construction order; allocates nothing.
std::vector<LayoutRecorder::Entry> parameter_layout(const ModelConfig& cfg);
std::size_t parameter_count(const ModelState& state);
std::size_t parameter_count(const ModelConfig& cfg);

struct LevelDescription {
    std::size_t level = 0;        // 1-based
    std::size_t scale = 1;        // spatial extent is H / scale
    std::size_t channels = 0;
    std::size_t sdtbs = 0;
    std::size_t cbsms = 0;
    std::size_t heads = 0;
    std::size_t attention_rows = 0;  // 2*C*b
    std::size_t seff_hidden = 0;
    std::size_t parameters = 0;      // encoder + decoder stages at this level
};

struct ModelDescription {
    std::vector<LevelDescription> levels;
    std::size_t total_parameters = 0;
};

ModelDescription describe(const ModelConfig& cfg);
std::string format_description(const ModelConfig& cfg, const ModelDescription& d);

/// Smallest (H', W') >= (H, W), by area, that the configuration accepts.
std::pair<std::size_t, std::size_t> padded_extent(std::size_t height, std::size_t width, const ModelConfig& cfg);

/// The assembled dual-branch encoder-decoder bound to a parameter state.
class Network {
public:
    Network(ModelConfig cfg, const ModelState& state);

    const ModelConfig& config() const { return cfg_; }
    const NetworkParams& params() const { return params_; }

    /// [3 x H x W] or [B x 3 x H x W] -> same shape; rainy + predicted residual.
    Tensor forward(const Tensor& rainy, AttentionProbe* probe = nullptr) const;

    /// The predicted rain layer for one [3 x H x W] image; forward adds it to the input.
    Tensor residual(const Tensor& rainy, AttentionProbe* probe = nullptr) const;

    /// Any image >= 16 x 16: reflect-pad, forward, crop, clamp to [0, 1].
    Tensor derain_image(const Tensor& rainy) const;

    std::shared_ptr<const MeshIndex> mesh(std::size_t height, std::size_t width) const;

private:
    Tensor forward_single(const Tensor& rainy, AttentionProbe* probe) const;
    Tensor run_stage(const Tensor& x, const StageParams& stage, AttentionProbe* probe) const;

    ModelConfig cfg_;
    NetworkParams params_;
    mutable MeshIndexCache meshes_;
};

// ---------------------------------------------------------------------------
// Checkpoints: "TMBA", u32 version, u32 config length, config text,
// u32 record count, then per record u32 name length, name, u32 rank,
// u64 extents, little-endian binary32 values.

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const ModelState& state);
std::pair<ModelConfig, ModelState> load_checkpoint(const std::filesystem::path& path);

/// FNV-1a over the binary32 image of every parameter, in name order.
std::uint64_t state_checksum(const ModelState& state);

}  // namespace transmamba
