#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "transmamba/params.hpp"
#include "transmamba/tensor.hpp"

namespace transmamba {

/// Diagonal selective state-space parameters for C channels and N states.
struct SsmParams {
    std::size_t channels = 0;
    std::size_t state_dim = 0;
    Tensor a_log;       // [C x N], A = -exp(a_log)
    Tensor proj_delta;  // [1 x C]
    Tensor proj_b;      // [N x C]
    Tensor proj_c;      // [N x C]
    Tensor delta_bias;  // [C]
    Tensor d_skip;      // [C]
};

/// One direction of a CBSM.
struct DirectionalParams {
    std::size_t channels = 0;
    Tensor split_pointwise;  // [2C x C x 1 x 1]
    Tensor dw5x5_a;          // [C x 1 x 5 x 5]
    Tensor dw5x5_b;          // [C x 1 x 5 x 5]
    Tensor conv1d;           // [C x 1 x 3]
    Tensor sa_kernel;        // [1 x 2 x 7 x 7]
    Tensor ca_reduce;        // [C/4 x C]
    Tensor ca_expand;        // [C x C/4]
    SsmParams ssm;
};

struct CbsmParams {
    DirectionalParams forward;
    DirectionalParams backward;
};

/// Axis reversed between the two halves of a CBSM. `sequence` reverses the
/// flattened scan order (both spatial axes) and restores it afterwards.
enum class FlipAxis { channel, sequence };

/// Which halves of a CBSM run reversed ("backward") input.
enum class DirectionOrder { forward_backward, backward_forward, forward_forward, backward_backward };

inline constexpr std::size_t kChannelAttentionReduction = 4;

SsmParams make_ssm_params(ParamSource& src, const std::string& prefix, std::size_t channels, std::size_t state_dim);
DirectionalParams make_directional_params(ParamSource& src, const std::string& prefix, std::size_t channels,
                                          std::size_t state_dim);
CbsmParams make_cbsm_params(ParamSource& src, const std::string& prefix, std::size_t channels, std::size_t state_dim);

/// Core recurrence on explicit per-token quantities:
///   h_t = exp(delta[c,t] * a[c,n]) h_{t-1} + delta[c,t] * b[n,t] * x[c,t]
///   y[c,t] = sum_n cm[n,t] h_t[c,n]
/// x, delta: [C x L]; a: [C x N]; b, cm: [N x L]. Differentiable in all inputs.
Tensor selective_scan(const Tensor& x, const Tensor& delta, const Tensor& a, const Tensor& b, const Tensor& cm);

/// Full selective SSM over [C x L]: input-dependent delta/B/C projections,
/// softplus step, scan, plus the D skip term.
Tensor ssm_scan(const Tensor& x, const SsmParams& p);

/// CBAM spatial gate: x * sigmoid(conv7x7([mean_c(x), max_c(x)])).
Tensor spatial_attention(const Tensor& x, const Tensor& sa_kernel);

/// CBAM channel-attention logits [C x 1 x 1]: MLP(avgpool) + MLP(maxpool).
Tensor channel_attention(const Tensor& x, const Tensor& ca_reduce, const Tensor& ca_expand);

/// One direction: split, SA-gated scan path times CA gate of the other path.
Tensor cbsm_direction(const Tensor& x, const DirectionalParams& p);

Tensor cbsm_forward(const Tensor& features, const CbsmParams& p, FlipAxis flip_axis = FlipAxis::channel,
                    DirectionOrder order = DirectionOrder::forward_backward);

/// Sequential CBSMs, each wrapped in a residual connection.
Tensor mamba_layer(const Tensor& features, const std::vector<CbsmParams>& blocks, FlipAxis flip_axis = FlipAxis::channel,
                   DirectionOrder order = DirectionOrder::forward_backward);

/// Reversal used between directions.
Tensor apply_flip(const Tensor& x, FlipAxis axis);

}  // namespace transmamba
