#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "transmamba/params.hpp"
#include "transmamba/spectral.hpp"
#include "transmamba/tensor.hpp"

namespace transmamba {

/// Attention logits are divided by sqrt(heads) (`heads`, the default) or by
/// sqrt of the per-row token length (`token_dim`).
enum class ScaleMode { heads, token_dim };

/// Spectral enhanced feed-forward parameters.
struct SeffParams {
    std::size_t channels = 0;
    std::size_t hidden = 0;       // floor(r * C)
    Tensor expand_pointwise;      // [2*hidden x C x 1 x 1]
    Tensor dw_plain;              // [hidden x 1 x 3 x 3]
    Tensor dw_dilated;            // [hidden x 1 x 3 x 3], dilation 2
    Tensor w1_re, w1_im;          // [hidden x S x S] complex spectral weight
    Tensor w2_re, w2_im;
    Tensor b1, b2;                // [hidden]
    Tensor out_pointwise;         // [C x hidden x 1 x 1]
};

/// Spectral-domain Transformer block parameters.
struct SdtbParams {
    std::size_t channels = 0;
    std::size_t heads = 1;
    std::size_t bands = 1;
    Tensor qkv_pointwise;       // [3C x C x 1 x 1]
    Tensor qkv_depthwise;       // [3C x 1 x 3 x 3]; Q, K and V kernels stacked
    Tensor attn_out_pointwise;  // [C x C x 1 x 1]
    Tensor ln1_gamma, ln1_beta;
    Tensor ln2_gamma, ln2_beta;
    SeffParams seff;
};

std::size_t seff_hidden_channels(std::size_t channels, double ratio);

SeffParams make_seff_params(ParamSource& src, const std::string& prefix, std::size_t channels, double ratio,
                            std::size_t weight_size);
SdtbParams make_sdtb_params(ParamSource& src, const std::string& prefix, std::size_t channels, std::size_t heads,
                            std::size_t bands, double ratio, std::size_t weight_size);

/// Receives the row-stochastic attention maps ([heads x rows x rows]) of every
/// SBSA evaluation, for inspection.
struct AttentionProbe {
    std::vector<Tensor> maps;
};

/// Spectral banding self-attention. Output shape equals input shape.
Tensor sbsa_forward(const Tensor& features, const SdtbParams& p, const MeshIndex& mesh,
                    ScaleMode scale = ScaleMode::heads, AttentionProbe* probe = nullptr);

/// Spectral enhanced feed-forward. Output shape equals input shape.
Tensor seff_forward(const Tensor& features, const SeffParams& p);

/// F += SBSA(LN1(F)); F += SEFF(LN2(F)).
Tensor sdtb_forward(const Tensor& features, const SdtbParams& p, const MeshIndex& mesh,
                    ScaleMode scale = ScaleMode::heads, AttentionProbe* probe = nullptr);

}  // namespace transmamba
