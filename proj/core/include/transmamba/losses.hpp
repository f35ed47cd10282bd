#pragma once

#include "transmamba/tensor.hpp"

namespace transmamba {

struct LossWeights {
    double alpha = 5.0;
    /// Average per-channel coherences instead of pooling all channels into one ratio.
    bool coherence_per_channel = false;
};

inline constexpr double kCoherenceEpsilon = 1e-12;

/// Mean absolute error.
Tensor l1_loss(const Tensor& pred, const Tensor& target);

/// Spectral coherence of two [C x H x W] images:
///   G = (sum |X||Y|)^2 / (sum |X|^2 * sum |Y|^2 + eps),  X = fft2(pred), Y = fft2(target).
/// An all-zero input gives G = 0 and a warning on stderr.
Tensor coherence(const Tensor& pred, const Tensor& target, bool per_channel = false);

/// 1 - sqrt(G). Batched [B x C x H x W] inputs average over the batch.
Tensor coherence_loss(const Tensor& pred, const Tensor& target, bool per_channel = false);

/// l1 + alpha * coherence_loss.
Tensor total_loss(const Tensor& pred, const Tensor& target, const LossWeights& w = {});

/// 10 log10(peak^2 / MSE), capped at 100 dB once MSE < 1e-10.
double psnr(const Tensor& pred, const Tensor& target, double peak = 1.0);

/// Mean local SSIM over a Gaussian window (11 x 11, sigma 1.5, K1 = 0.01,
/// K2 = 0.03), per channel then averaged. Windows are clipped to the image.
double ssim(const Tensor& pred, const Tensor& target, double peak = 1.0);

}  // namespace transmamba
