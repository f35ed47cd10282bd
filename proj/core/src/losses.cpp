#include "transmamba/losses.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "transmamba/ops.hpp"
#include "transmamba/spectral.hpp"

namespace transmamba {

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    }
}

void warn_zero_signal() {
    std::cerr << "warning: coherence of an all-zero signal is defined as 0\n";
}

// Cross and auto spectral sums, either pooled ([1]) or per channel ([C]).
struct SpectralSums {
    Tensor cross, auto_pred, auto_target;
};

SpectralSums spectral_sums(const Tensor& pred, const Tensor& target, bool per_channel) {
    const Tensor mx = complex_abs(fft2(pred));
    const Tensor my = complex_abs(fft2(target));
    const std::size_t c = pred.size(0);
    auto total = [&](const Tensor& t) {
        return per_channel ? sum_axis(reshape(t, {c, t.numel() / c}), 1) : reshape(sum(t), {1});
    };
    return {total(mul(mx, my)), total(square(mx)), total(square(my))};
}

bool any_zero(const Tensor& t) {
    return std::any_of(t.data().begin(), t.data().end(), [](double v) { return v == 0.0; });
}

Tensor coherence_single(const Tensor& pred, const Tensor& target, bool per_channel) {
    const auto s = spectral_sums(pred, target, per_channel);
    if (any_zero(s.auto_pred) || any_zero(s.auto_target)) warn_zero_signal();
    const Tensor g = div(square(s.cross), add_scalar(mul(s.auto_pred, s.auto_target), kCoherenceEpsilon));
    return mean(g);
}

Tensor coherence_loss_single(const Tensor& pred, const Tensor& target, bool per_channel) {
    if (!per_channel) {
        // sqrt(G) in closed form, which stays differentiable where G = 0
        const auto s = spectral_sums(pred, target, false);
        if (any_zero(s.auto_pred) || any_zero(s.auto_target)) warn_zero_signal();
        const Tensor root = div(s.cross, sqrt(add_scalar(mul(s.auto_pred, s.auto_target), kCoherenceEpsilon)));
        return reshape(add_scalar(neg(root), 1.0), {});
    }
    return add_scalar(neg(sqrt(coherence_single(pred, target, true))), 1.0);
}

}  // namespace

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape("l1_loss", pred, target);
    return mean(abs(sub(pred, target)));
}

Tensor coherence(const Tensor& pred, const Tensor& target, bool per_channel) {
    require_same_shape("coherence", pred, target);
    if (pred.dim() != 3) throw std::invalid_argument("coherence: expected [C x H x W], got " + shape_str(pred.shape()));
    return coherence_single(pred, target, per_channel);
}

Tensor coherence_loss(const Tensor& pred, const Tensor& target, bool per_channel) {
    require_same_shape("coherence_loss", pred, target);
    if (pred.dim() == 3) return coherence_loss_single(pred, target, per_channel);
    if (pred.dim() != 4) {
        throw std::invalid_argument("coherence_loss: expected [C x H x W] or [B x C x H x W], got " +
                                    shape_str(pred.shape()));
    }
    const std::size_t batch = pred.size(0);
    Tensor acc;
    for (std::size_t b = 0; b < batch; ++b) {
        Tensor l = coherence_loss_single(select(pred, 0, b), select(target, 0, b), per_channel);
        acc = acc.defined() ? add(acc, l) : l;
    }
    return scale(acc, 1.0 / static_cast<double>(batch));
}

Tensor total_loss(const Tensor& pred, const Tensor& target, const LossWeights& w) {
    if (w.alpha < 0) throw std::invalid_argument("total_loss: alpha must be non-negative");
    const Tensor rec = l1_loss(pred, target);
    if (w.alpha == 0) return rec;
    return add(rec, scale(coherence_loss(pred, target, w.coherence_per_channel), w.alpha));
}

double psnr(const Tensor& pred, const Tensor& target, double peak) {
    require_same_shape("psnr", pred, target);
    const auto a = pred.data(), b = target.data();
    double se = 0;
    for (std::size_t i = 0; i < a.size(); ++i) se += (a[i] - b[i]) * (a[i] - b[i]);
    const double mse = se / static_cast<double>(a.size());
    if (mse < 1e-10) return 100.0;
    return std::min(100.0, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const Tensor& pred, const Tensor& target, double peak) {
    require_same_shape("ssim", pred, target);
    if (pred.dim() != 3) throw std::invalid_argument("ssim: expected [C x H x W], got " + shape_str(pred.shape()));
    const std::size_t c = pred.size(0), h = pred.size(1), w = pred.size(2);
    const std::size_t win = std::min<std::size_t>({11, h, w});
    std::vector<double> g(win);
    double gsum = 0;
    for (std::size_t i = 0; i < win; ++i) {
        const double d = static_cast<double>(i) - static_cast<double>(win - 1) / 2.0;
        g[i] = std::exp(-d * d / (2 * 1.5 * 1.5));
        gsum += g[i];
    }
    for (auto& v : g) v /= gsum;
    const double c1 = (0.01 * peak) * (0.01 * peak), c2 = (0.03 * peak) * (0.03 * peak);
    const auto xa = pred.data(), ya = target.data();
    const std::size_t oh = h - win + 1, ow = w - win + 1;
    double total = 0;
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double* x = xa.data() + ch * h * w;
        const double* y = ya.data() + ch * h * w;
        double acc = 0;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
                for (std::size_t i = 0; i < win; ++i) {
                    for (std::size_t j = 0; j < win; ++j) {
                        const double wt = g[i] * g[j];
                        const double xv = x[(oy + i) * w + ox + j], yv = y[(oy + i) * w + ox + j];
                        mx += wt * xv;
                        my += wt * yv;
                        sxx += wt * xv * xv;
                        syy += wt * yv * yv;
                        sxy += wt * xv * yv;
                    }
                }
                const double vx = sxx - mx * mx, vy = syy - my * my, cov = sxy - mx * my;
                acc += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            }
        }
        total += acc / static_cast<double>(oh * ow);
    }
    return total / static_cast<double>(c);
}

}  // namespace transmamba
