#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "transmamba/tensor.hpp"

namespace transmamba {

// ---------------------------------------------------------------------------
// Elementwise arithmetic. Binary ops broadcast numpy-style (right-aligned).

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
Tensor neg(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor softplus(const Tensor& x);
/// Not differentiable at the bounds; used for evaluation-time clamping.
Tensor clamp(const Tensor& x, double lo, double hi);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor sum_axis(const Tensor& x, std::size_t axis, bool keepdim = true);
Tensor mean_axis(const Tensor& x, std::size_t axis, bool keepdim = true);
/// Gradient flows to the first maximal element along the axis.
Tensor max_axis(const Tensor& x, std::size_t axis, bool keepdim = true);

// ---------------------------------------------------------------------------
// Shape manipulation. All of these copy.

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& order);
Tensor narrow(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
Tensor select(const Tensor& x, std::size_t axis, std::size_t index);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor stack(const std::vector<Tensor>& parts, std::size_t axis);
Tensor flip(const Tensor& x, std::size_t axis);
/// Reflect-pads the trailing two axes at the bottom/right edge.
Tensor pad_reflect(const Tensor& x, std::size_t pad_bottom, std::size_t pad_right);

// ---------------------------------------------------------------------------
// Neural-network primitives. Feature maps are channels-first, one sample.

struct Conv2dOptions {
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t dilation = 1;
    std::size_t groups = 1;
};

/// Cross-correlation of a [Cin x H x W] input with a [Cout x Cin/groups x k x k]
/// kernel. `bias` may be undefined.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, const Conv2dOptions& opt);

/// Same-padded stride-1 convolution: padding = dilation * (k - 1) / 2.
Tensor conv2d_same(const Tensor& input, const Tensor& kernel, std::size_t dilation = 1, std::size_t groups = 1);

/// Per-channel 1D cross-correlation of [C x L] with [C x 1 x k], zero same-padding.
Tensor conv1d_depthwise(const Tensor& input, const Tensor& kernel);

/// Normalizes over the channel axis at every spatial position of [C x ...].
Tensor layer_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

Tensor softmax(const Tensor& x, std::size_t axis);

/// [... x M x K] * [... x K x N]. Leading dims must agree unless `b` is 2-D.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b = false);

Tensor pixel_unshuffle(const Tensor& x, std::size_t factor);
Tensor pixel_shuffle(const Tensor& x, std::size_t factor);

/// Reorders the last axis: out[..., j] = x[..., index[j]].
Tensor gather_last(const Tensor& x, std::span<const std::size_t> index);
/// Inverse of gather_last for the same permutation: out[..., index[j]] = x[..., j].
Tensor scatter_last(const Tensor& x, std::span<const std::size_t> index);
/// Throws std::invalid_argument unless `index` is a permutation of 0..n-1.
void check_permutation(std::span<const std::size_t> index, std::size_t n);

/// Align-corners bilinear resampling of the trailing two axes of [C x h x w].
Tensor bilinear_resize(const Tensor& x, std::size_t height, std::size_t width);

}  // namespace transmamba
