#include "transmamba/mamba.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "transmamba/ops.hpp"

namespace transmamba {

using detail::input_grad;
using detail::make_result;
using detail::Node;

namespace {

std::size_t ca_hidden(std::size_t channels) { return std::max<std::size_t>(1, channels / kChannelAttentionReduction); }

}  // namespace

SsmParams make_ssm_params(ParamSource& src, const std::string& prefix, std::size_t channels, std::size_t state_dim) {
    if (state_dim == 0) throw std::invalid_argument(prefix + ": SSM state dimension must be positive");
    SsmParams p;
    p.channels = channels;
    p.state_dim = state_dim;
    p.a_log = src.get(prefix + ".a_log", {channels, state_dim}, Init::ssm_a_log);
    p.proj_delta = src.get(prefix + ".proj_delta", {1, channels}, Init::kaiming_uniform);
    p.proj_b = src.get(prefix + ".proj_b", {state_dim, channels}, Init::kaiming_uniform);
    p.proj_c = src.get(prefix + ".proj_c", {state_dim, channels}, Init::kaiming_uniform);
    p.delta_bias = src.get(prefix + ".delta_bias", {channels}, Init::ssm_delta_bias);
    p.d_skip = src.get(prefix + ".d_skip", {channels}, Init::ones);
    return p;
}

DirectionalParams make_directional_params(ParamSource& src, const std::string& prefix, std::size_t channels,
                                          std::size_t state_dim) {
    DirectionalParams p;
    p.channels = channels;
    const std::size_t hidden = ca_hidden(channels);
    p.split_pointwise = src.get(prefix + ".split", {2 * channels, channels, 1, 1}, Init::kaiming_uniform);
    p.dw5x5_a = src.get(prefix + ".dw5_a", {channels, 1, 5, 5}, Init::kaiming_uniform);
    p.dw5x5_b = src.get(prefix + ".dw5_b", {channels, 1, 5, 5}, Init::kaiming_uniform);
    p.conv1d = src.get(prefix + ".conv1d", {channels, 1, 3}, Init::kaiming_uniform);
    p.sa_kernel = src.get(prefix + ".sa", {1, 2, 7, 7}, Init::kaiming_uniform);
    p.ca_reduce = src.get(prefix + ".ca_reduce", {hidden, channels}, Init::kaiming_uniform);
    p.ca_expand = src.get(prefix + ".ca_expand", {channels, hidden}, Init::kaiming_uniform);
    p.ssm = make_ssm_params(src, prefix + ".ssm", channels, state_dim);
    return p;
}

CbsmParams make_cbsm_params(ParamSource& src, const std::string& prefix, std::size_t channels, std::size_t state_dim) {
    CbsmParams p;
    p.forward = make_directional_params(src, prefix + ".fwd", channels, state_dim);
    p.backward = make_directional_params(src, prefix + ".bwd", channels, state_dim);
    return p;
}

Tensor selective_scan(const Tensor& x, const Tensor& delta, const Tensor& a, const Tensor& b, const Tensor& cm) {
    if (x.dim() != 2) throw std::invalid_argument("selective_scan: x must be [C x L], got " + shape_str(x.shape()));
    const std::size_t c = x.size(0), len = x.size(1);
    if (len == 0) throw std::invalid_argument("selective_scan: empty sequence");
    if (delta.shape() != x.shape()) throw std::invalid_argument("selective_scan: delta must match x " + shape_str(x.shape()));
    if (a.dim() != 2 || a.size(0) != c) throw std::invalid_argument("selective_scan: a must be [C x N], got " + shape_str(a.shape()));
    const std::size_t n = a.size(1);
    if (b.shape() != Shape{n, len} || cm.shape() != Shape{n, len}) {
        throw std::invalid_argument("selective_scan: b and c must be [" + std::to_string(n) + " x " + std::to_string(len) + "]");
    }
    const auto xv = x.data(), dv = delta.data(), av = a.data(), bv = b.data(), cv = cm.data();
    std::vector<double> y(c * len, 0.0);
    std::vector<double> states(c * n * len);  // h after each step, kept for the reverse sweep
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t s = 0; s < n; ++s) {
            const double a_cs = av[ch * n + s];
            double h = 0.0;
            double* hs = states.data() + (ch * n + s) * len;
            for (std::size_t t = 0; t < len; ++t) {
                const double d = dv[ch * len + t];
                h = std::exp(d * a_cs) * h + d * bv[s * len + t] * xv[ch * len + t];
                hs[t] = h;
                y[ch * len + t] += cv[s * len + t] * h;
            }
        }
    }
    auto backward = [c, n, len, states = std::move(states)](Node& self) {
        const auto& xv = self.inputs[0]->data;
        const auto& dv = self.inputs[1]->data;
        const auto& av = self.inputs[2]->data;
        const auto& bv = self.inputs[3]->data;
        const auto& cv = self.inputs[4]->data;
        auto* gx = input_grad(self, 0);
        auto* gd = input_grad(self, 1);
        auto* ga = input_grad(self, 2);
        auto* gb = input_grad(self, 3);
        auto* gc = input_grad(self, 4);
        const auto& gy = self.grad;
        for (std::size_t ch = 0; ch < c; ++ch) {
            for (std::size_t s = 0; s < n; ++s) {
                const double a_cs = av[ch * n + s];
                const double* hs = states.data() + (ch * n + s) * len;
                double dh = 0.0;
                double da = 0.0;
                for (std::size_t t = len; t-- > 0;) {
                    const double g = gy[ch * len + t];
                    if (gc) (*gc)[s * len + t] += g * hs[t];
                    dh += g * cv[s * len + t];
                    const double d = dv[ch * len + t];
                    const double decay = std::exp(d * a_cs);
                    const double h_prev = t > 0 ? hs[t - 1] : 0.0;
                    const double xb = xv[ch * len + t] * bv[s * len + t];
                    const double g_decay = dh * h_prev * decay;
                    if (gd) (*gd)[ch * len + t] += g_decay * a_cs + dh * xb;
                    da += g_decay * d;
                    if (gb) (*gb)[s * len + t] += dh * d * xv[ch * len + t];
                    if (gx) (*gx)[ch * len + t] += dh * d * bv[s * len + t];
                    dh *= decay;
                }
                if (ga) (*ga)[ch * n + s] += da;
            }
        }
    };
    return make_result(x.shape(), std::move(y), {x, delta, a, b, cm}, backward, "selective_scan");
}

Tensor ssm_scan(const Tensor& x, const SsmParams& p) {
    if (x.dim() != 2 || x.size(0) != p.channels) {
        throw std::invalid_argument("ssm_scan: expected [" + std::to_string(p.channels) + " x L], got " + shape_str(x.shape()));
    }
    const std::size_t c = p.channels;
    const Tensor delta = softplus(add(matmul(p.proj_delta, x), reshape(p.delta_bias, {c, 1})));
    const Tensor b = matmul(p.proj_b, x);
    const Tensor cm = matmul(p.proj_c, x);
    const Tensor a = neg(exp(p.a_log));
    return add(selective_scan(x, delta, a, b, cm), mul(reshape(p.d_skip, {c, 1}), x));
}

Tensor spatial_attention(const Tensor& x, const Tensor& sa_kernel) {
    const Tensor pooled = concat({mean_axis(x, 0), max_axis(x, 0)}, 0);  // [2 x H x W]
    return mul(x, sigmoid(conv2d_same(pooled, sa_kernel)));
}

Tensor channel_attention(const Tensor& x, const Tensor& ca_reduce, const Tensor& ca_expand) {
    const std::size_t c = x.size(0);
    const Tensor flat = reshape(x, {c, x.numel() / c});
    auto mlp = [&](const Tensor& v) { return matmul(ca_expand, relu(matmul(ca_reduce, v))); };
    return reshape(add(mlp(mean_axis(flat, 1)), mlp(max_axis(flat, 1))), {c, 1, 1});
}

Tensor cbsm_direction(const Tensor& x, const DirectionalParams& p) {
    if (x.dim() != 3 || x.size(0) != p.channels) {
        throw std::invalid_argument("cbsm: expected [" + std::to_string(p.channels) + " x H x W], got " + shape_str(x.shape()));
    }
    const std::size_t c = p.channels, h = x.size(1), w = x.size(2);
    const Tensor split = conv2d_same(x, p.split_pointwise);
    const Tensor f1 = narrow(split, 0, 0, c);
    const Tensor f2 = narrow(split, 0, c, c);

    const Tensor local = spatial_attention(conv2d_same(f1, p.dw5x5_a, 1, c), p.sa_kernel);
    const Tensor seq = sigmoid(conv1d_depthwise(reshape(local, {c, h * w}), p.conv1d));
    const Tensor scanned = reshape(ssm_scan(seq, p.ssm), {c, h, w});

    const Tensor gate = sigmoid(channel_attention(conv2d_same(f2, p.dw5x5_b, 1, c), p.ca_reduce, p.ca_expand));
    return mul(scanned, gate);
}

Tensor apply_flip(const Tensor& x, FlipAxis axis) {
    if (axis == FlipAxis::channel) return flip(x, 0);
    return flip(flip(x, 1), 2);
}

Tensor cbsm_forward(const Tensor& features, const CbsmParams& p, FlipAxis flip_axis, DirectionOrder order) {
    const bool first_reversed = order == DirectionOrder::backward_forward || order == DirectionOrder::backward_backward;
    const bool second_reversed = order == DirectionOrder::forward_backward || order == DirectionOrder::backward_backward;
    auto half = [flip_axis](const Tensor& x, const DirectionalParams& dp, bool reversed) {
        if (!reversed) return cbsm_direction(x, dp);
        Tensor y = cbsm_direction(apply_flip(x, flip_axis), dp);
        // a reversed scan order is undone so the output stays spatially aligned
        return flip_axis == FlipAxis::sequence ? apply_flip(y, flip_axis) : y;
    };
    const Tensor f3 = half(features, p.forward, first_reversed);
    return half(f3, p.backward, second_reversed);
}

Tensor mamba_layer(const Tensor& features, const std::vector<CbsmParams>& blocks, FlipAxis flip_axis,
                   DirectionOrder order) {
    if (blocks.empty()) throw std::invalid_argument("mamba_layer: needs at least one CBSM");
    Tensor x = features;
    for (const auto& block : blocks) x = add(x, cbsm_forward(x, block, flip_axis, order));
    return x;
}

}  // namespace transmamba
