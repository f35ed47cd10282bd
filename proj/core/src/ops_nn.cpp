#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "detail/gemm.hpp"
#include "detail/remap.hpp"
#include "transmamba/ops.hpp"

namespace transmamba {

using detail::input_grad;
using detail::make_result;
using detail::Node;

namespace {

[[noreturn]] void shape_error(const std::string& op, const std::string& what) {
    throw std::invalid_argument(op + ": " + what);
}

struct ConvGeom {
    std::size_t cin, h, w, cout, cin_g, cout_g, k, oh, ow, stride, pad, dil, groups;

    // Valid output range [lo, hi) along one axis for kernel tap `tap`.
    void valid_range(std::size_t tap, std::size_t in_extent, std::size_t out_extent, std::size_t& lo,
                     std::size_t& hi) const {
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(tap * dil) - static_cast<std::ptrdiff_t>(pad);
        // need 0 <= o*stride + shift < in_extent
        std::ptrdiff_t first = shift >= 0 ? 0 : (-shift + static_cast<std::ptrdiff_t>(stride) - 1) / static_cast<std::ptrdiff_t>(stride);
        std::ptrdiff_t last_excl = static_cast<std::ptrdiff_t>(in_extent) - shift;  // o*stride < last_excl
        std::ptrdiff_t end = last_excl <= 0 ? 0 : (last_excl + static_cast<std::ptrdiff_t>(stride) - 1) / static_cast<std::ptrdiff_t>(stride);
        end = std::min<std::ptrdiff_t>(end, static_cast<std::ptrdiff_t>(out_extent));
        first = std::min<std::ptrdiff_t>(first, end);
        lo = static_cast<std::size_t>(first);
        hi = static_cast<std::size_t>(end);
    }
};

ConvGeom conv_geometry(const Tensor& input, const Tensor& kernel, const Tensor& bias, const Conv2dOptions& opt) {
    const Shape& is = input.shape();
    const Shape& ks = kernel.shape();
    if (is.size() != 3) shape_error("conv2d", "input must be [C x H x W], got " + shape_str(is));
    if (ks.size() != 4) shape_error("conv2d", "kernel must be [Cout x Cin/groups x k x k], got " + shape_str(ks));
    if (ks[2] != ks[3]) shape_error("conv2d", "kernel must be square, got " + shape_str(ks));
    if (opt.groups == 0 || opt.stride == 0 || opt.dilation == 0) shape_error("conv2d", "groups/stride/dilation must be >= 1");
    ConvGeom g{};
    g.cin = is[0];
    g.h = is[1];
    g.w = is[2];
    g.cout = ks[0];
    g.k = ks[2];
    g.groups = opt.groups;
    g.stride = opt.stride;
    g.pad = opt.padding;
    g.dil = opt.dilation;
    if (g.cin % g.groups != 0) shape_error("conv2d", "groups " + std::to_string(g.groups) + " does not divide input channels " + std::to_string(g.cin));
    if (g.cout % g.groups != 0) shape_error("conv2d", "groups " + std::to_string(g.groups) + " does not divide output channels " + std::to_string(g.cout));
    g.cin_g = g.cin / g.groups;
    g.cout_g = g.cout / g.groups;
    if (ks[1] != g.cin_g) {
        shape_error("conv2d", "kernel input-channel dimension " + std::to_string(ks[1]) + " != Cin/groups " + std::to_string(g.cin_g));
    }
    if (bias.defined() && (bias.dim() != 1 || bias.size(0) != g.cout)) {
        shape_error("conv2d", "bias must be [" + std::to_string(g.cout) + "], got " + shape_str(bias.shape()));
    }
    const std::size_t span = g.dil * (g.k - 1) + 1;
    if (g.h + 2 * g.pad < span || g.w + 2 * g.pad < span) {
        shape_error("conv2d", "kernel extent " + std::to_string(span) + " exceeds padded input " + shape_str(is));
    }
    g.oh = (g.h + 2 * g.pad - span) / g.stride + 1;
    g.ow = (g.w + 2 * g.pad - span) / g.stride + 1;
    return g;
}

// Direct convolution; `fn(out_idx, in_idx, w_idx)` is invoked for every valid tap.
template <class F>
void conv_taps(const ConvGeom& g, F&& fn) {
    for (std::size_t grp = 0; grp < g.groups; ++grp) {
        for (std::size_t col = 0; col < g.cout_g; ++col) {
            const std::size_t co = grp * g.cout_g + col;
            for (std::size_t cil = 0; cil < g.cin_g; ++cil) {
                const std::size_t ci = grp * g.cin_g + cil;
                for (std::size_t ky = 0; ky < g.k; ++ky) {
                    std::size_t oy0, oy1;
                    g.valid_range(ky, g.h, g.oh, oy0, oy1);
                    for (std::size_t kx = 0; kx < g.k; ++kx) {
                        std::size_t ox0, ox1;
                        g.valid_range(kx, g.w, g.ow, ox0, ox1);
                        const std::size_t widx = ((co * g.cin_g + cil) * g.k + ky) * g.k + kx;
                        for (std::size_t oy = oy0; oy < oy1; ++oy) {
                            const std::size_t iy = oy * g.stride + ky * g.dil - g.pad;
                            const std::size_t orow = (co * g.oh + oy) * g.ow;
                            const std::size_t irow = (ci * g.h + iy) * g.w;
                            fn(orow, irow, widx, ox0, ox1,
                               static_cast<std::ptrdiff_t>(kx * g.dil) - static_cast<std::ptrdiff_t>(g.pad));
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, const Conv2dOptions& opt) {
    const ConvGeom g = conv_geometry(input, kernel, bias, opt);
    const auto xv = input.data();
    const auto wv = kernel.data();
    const std::size_t plane = g.oh * g.ow;
    std::vector<double> out(g.cout * plane, 0.0);
    const bool pointwise = g.k == 1 && g.stride == 1 && g.pad == 0 && g.groups == 1;
    if (pointwise) {
        detail::gemm(false, false, g.cout, plane, g.cin, wv.data(), xv.data(), out.data());
    } else {
        const std::size_t stride = g.stride;
        conv_taps(g, [&](std::size_t orow, std::size_t irow, std::size_t widx, std::size_t ox0, std::size_t ox1,
                         std::ptrdiff_t shift) {
            const double wt = wv[widx];
            double* o = out.data() + orow;
            const double* in = xv.data() + irow;
            for (std::size_t ox = ox0; ox < ox1; ++ox) o[ox] += wt * in[static_cast<std::ptrdiff_t>(ox * stride) + shift];
        });
    }
    if (bias.defined()) {
        const auto bv = bias.data();
        for (std::size_t co = 0; co < g.cout; ++co)
            for (std::size_t p = 0; p < plane; ++p) out[co * plane + p] += bv[co];
    }
    auto backward = [g, pointwise](Node& self) {
        const auto& gy = self.grad;
        const auto& xin = self.inputs[0]->data;
        const auto& wk = self.inputs[1]->data;
        auto* gx = input_grad(self, 0);
        auto* gw = input_grad(self, 1);
        auto* gb = self.inputs.size() > 2 ? input_grad(self, 2) : nullptr;
        const std::size_t plane = g.oh * g.ow;
        if (pointwise) {
            if (gx) detail::gemm(true, false, g.cin, plane, g.cout, wk.data(), gy.data(), gx->data());
            if (gw) detail::gemm(false, true, g.cout, g.cin, plane, gy.data(), xin.data(), gw->data());
        } else {
            const std::size_t stride = g.stride;
            conv_taps(g, [&](std::size_t orow, std::size_t irow, std::size_t widx, std::size_t ox0, std::size_t ox1,
                             std::ptrdiff_t shift) {
                const double* go = gy.data() + orow;
                if (gx) {
                    const double wt = wk[widx];
                    double* gi = gx->data() + irow;
                    for (std::size_t ox = ox0; ox < ox1; ++ox) gi[static_cast<std::ptrdiff_t>(ox * stride) + shift] += wt * go[ox];
                }
                if (gw) {
                    const double* in = xin.data() + irow;
                    double acc = 0.0;
                    for (std::size_t ox = ox0; ox < ox1; ++ox) acc += go[ox] * in[static_cast<std::ptrdiff_t>(ox * stride) + shift];
                    (*gw)[widx] += acc;
                }
            });
        }
        if (gb) {
            for (std::size_t co = 0; co < g.cout; ++co) {
                double acc = 0.0;
                for (std::size_t p = 0; p < plane; ++p) acc += gy[co * plane + p];
                (*gb)[co] += acc;
            }
        }
    };
    std::vector<Tensor> inputs{input, kernel};
    if (bias.defined()) inputs.push_back(bias);
    return make_result({g.cout, g.oh, g.ow}, std::move(out), inputs, backward, "conv2d");
}

Tensor conv2d_same(const Tensor& input, const Tensor& kernel, std::size_t dilation, std::size_t groups) {
    if (kernel.dim() != 4 || kernel.size(2) % 2 == 0) {
        shape_error("conv2d_same", "needs an odd square kernel, got " + shape_str(kernel.shape()));
    }
    Conv2dOptions opt;
    opt.dilation = dilation;
    opt.groups = groups;
    opt.padding = dilation * (kernel.size(2) - 1) / 2;
    return conv2d(input, kernel, Tensor(), opt);
}

Tensor conv1d_depthwise(const Tensor& input, const Tensor& kernel) {
    const Shape& is = input.shape();
    const Shape& ks = kernel.shape();
    if (is.size() != 2) shape_error("conv1d_depthwise", "input must be [C x L], got " + shape_str(is));
    if (ks.size() != 3 || ks[0] != is[0] || ks[1] != 1) {
        shape_error("conv1d_depthwise", "kernel must be [" + std::to_string(is[0]) + " x 1 x k], got " + shape_str(ks));
    }
    const std::size_t c = is[0], len = is[1], k = ks[2];
    if (k > len) shape_error("conv1d_depthwise", "kernel width " + std::to_string(k) + " exceeds length " + std::to_string(len));
    if (k % 2 == 0) shape_error("conv1d_depthwise", "kernel width must be odd for same padding");
    const std::size_t pad = (k - 1) / 2;
    const auto xv = input.data();
    const auto wv = kernel.data();
    std::vector<double> out(c * len, 0.0);
    auto taps = [c, len, k, pad](auto&& fn) {
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t t = 0; t < k; ++t) {
                // out[i] += w[t] * x[i + t - pad]
                const std::size_t lo = t < pad ? pad - t : 0;
                const std::size_t hi = std::min(len, len + pad - t);
                fn(ch, t, lo, hi);
            }
    };
    taps([&](std::size_t ch, std::size_t t, std::size_t lo, std::size_t hi) {
        const double wt = wv[ch * k + t];
        for (std::size_t i = lo; i < hi; ++i) out[ch * len + i] += wt * xv[ch * len + i + t - pad];
    });
    auto backward = [taps, len, k, pad](Node& self) {
        auto* gx = input_grad(self, 0);
        auto* gw = input_grad(self, 1);
        const auto& xin = self.inputs[0]->data;
        const auto& wk = self.inputs[1]->data;
        const auto& gy = self.grad;
        taps([&](std::size_t ch, std::size_t t, std::size_t lo, std::size_t hi) {
            double acc = 0.0;
            for (std::size_t i = lo; i < hi; ++i) {
                const std::size_t src = ch * len + i + t - pad;
                if (gx) (*gx)[src] += wk[ch * k + t] * gy[ch * len + i];
                acc += gy[ch * len + i] * xin[src];
            }
            if (gw) (*gw)[ch * k + t] += acc;
        });
    };
    return make_result(is, std::move(out), {input, kernel}, backward, "conv1d_depthwise");
}

Tensor layer_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, double eps) {
    if (!(eps > 0)) shape_error("layer_norm", "eps must be positive");
    const Shape& is = input.shape();
    if (is.empty()) shape_error("layer_norm", "input needs a channel axis");
    const std::size_t c = is[0];
    const std::size_t positions = input.numel() / std::max<std::size_t>(c, 1);
    if (gamma.numel() != c || beta.numel() != c) {
        shape_error("layer_norm", "gamma/beta must have " + std::to_string(c) + " entries");
    }
    const auto xv = input.data();
    const auto gv = gamma.data();
    const auto bv = beta.data();
    std::vector<double> out(xv.size());
    std::vector<double> xhat(xv.size());
    std::vector<double> inv_std(positions);
    for (std::size_t p = 0; p < positions; ++p) {
        double m = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch) m += xv[ch * positions + p];
        m /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double d = xv[ch * positions + p] - m;
            var += d * d;
        }
        var /= static_cast<double>(c);
        const double is_ = 1.0 / std::sqrt(var + eps);
        inv_std[p] = is_;
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t at = ch * positions + p;
            xhat[at] = (xv[at] - m) * is_;
            out[at] = xhat[at] * gv[ch] + bv[ch];
        }
    }
    auto backward = [c, positions, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        auto* gx = input_grad(self, 0);
        auto* gg = input_grad(self, 1);
        auto* gb = input_grad(self, 2);
        const auto& gy = self.grad;
        const auto& gam = self.inputs[1]->data;
        const double inv_c = 1.0 / static_cast<double>(c);
        for (std::size_t p = 0; p < positions; ++p) {
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::size_t ch = 0; ch < c; ++ch) {
                const std::size_t at = ch * positions + p;
                const double gh = gy[at] * gam[ch];
                sum_g += gh;
                sum_gx += gh * xhat[at];
                if (gg) (*gg)[ch] += gy[at] * xhat[at];
                if (gb) (*gb)[ch] += gy[at];
            }
            if (gx) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const std::size_t at = ch * positions + p;
                    const double gh = gy[at] * gam[ch];
                    (*gx)[at] += inv_std[p] * (gh - inv_c * sum_g - xhat[at] * inv_c * sum_gx);
                }
            }
        }
    };
    return make_result(is, std::move(out), {input, gamma, beta}, backward, "layer_norm");
}

Tensor softmax(const Tensor& x, std::size_t axis) {
    const Shape& s = x.shape();
    if (axis >= s.size()) shape_error("softmax", "axis out of range for " + shape_str(s));
    std::size_t outer = 1, inner = 1;
    for (std::size_t k = 0; k < axis; ++k) outer *= s[k];
    for (std::size_t k = axis + 1; k < s.size(); ++k) inner *= s[k];
    const std::size_t extent = s[axis];
    const auto xv = x.data();
    std::vector<double> out(xv.size());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t base = o * extent * inner + i;
            double mx = xv[base];
            for (std::size_t e = 1; e < extent; ++e) mx = std::max(mx, xv[base + e * inner]);
            double total = 0.0;
            for (std::size_t e = 0; e < extent; ++e) {
                const double v = std::exp(xv[base + e * inner] - mx);
                out[base + e * inner] = v;
                total += v;
            }
            for (std::size_t e = 0; e < extent; ++e) out[base + e * inner] /= total;
        }
    }
    auto backward = [outer, inner, extent](Node& self) {
        auto* gx = input_grad(self, 0);
        if (!gx) return;
        const auto& y = self.data;
        const auto& gy = self.grad;
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t base = o * extent * inner + i;
                double dot = 0.0;
                for (std::size_t e = 0; e < extent; ++e) dot += gy[base + e * inner] * y[base + e * inner];
                for (std::size_t e = 0; e < extent; ++e) {
                    const std::size_t at = base + e * inner;
                    (*gx)[at] += y[at] * (gy[at] - dot);
                }
            }
        }
    };
    return make_result(s, std::move(out), {x}, backward, "softmax");
}

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b) {
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    if (as.size() < 2 || bs.size() < 2) shape_error("matmul", "operands need rank >= 2: " + shape_str(as) + ", " + shape_str(bs));
    const std::size_t m = as[as.size() - 2];
    const std::size_t k = as[as.size() - 1];
    const std::size_t bk = transpose_b ? bs[bs.size() - 1] : bs[bs.size() - 2];
    const std::size_t n = transpose_b ? bs[bs.size() - 2] : bs[bs.size() - 1];
    if (bk != k) {
        shape_error("matmul", "inner dimensions differ: " + shape_str(as) + " * " + shape_str(bs) +
                                  (transpose_b ? "^T" : "") + " (" + std::to_string(k) + " vs " + std::to_string(bk) + ")");
    }
    const Shape lead(as.begin(), as.end() - 2);
    const Shape blead(bs.begin(), bs.end() - 2);
    const bool shared_b = blead.empty();
    if (!shared_b && blead != lead) shape_error("matmul", "batch dimensions differ: " + shape_str(as) + " vs " + shape_str(bs));
    const std::size_t batch = shape_numel(lead);
    Shape out_shape = lead;
    out_shape.push_back(m);
    out_shape.push_back(n);
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<double> out(batch * m * n, 0.0);
    for (std::size_t i = 0; i < batch; ++i) {
        detail::gemm(false, transpose_b, m, n, k, av.data() + i * m * k, bv.data() + (shared_b ? 0 : i * k * n),
                     out.data() + i * m * n);
    }
    auto backward = [batch, m, n, k, shared_b, transpose_b](Node& self) {
        auto* ga = input_grad(self, 0);
        auto* gb = input_grad(self, 1);
        const auto& A = self.inputs[0]->data;
        const auto& B = self.inputs[1]->data;
        const auto& G = self.grad;
        for (std::size_t i = 0; i < batch; ++i) {
            const double* g = G.data() + i * m * n;
            const double* bb = B.data() + (shared_b ? 0 : i * k * n);
            // dA = G * op(B)^T
            if (ga) detail::gemm(false, !transpose_b, m, k, n, g, bb, ga->data() + i * m * k);
            if (gb) {
                double* gbb = gb->data() + (shared_b ? 0 : i * k * n);
                if (transpose_b) {
                    detail::gemm(true, false, n, k, m, g, A.data() + i * m * k, gbb);  // dB = G^T A
                } else {
                    detail::gemm(true, false, k, n, m, A.data() + i * m * k, g, gbb);  // dB = A^T G
                }
            }
        }
    };
    return make_result(std::move(out_shape), std::move(out), {a, b}, backward, "matmul");
}

Tensor pixel_unshuffle(const Tensor& x, std::size_t r) {
    const Shape& s = x.shape();
    if (s.size() != 3) shape_error("pixel_unshuffle", "input must be [C x H x W], got " + shape_str(s));
    if (r == 0 || s[1] % r != 0 || s[2] % r != 0) {
        shape_error("pixel_unshuffle", "factor " + std::to_string(r) + " must divide H and W of " + shape_str(s));
    }
    const std::size_t c = s[0], h = s[1], w = s[2], oh = h / r, ow = w / r;
    std::vector<std::size_t> source(x.numel());
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < r; ++j)
                for (std::size_t y = 0; y < oh; ++y)
                    for (std::size_t xx = 0; xx < ow; ++xx)
                        source[(((ch * r + i) * r + j) * oh + y) * ow + xx] = (ch * h + y * r + i) * w + xx * r + j;
    return detail::remap(x, {c * r * r, oh, ow}, std::move(source), "pixel_unshuffle");
}

Tensor pixel_shuffle(const Tensor& x, std::size_t r) {
    const Shape& s = x.shape();
    if (s.size() != 3) shape_error("pixel_shuffle", "input must be [C x H x W], got " + shape_str(s));
    if (r == 0 || s[0] % (r * r) != 0) {
        shape_error("pixel_shuffle", "factor^2 = " + std::to_string(r * r) + " must divide channels of " + shape_str(s));
    }
    const std::size_t c = s[0] / (r * r), h = s[1], w = s[2], oh = h * r, ow = w * r;
    std::vector<std::size_t> source(x.numel());
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < r; ++j)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t xx = 0; xx < w; ++xx)
                        source[(ch * oh + y * r + i) * ow + xx * r + j] = (((ch * r + i) * r + j) * h + y) * w + xx;
    return detail::remap(x, {c, oh, ow}, std::move(source), "pixel_shuffle");
}

void check_permutation(std::span<const std::size_t> index, std::size_t n) {
    if (index.size() != n) {
        throw std::invalid_argument("index has length " + std::to_string(index.size()) + ", expected " + std::to_string(n));
    }
    std::vector<bool> seen(n, false);
    for (auto i : index) {
        if (i >= n || seen[i]) throw std::invalid_argument("index is not a permutation of 0.." + std::to_string(n - 1));
        seen[i] = true;
    }
}

Tensor gather_last(const Tensor& x, std::span<const std::size_t> index) {
    if (x.dim() == 0) shape_error("gather", "needs at least one axis");
    const std::size_t len = x.shape().back();
    check_permutation(index, len);
    const std::size_t rows = x.numel() / std::max<std::size_t>(len, 1);
    std::vector<std::size_t> source(x.numel());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < len; ++j) source[r * len + j] = r * len + index[j];
    return detail::remap(x, x.shape(), std::move(source), "gather");
}

Tensor scatter_last(const Tensor& x, std::span<const std::size_t> index) {
    if (x.dim() == 0) shape_error("scatter", "needs at least one axis");
    const std::size_t len = x.shape().back();
    check_permutation(index, len);
    const std::size_t rows = x.numel() / std::max<std::size_t>(len, 1);
    std::vector<std::size_t> source(x.numel());
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < len; ++j) source[r * len + index[j]] = r * len + j;
    return detail::remap(x, x.shape(), std::move(source), "scatter");
}

namespace {

struct Interp {
    std::size_t i0, i1;
    double w1;
};

std::vector<Interp> align_corners_axis(std::size_t in, std::size_t out) {
    std::vector<Interp> taps(out);
    for (std::size_t o = 0; o < out; ++o) {
        const double pos = out > 1 ? static_cast<double>(o) * static_cast<double>(in - 1) / static_cast<double>(out - 1) : 0.0;
        std::size_t i0 = static_cast<std::size_t>(std::floor(pos));
        if (i0 >= in - 1) i0 = in > 1 ? in - 2 : 0;
        const std::size_t i1 = in > 1 ? i0 + 1 : 0;
        taps[o] = {i0, i1, in > 1 ? pos - static_cast<double>(i0) : 0.0};
    }
    return taps;
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, std::size_t height, std::size_t width) {
    const Shape& s = x.shape();
    if (s.size() != 3) shape_error("bilinear_resize", "input must be [C x h x w], got " + shape_str(s));
    const std::size_t c = s[0], h = s[1], w = s[2];
    if (h == 0 || w == 0 || height == 0 || width == 0) shape_error("bilinear_resize", "empty extent");
    if ((height != h && h < 2) || (width != w && w < 2)) {
        shape_error("bilinear_resize", "source extents must be >= 2 when resizing, got " + shape_str(s));
    }
    const auto ty = align_corners_axis(h, height);
    const auto tx = align_corners_axis(w, width);
    const auto xv = x.data();
    std::vector<double> out(c * height * width);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double* src = xv.data() + ch * h * w;
        for (std::size_t oy = 0; oy < height; ++oy) {
            const auto& a = ty[oy];
            for (std::size_t ox = 0; ox < width; ++ox) {
                const auto& b = tx[ox];
                const double top = src[a.i0 * w + b.i0] * (1 - b.w1) + src[a.i0 * w + b.i1] * b.w1;
                const double bot = src[a.i1 * w + b.i0] * (1 - b.w1) + src[a.i1 * w + b.i1] * b.w1;
                out[(ch * height + oy) * width + ox] = top * (1 - a.w1) + bot * a.w1;
            }
        }
    }
    auto backward = [ty, tx, c, h, w, height, width](Node& self) {
        auto* gx = input_grad(self, 0);
        if (!gx) return;
        for (std::size_t ch = 0; ch < c; ++ch) {
            double* dst = gx->data() + ch * h * w;
            for (std::size_t oy = 0; oy < height; ++oy) {
                const auto& a = ty[oy];
                for (std::size_t ox = 0; ox < width; ++ox) {
                    const auto& b = tx[ox];
                    const double g = self.grad[(ch * height + oy) * width + ox];
                    dst[a.i0 * w + b.i0] += g * (1 - a.w1) * (1 - b.w1);
                    dst[a.i0 * w + b.i1] += g * (1 - a.w1) * b.w1;
                    dst[a.i1 * w + b.i0] += g * a.w1 * (1 - b.w1);
                    dst[a.i1 * w + b.i1] += g * a.w1 * b.w1;
                }
            }
        }
    };
    return make_result({c, height, width}, std::move(out), {x}, backward, "bilinear_resize");
}

}  // namespace transmamba
