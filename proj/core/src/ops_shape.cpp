#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "detail/remap.hpp"
#include "transmamba/ops.hpp"

namespace transmamba {

using detail::input_grad;
using detail::make_result;
using detail::Node;

namespace detail {

Tensor remap(const Tensor& x, Shape out_shape, std::vector<std::size_t> source, const char* op) {
    const auto xv = x.data();
    std::vector<double> out(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) out[i] = xv[source[i]];
    auto backward = [source = std::move(source)](Node& self) {
        auto* gx = input_grad(self, 0);
        if (!gx) return;
        for (std::size_t i = 0; i < source.size(); ++i) (*gx)[source[i]] += self.grad[i];
    };
    return make_result(std::move(out_shape), std::move(out), {x}, std::move(backward), op);
}

}  // namespace detail

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    }
    std::vector<double> out(x.data().begin(), x.data().end());
    auto backward = [](Node& self) {
        auto* gx = input_grad(self, 0);
        if (!gx) return;
        for (std::size_t i = 0; i < self.grad.size(); ++i) (*gx)[i] += self.grad[i];
    };
    return make_result(std::move(shape), std::move(out), {x}, backward, "reshape");
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& order) {
    const Shape& in = x.shape();
    const std::size_t rank = in.size();
    if (order.size() != rank) throw std::invalid_argument("permute: order rank mismatch for " + shape_str(in));
    std::vector<bool> used(rank, false);
    for (auto a : order) {
        if (a >= rank || used[a]) throw std::invalid_argument("permute: order is not a permutation");
        used[a] = true;
    }
    std::vector<std::size_t> in_stride(rank, 1);
    for (std::size_t k = rank; k-- > 1;) in_stride[k - 1] = in_stride[k] * in[k];
    Shape out(rank);
    std::vector<std::size_t> stride(rank);
    for (std::size_t k = 0; k < rank; ++k) {
        out[k] = in[order[k]];
        stride[k] = in_stride[order[k]];
    }
    const std::size_t n = x.numel();
    std::vector<std::size_t> source(n);
    std::vector<std::size_t> idx(rank, 0);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < n; ++i) {
        source[i] = offset;
        for (std::size_t d = rank; d-- > 0;) {
            ++idx[d];
            offset += stride[d];
            if (idx[d] < out[d]) break;
            offset -= stride[d] * out[d];
            idx[d] = 0;
        }
    }
    return detail::remap(x, std::move(out), std::move(source), "permute");
}

Tensor narrow(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
    const Shape& in = x.shape();
    if (axis >= in.size() || start + length > in[axis]) {
        throw std::invalid_argument("narrow: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                                    ") on axis " + std::to_string(axis) + " of " + shape_str(in));
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t k = 0; k < axis; ++k) outer *= in[k];
    for (std::size_t k = axis + 1; k < in.size(); ++k) inner *= in[k];
    const std::size_t extent = in[axis];
    Shape out = in;
    out[axis] = length;
    const auto xv = x.data();
    std::vector<double> data(outer * length * inner);
    for (std::size_t o = 0; o < outer; ++o) {
        std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>((o * extent + start) * inner), length * inner,
                    data.begin() + static_cast<std::ptrdiff_t>(o * length * inner));
    }
    auto backward = [outer, inner, extent, start, length](Node& self) {
        auto* gx = input_grad(self, 0);
        if (!gx) return;
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t k = 0; k < length * inner; ++k)
                (*gx)[(o * extent + start) * inner + k] += self.grad[o * length * inner + k];
    };
    return make_result(std::move(out), std::move(data), {x}, backward, "narrow");
}

Tensor select(const Tensor& x, std::size_t axis, std::size_t index) {
    Shape out = x.shape();
    Tensor slice = narrow(x, axis, index, 1);
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
    return reshape(slice, std::move(out));
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    const Shape& first = parts.front().shape();
    if (axis >= first.size()) throw std::invalid_argument("concat: axis out of range for " + shape_str(first));
    std::size_t outer = 1, inner = 1;
    for (std::size_t k = 0; k < axis; ++k) outer *= first[k];
    for (std::size_t k = axis + 1; k < first.size(); ++k) inner *= first[k];
    std::vector<std::size_t> extents;
    std::size_t total = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        bool ok = s.size() == first.size();
        for (std::size_t k = 0; ok && k < s.size(); ++k) ok = (k == axis) || s[k] == first[k];
        if (!ok) throw std::invalid_argument("concat: " + shape_str(s) + " incompatible with " + shape_str(first));
        extents.push_back(s[axis]);
        total += s[axis];
    }
    Shape out = first;
    out[axis] = total;
    std::vector<double> data(outer * total * inner);
    std::size_t at = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const auto pv = parts[p].data();
        for (std::size_t o = 0; o < outer; ++o) {
            std::copy_n(pv.begin() + static_cast<std::ptrdiff_t>(o * extents[p] * inner), extents[p] * inner,
                        data.begin() + static_cast<std::ptrdiff_t>((o * total + at) * inner));
        }
        at += extents[p];
    }
    auto backward = [outer, inner, total, extents](Node& self) {
        std::size_t at = 0;
        for (std::size_t p = 0; p < extents.size(); ++p) {
            if (auto* gp = input_grad(self, p)) {
                for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t k = 0; k < extents[p] * inner; ++k)
                        (*gp)[o * extents[p] * inner + k] += self.grad[(o * total + at) * inner + k];
            }
            at += extents[p];
        }
    };
    return make_result(std::move(out), std::move(data), parts, backward, "concat");
}

Tensor stack(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw std::invalid_argument("stack: no inputs");
    std::vector<Tensor> expanded;
    expanded.reserve(parts.size());
    for (const auto& p : parts) {
        Shape s = p.shape();
        if (axis > s.size()) throw std::invalid_argument("stack: axis out of range");
        s.insert(s.begin() + static_cast<std::ptrdiff_t>(axis), 1);
        expanded.push_back(reshape(p, std::move(s)));
    }
    return concat(expanded, axis);
}

Tensor flip(const Tensor& x, std::size_t axis) {
    const Shape& in = x.shape();
    if (axis >= in.size()) throw std::invalid_argument("flip: axis out of range for " + shape_str(in));
    std::size_t outer = 1, inner = 1;
    for (std::size_t k = 0; k < axis; ++k) outer *= in[k];
    for (std::size_t k = axis + 1; k < in.size(); ++k) inner *= in[k];
    const std::size_t extent = in[axis];
    std::vector<std::size_t> source(x.numel());
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t e = 0; e < extent; ++e)
            for (std::size_t i = 0; i < inner; ++i)
                source[(o * extent + e) * inner + i] = (o * extent + (extent - 1 - e)) * inner + i;
    return detail::remap(x, in, std::move(source), "flip");
}

namespace {

std::size_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
    if (n == 1) return 0;
    const std::ptrdiff_t period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return static_cast<std::size_t>(i < n ? i : period - i);
}

}  // namespace

Tensor pad_reflect(const Tensor& x, std::size_t pad_bottom, std::size_t pad_right) {
    const Shape& in = x.shape();
    if (in.size() < 2) throw std::invalid_argument("pad_reflect: needs at least 2 axes, got " + shape_str(in));
    const std::size_t h = in[in.size() - 2];
    const std::size_t w = in[in.size() - 1];
    const std::size_t outer = x.numel() / (h * w);
    const std::size_t oh = h + pad_bottom;
    const std::size_t ow = w + pad_right;
    Shape out = in;
    out[out.size() - 2] = oh;
    out[out.size() - 1] = ow;
    std::vector<std::size_t> source(outer * oh * ow);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t xx = 0; xx < ow; ++xx)
                source[(o * oh + y) * ow + xx] =
                    (o * h + reflect_index(static_cast<std::ptrdiff_t>(y), static_cast<std::ptrdiff_t>(h))) * w +
                    reflect_index(static_cast<std::ptrdiff_t>(xx), static_cast<std::ptrdiff_t>(w));
    return detail::remap(x, std::move(out), std::move(source), "pad_reflect");
}

}  // namespace transmamba
