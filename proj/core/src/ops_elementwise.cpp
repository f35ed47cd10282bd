#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "transmamba/ops.hpp"

namespace transmamba {

using detail::input_grad;
using detail::make_result;
using detail::Node;

namespace {

struct Broadcast {
    Shape out;
    std::vector<std::size_t> stride_a;
    std::vector<std::size_t> stride_b;
    bool same = false;
};

std::vector<std::size_t> aligned_strides(const Shape& in, const Shape& out) {
    std::vector<std::size_t> strides(out.size(), 0);
    std::size_t running = 1;
    const std::size_t offset = out.size() - in.size();
    for (std::size_t k = in.size(); k-- > 0;) {
        strides[k + offset] = in[k] == 1 ? 0 : running;
        running *= in[k];
    }
    return strides;
}

Broadcast broadcast(const Shape& a, const Shape& b, const char* op) {
    Broadcast bc;
    if (a == b) {
        bc.out = a;
        bc.same = true;
        return bc;
    }
    const std::size_t rank = std::max(a.size(), b.size());
    bc.out.assign(rank, 1);
    for (std::size_t k = 0; k < rank; ++k) {
        const std::size_t da = k + a.size() >= rank ? a[k + a.size() - rank] : 1;
        const std::size_t db = k + b.size() >= rank ? b[k + b.size() - rank] : 1;
        if (da != db && da != 1 && db != 1) {
            throw std::invalid_argument(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " +
                                        shape_str(b) + " (axis " + std::to_string(k) + ")");
        }
        bc.out[k] = std::max(da, db);
    }
    bc.stride_a = aligned_strides(a, bc.out);
    bc.stride_b = aligned_strides(b, bc.out);
    return bc;
}

template <class F>
void for_each_broadcast(const Broadcast& bc, F&& f) {
    const std::size_t n = shape_numel(bc.out);
    if (bc.same) {
        for (std::size_t i = 0; i < n; ++i) f(i, i, i);
        return;
    }
    const std::size_t rank = bc.out.size();
    if (rank == 0) {
        f(0, 0, 0);
        return;
    }
    std::vector<std::size_t> idx(rank, 0);
    std::size_t ia = 0;
    std::size_t ib = 0;
    const std::size_t last = rank - 1;
    const std::size_t inner = bc.out[last];
    const std::size_t sa = bc.stride_a[last];
    const std::size_t sb = bc.stride_b[last];
    for (std::size_t i = 0; i < n; i += inner) {
        for (std::size_t j = 0; j < inner; ++j) f(i + j, ia + j * sa, ib + j * sb);
        // carry into the outer axes
        std::size_t d = last;
        while (d-- > 0) {
            ++idx[d];
            ia += bc.stride_a[d];
            ib += bc.stride_b[d];
            if (idx[d] < bc.out[d]) break;
            ia -= bc.stride_a[d] * bc.out[d];
            ib -= bc.stride_b[d] * bc.out[d];
            idx[d] = 0;
        }
    }
}

enum class BinOp { add, sub, mul, div };

Tensor binary(const Tensor& a, const Tensor& b, BinOp kind, const char* name) {
    Broadcast bc = broadcast(a.shape(), b.shape(), name);
    std::vector<double> out(shape_numel(bc.out));
    const auto da = a.data();
    const auto db = b.data();
    switch (kind) {
        case BinOp::add: for_each_broadcast(bc, [&](auto i, auto ia, auto ib) { out[i] = da[ia] + db[ib]; }); break;
        case BinOp::sub: for_each_broadcast(bc, [&](auto i, auto ia, auto ib) { out[i] = da[ia] - db[ib]; }); break;
        case BinOp::mul: for_each_broadcast(bc, [&](auto i, auto ia, auto ib) { out[i] = da[ia] * db[ib]; }); break;
        case BinOp::div: for_each_broadcast(bc, [&](auto i, auto ia, auto ib) { out[i] = da[ia] / db[ib]; }); break;
    }
    auto backward = [bc, kind](Node& self) {
        const auto& g = self.grad;
        const auto& av = self.inputs[0]->data;
        const auto& bv = self.inputs[1]->data;
        auto* ga = input_grad(self, 0);
        auto* gb = input_grad(self, 1);
        for_each_broadcast(bc, [&](auto i, auto ia, auto ib) {
            switch (kind) {
                case BinOp::add:
                    if (ga) (*ga)[ia] += g[i];
                    if (gb) (*gb)[ib] += g[i];
                    break;
                case BinOp::sub:
                    if (ga) (*ga)[ia] += g[i];
                    if (gb) (*gb)[ib] -= g[i];
                    break;
                case BinOp::mul:
                    if (ga) (*ga)[ia] += g[i] * bv[ib];
                    if (gb) (*gb)[ib] += g[i] * av[ia];
                    break;
                case BinOp::div:
                    if (ga) (*ga)[ia] += g[i] / bv[ib];
                    if (gb) (*gb)[ib] -= g[i] * av[ia] / (bv[ib] * bv[ib]);
                    break;
            }
        });
    };
    return make_result(bc.out, std::move(out), {a, b}, backward, name);
}

// Elementwise map whose derivative is expressed through (input, output).
template <class F, class D>
Tensor unary(const Tensor& x, const char* name, F f, D dfdx) {
    const auto xv = x.data();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
    auto backward = [dfdx](Node& self) {
        auto* gx = input_grad(self, 0);
        if (!gx) return;
        const auto& xin = self.inputs[0]->data;
        for (std::size_t i = 0; i < self.grad.size(); ++i) (*gx)[i] += self.grad[i] * dfdx(xin[i], self.data[i]);
    };
    return make_result(x.shape(), std::move(out), {x}, backward, name);
}

double stable_sigmoid(double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::mul, "mul"); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::div, "div"); }

Tensor scale(const Tensor& x, double factor) {
    return unary(x, "scale", [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
    return unary(x, "add_scalar", [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor square(const Tensor& x) {
    return unary(x, "square", [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sqrt(const Tensor& x) {
    return unary(x, "sqrt", [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Tensor exp(const Tensor& x) {
    return unary(x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
    return unary(x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor abs(const Tensor& x) {
    return unary(
        x, "abs", [](double v) { return std::abs(v); },
        [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

Tensor relu(const Tensor& x) {
    return unary(x, "relu", [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
    return unary(x, "sigmoid", stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor silu(const Tensor& x) {
    return unary(
        x, "silu", [](double v) { return v * stable_sigmoid(v); },
        [](double v, double) {
            const double s = stable_sigmoid(v);
            return s * (1.0 + v * (1.0 - s));
        });
}

Tensor softplus(const Tensor& x) {
    return unary(
        x, "softplus", [](double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); },
        [](double v, double) { return stable_sigmoid(v); });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    return unary(
        x, "clamp", [lo, hi](double v) { return std::clamp(v, lo, hi); },
        [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------

Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (double v : x.data()) total += v;
    auto backward = [](Node& self) {
        auto* gx = input_grad(self, 0);
        if (!gx) return;
        const double g = self.grad[0];
        for (double& v : *gx) v += g;
    };
    return make_result({}, {total}, {x}, backward, "sum");
}

Tensor mean(const Tensor& x) {
    if (x.numel() == 0) throw std::invalid_argument("mean of empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

namespace {

struct AxisSplit {
    std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis, const char* op) {
    if (axis >= s.size()) {
        throw std::invalid_argument(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                                    shape_str(s));
    }
    AxisSplit sp;
    for (std::size_t k = 0; k < axis; ++k) sp.outer *= s[k];
    sp.extent = s[axis];
    for (std::size_t k = axis + 1; k < s.size(); ++k) sp.inner *= s[k];
    return sp;
}

Shape reduced_shape(const Shape& s, std::size_t axis, bool keepdim) {
    Shape out = s;
    if (keepdim) {
        out[axis] = 1;
    } else {
        out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
    }
    return out;
}

}  // namespace

Tensor sum_axis(const Tensor& x, std::size_t axis, bool keepdim) {
    const auto sp = split_at(x.shape(), axis, "sum_axis");
    const auto xv = x.data();
    std::vector<double> out(sp.outer * sp.inner, 0.0);
    for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t e = 0; e < sp.extent; ++e)
            for (std::size_t i = 0; i < sp.inner; ++i) out[o * sp.inner + i] += xv[(o * sp.extent + e) * sp.inner + i];
    auto backward = [sp](Node& self) {
        auto* gx = input_grad(self, 0);
        if (!gx) return;
        for (std::size_t o = 0; o < sp.outer; ++o)
            for (std::size_t e = 0; e < sp.extent; ++e)
                for (std::size_t i = 0; i < sp.inner; ++i)
                    (*gx)[(o * sp.extent + e) * sp.inner + i] += self.grad[o * sp.inner + i];
    };
    return make_result(reduced_shape(x.shape(), axis, keepdim), std::move(out), {x}, backward, "sum_axis");
}

Tensor mean_axis(const Tensor& x, std::size_t axis, bool keepdim) {
    const std::size_t extent = x.size(axis);
    return scale(sum_axis(x, axis, keepdim), 1.0 / static_cast<double>(extent));
}

Tensor max_axis(const Tensor& x, std::size_t axis, bool keepdim) {
    const auto sp = split_at(x.shape(), axis, "max_axis");
    if (sp.extent == 0) throw std::invalid_argument("max_axis over empty axis");
    const auto xv = x.data();
    std::vector<double> out(sp.outer * sp.inner);
    std::vector<std::size_t> argmax(out.size());
    for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t i = 0; i < sp.inner; ++i) {
            std::size_t best = o * sp.extent * sp.inner + i;
            for (std::size_t e = 1; e < sp.extent; ++e) {
                const std::size_t at = (o * sp.extent + e) * sp.inner + i;
                if (xv[at] > xv[best]) best = at;
            }
            out[o * sp.inner + i] = xv[best];
            argmax[o * sp.inner + i] = best;
        }
    }
    auto backward = [argmax = std::move(argmax)](Node& self) {
        auto* gx = input_grad(self, 0);
        if (!gx) return;
        for (std::size_t k = 0; k < argmax.size(); ++k) (*gx)[argmax[k]] += self.grad[k];
    };
    return make_result(reduced_shape(x.shape(), axis, keepdim), std::move(out), {x}, backward, "max_axis");
}

}  // namespace transmamba
