#include "transmamba/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "transmamba/fft.hpp"
#include "transmamba/ops.hpp"

namespace transmamba {

using detail::input_grad;
using detail::make_result;
using detail::Node;

namespace {

// Transforms every complex plane of an interleaved [2C x H x W] buffer.
// With `real_input`, src is [C x H x W] and imaginary parts are zero.
std::vector<double> transform_planes(std::span<const double> src, std::size_t c, std::size_t h, std::size_t w,
                                     bool inverse, double factor, bool real_input) {
    const std::size_t plane = h * w;
    std::vector<double> dst(2 * c * plane);
    std::vector<fft::cplx> buf(plane);
    for (std::size_t ch = 0; ch < c; ++ch) {
        if (real_input) {
            for (std::size_t i = 0; i < plane; ++i) buf[i] = {src[ch * plane + i], 0.0};
        } else {
            for (std::size_t i = 0; i < plane; ++i) buf[i] = {src[2 * ch * plane + i], src[(2 * ch + 1) * plane + i]};
        }
        fft::transform_2d(buf, h, w, inverse);
        for (std::size_t i = 0; i < plane; ++i) {
            dst[2 * ch * plane + i] = buf[i].real() * factor;
            dst[(2 * ch + 1) * plane + i] = buf[i].imag() * factor;
        }
    }
    return dst;
}

// y = F x (forward, unnormalized) or y = F^H x / (HW) (inverse). The adjoint of
// F is F^H, so gradients run through the opposite-direction transform.
Tensor dft2(const Tensor& x, bool inverse, bool real_input) {
    const Shape& s = x.shape();
    if (s.size() != 3) throw std::invalid_argument("fft2: input must be [C x H x W], got " + shape_str(s));
    if (!real_input && s[0] % 2 != 0) throw std::invalid_argument("fft2: interleaved input needs an even channel count");
    const std::size_t c = real_input ? s[0] : s[0] / 2;
    const std::size_t h = s[1], w = s[2];
    const double n = static_cast<double>(h * w);
    auto out = transform_planes(x.data(), c, h, w, inverse, inverse ? 1.0 / n : 1.0, real_input);
    auto backward = [c, h, w, n, inverse, real_input](Node& self) {
        auto* gx = input_grad(self, 0);
        if (!gx) return;
        auto back = transform_planes(self.grad, c, h, w, !inverse, inverse ? 1.0 / n : 1.0, false);
        const std::size_t plane = h * w;
        if (real_input) {
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t i = 0; i < plane; ++i) (*gx)[ch * plane + i] += back[2 * ch * plane + i];
        } else {
            for (std::size_t i = 0; i < back.size(); ++i) (*gx)[i] += back[i];
        }
    };
    return make_result({2 * c, h, w}, std::move(out), {x}, backward, inverse ? "ifft2" : "fft2");
}

}  // namespace

ComplexPlane::ComplexPlane(Tensor interleaved) : packed_(std::move(interleaved)) {
    if (packed_.dim() != 3 || packed_.size(0) % 2 != 0) {
        throw std::invalid_argument("ComplexPlane: expected [2C x H x W], got " + shape_str(packed_.shape()));
    }
}

ComplexPlane ComplexPlane::from_parts(const Tensor& re, const Tensor& im) {
    if (re.shape() != im.shape() || re.dim() != 3) {
        throw std::invalid_argument("ComplexPlane: real/imaginary shapes differ or are not [C x H x W]: " +
                                    shape_str(re.shape()) + " vs " + shape_str(im.shape()));
    }
    const Shape& s = re.shape();
    return ComplexPlane(reshape(stack({re, im}, 1), {2 * s[0], s[1], s[2]}));
}

Tensor ComplexPlane::re() const {
    return select(reshape(packed_, {channels(), 2, height(), width()}), 1, 0);
}

Tensor ComplexPlane::im() const {
    return select(reshape(packed_, {channels(), 2, height(), width()}), 1, 1);
}

ComplexPlane fft2(const Tensor& x) { return ComplexPlane(dft2(x, false, true)); }
ComplexPlane fft2(const ComplexPlane& x) { return ComplexPlane(dft2(x.interleaved(), false, false)); }
ComplexPlane ifft2(const ComplexPlane& x) { return ComplexPlane(dft2(x.interleaved(), true, false)); }

Tensor complex_to_real(const ComplexPlane& x) { return x.interleaved(); }

ComplexPlane real_to_complex(const Tensor& x) {
    if (x.dim() != 3 || x.size(0) % 2 != 0) {
        throw std::invalid_argument("real_to_complex: needs [2C x H x W] with an even channel count, got " +
                                    shape_str(x.shape()));
    }
    return ComplexPlane(x);
}

double frequency_magnitude(std::size_t u, std::size_t v, std::size_t height, std::size_t width) {
    const double fu = static_cast<double>(std::min(u, height - u)) / static_cast<double>(height);
    const double fv = static_cast<double>(std::min(v, width - v)) / static_cast<double>(width);
    return std::sqrt(fu * fu + fv * fv);
}

MeshIndex MeshIndex::build(std::size_t height, std::size_t width, std::size_t bands) {
    if (height == 0 || width == 0) throw std::invalid_argument("MeshIndex: empty extent");
    if (bands == 0 || (height * width) % bands != 0) {
        throw std::invalid_argument("MeshIndex: band count " + std::to_string(bands) + " must divide H*W = " +
                                    std::to_string(height * width));
    }
    MeshIndex m;
    m.height = height;
    m.width = width;
    m.bands = bands;
    const std::size_t n = height * width;
    std::vector<double> mag(n);
    for (std::size_t u = 0; u < height; ++u)
        for (std::size_t v = 0; v < width; ++v) mag[u * width + v] = frequency_magnitude(u, v, height, width);
    m.perm.resize(n);
    std::iota(m.perm.begin(), m.perm.end(), std::size_t{0});
    std::stable_sort(m.perm.begin(), m.perm.end(), [&](std::size_t a, std::size_t b) { return mag[a] > mag[b]; });
    return m;
}

std::vector<std::size_t> MeshIndex::band_positions(std::size_t band) const {
    if (band >= bands) throw std::out_of_range("MeshIndex::band_positions: band out of range");
    const auto first = perm.begin() + static_cast<std::ptrdiff_t>(band * band_length());
    return {first, first + static_cast<std::ptrdiff_t>(band_length())};
}

std::shared_ptr<const MeshIndex> MeshIndexCache::get(std::size_t height, std::size_t width, std::size_t bands) {
    std::lock_guard lock(mu_);
    auto& slot = entries_[{height, width, bands}];
    if (!slot) slot = std::make_shared<const MeshIndex>(MeshIndex::build(height, width, bands));
    return slot;
}

Tensor band_reorganize(const Tensor& x, const MeshIndex& mesh) {
    if (x.dim() != 2 || x.size(1) != mesh.length()) {
        throw std::invalid_argument("band_reorganize: expected [C x " + std::to_string(mesh.length()) + "], got " +
                                    shape_str(x.shape()));
    }
    const std::size_t c = x.size(0);
    return reshape(gather_last(x, mesh.perm), {c * mesh.bands, mesh.band_length()});
}

Tensor band_restore(const Tensor& x, const MeshIndex& mesh) {
    if (x.dim() != 2 || x.size(1) != mesh.band_length() || x.size(0) % mesh.bands != 0) {
        throw std::invalid_argument("band_restore: expected [C*" + std::to_string(mesh.bands) + " x " +
                                    std::to_string(mesh.band_length()) + "], got " + shape_str(x.shape()));
    }
    const std::size_t c = x.size(0) / mesh.bands;
    return scatter_last(reshape(x, {c, mesh.length()}), mesh.perm);
}

Tensor complex_abs(const ComplexPlane& x) {
    const std::size_t c = x.channels(), plane = x.height() * x.width();
    const auto v = x.interleaved().data();
    std::vector<double> out(c * plane);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < plane; ++i)
            out[ch * plane + i] = std::hypot(v[2 * ch * plane + i], v[(2 * ch + 1) * plane + i]);
    auto backward = [c, plane](Node& self) {
        auto* gx = input_grad(self, 0);
        if (!gx) return;
        const auto& v = self.inputs[0]->data;
        for (std::size_t ch = 0; ch < c; ++ch) {
            for (std::size_t i = 0; i < plane; ++i) {
                const double mag = self.data[ch * plane + i];
                if (mag == 0.0) continue;
                const double g = self.grad[ch * plane + i] / mag;
                (*gx)[2 * ch * plane + i] += g * v[2 * ch * plane + i];
                (*gx)[(2 * ch + 1) * plane + i] += g * v[(2 * ch + 1) * plane + i];
            }
        }
    };
    return make_result({c, x.height(), x.width()}, std::move(out), {x.interleaved()}, backward, "complex_abs");
}

ComplexPlane spectral_filter(const ComplexPlane& x, const Tensor& weight_re, const Tensor& weight_im,
                             const Tensor& bias) {
    const std::size_t c = x.channels(), h = x.height(), w = x.width(), plane = h * w;
    if (weight_re.dim() != 3 || weight_re.shape() != weight_im.shape() || weight_re.size(0) != c) {
        throw std::invalid_argument("spectral_filter: weight parts must both be [" + std::to_string(c) +
                                    " x S x S], got " + shape_str(weight_re.shape()) + " and " +
                                    shape_str(weight_im.shape()));
    }
    if (bias.numel() != c) throw std::invalid_argument("spectral_filter: bias must have " + std::to_string(c) + " entries");
    auto fit = [h, w](const Tensor& t) {
        return t.size(1) == h && t.size(2) == w ? t : bilinear_resize(t, h, w);
    };
    const Tensor wr = fit(weight_re);
    const Tensor wi = fit(weight_im);

    const auto xv = x.interleaved().data(), rv = wr.data(), iv = wi.data(), bv = bias.data();
    std::vector<double> out(2 * c * plane);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double* xr = xv.data() + 2 * ch * plane;
        const double* xi = xr + plane;
        const double* ar = rv.data() + ch * plane;
        const double* ai = iv.data() + ch * plane;
        double* o_re = out.data() + 2 * ch * plane;
        double* o_im = o_re + plane;
        for (std::size_t i = 0; i < plane; ++i) {
            o_re[i] = ar[i] * xr[i] - ai[i] * xi[i] + bv[ch];
            o_im[i] = ar[i] * xi[i] + ai[i] * xr[i];
        }
    }
    auto backward = [c, plane](Node& self) {
        const auto& xv = self.inputs[0]->data;
        const auto& rv = self.inputs[1]->data;
        const auto& iv = self.inputs[2]->data;
        auto* gx = input_grad(self, 0);
        auto* gr = input_grad(self, 1);
        auto* gi = input_grad(self, 2);
        auto* gb = input_grad(self, 3);
        const auto& g = self.grad;
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t re0 = 2 * ch * plane, im0 = re0 + plane, w0 = ch * plane;
            double bias_acc = 0.0;
            for (std::size_t i = 0; i < plane; ++i) {
                const double g_re = g[re0 + i], g_im = g[im0 + i];
                const double xr = xv[re0 + i], xi = xv[im0 + i];
                const double ar = rv[w0 + i], ai = iv[w0 + i];
                if (gx) {
                    (*gx)[re0 + i] += ar * g_re + ai * g_im;
                    (*gx)[im0 + i] += -ai * g_re + ar * g_im;
                }
                if (gr) (*gr)[w0 + i] += xr * g_re + xi * g_im;
                if (gi) (*gi)[w0 + i] += -xi * g_re + xr * g_im;
                bias_acc += g_re;
            }
            if (gb) (*gb)[ch] += bias_acc;
        }
    };
    return ComplexPlane(make_result({2 * c, h, w}, std::move(out), {x.interleaved(), wr, wi, bias}, backward,
                                    "spectral_filter"));
}

ComplexPlane spectral_filter(const ComplexPlane& x, const ComplexPlane& weight, const Tensor& bias) {
    return spectral_filter(x, weight.re(), weight.im(), bias);
}

Tensor band_swap(const Tensor& rainy, const Tensor& clean, const MeshIndex& mesh, std::size_t low_bands) {
    if (rainy.shape() != clean.shape() || rainy.dim() != 3) {
        throw std::invalid_argument("band_swap: images must share a [C x H x W] shape: " + shape_str(rainy.shape()) +
                                    " vs " + shape_str(clean.shape()));
    }
    if (rainy.size(1) != mesh.height || rainy.size(2) != mesh.width) {
        throw std::invalid_argument("band_swap: mesh index built for a different extent");
    }
    if (low_bands > mesh.bands) throw std::invalid_argument("band_swap: low_bands exceeds band count");
    NoGradGuard no_grad;
    const std::size_t c = rainy.size(0), h = mesh.height, w = mesh.width, plane = h * w;
    auto spec_r = transform_planes(rainy.data(), c, h, w, false, 1.0, true);
    const auto spec_c = transform_planes(clean.data(), c, h, w, false, 1.0, true);
    const std::size_t first = (mesh.bands - low_bands) * mesh.band_length();
    for (std::size_t ch = 0; ch < 2 * c; ++ch)
        for (std::size_t j = first; j < plane; ++j) spec_r[ch * plane + mesh.perm[j]] = spec_c[ch * plane + mesh.perm[j]];
    const auto back = transform_planes(spec_r, c, h, w, true, 1.0 / static_cast<double>(plane), false);
    std::vector<double> out(c * plane);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < plane; ++i) out[ch * plane + i] = std::clamp(back[2 * ch * plane + i], 0.0, 1.0);
    return Tensor::from(rainy.shape(), std::move(out));
}

Tensor band_limit(const Tensor& x, const MeshIndex& mesh, std::size_t low_bands) {
    if (x.dim() != 3 || x.size(1) != mesh.height || x.size(2) != mesh.width) {
        throw std::invalid_argument("band_limit: input " + shape_str(x.shape()) + " does not match the mesh index");
    }
    if (low_bands > mesh.bands) throw std::invalid_argument("band_limit: low_bands exceeds band count");
    NoGradGuard no_grad;
    const std::size_t c = x.size(0), plane = mesh.length();
    auto spec = transform_planes(x.data(), c, mesh.height, mesh.width, false, 1.0, true);
    const std::size_t keep_from = (mesh.bands - low_bands) * mesh.band_length();
    std::vector<bool> keep(plane, false);
    for (std::size_t j = keep_from; j < plane; ++j) keep[mesh.perm[j]] = true;
    // A tie class of equal magnitude can straddle the band edge and split a
    // conjugate pair. Dropping unpaired bins keeps the result real.
    std::vector<bool> paired(plane, false);
    for (std::size_t u = 0; u < mesh.height; ++u) {
        for (std::size_t v = 0; v < mesh.width; ++v) {
            const std::size_t mirror = ((mesh.height - u) % mesh.height) * mesh.width + (mesh.width - v) % mesh.width;
            paired[u * mesh.width + v] = keep[u * mesh.width + v] && keep[mirror];
        }
    }
    for (std::size_t ch = 0; ch < 2 * c; ++ch)
        for (std::size_t i = 0; i < plane; ++i)
            if (!paired[i]) spec[ch * plane + i] = 0.0;
    const auto back = transform_planes(spec, c, mesh.height, mesh.width, true, 1.0 / static_cast<double>(plane), false);
    std::vector<double> out(c * plane);
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < plane; ++i) out[ch * plane + i] = back[2 * ch * plane + i];
    return Tensor::from(x.shape(), std::move(out));
}

std::vector<double> band_l1_mass(const Tensor& x, const MeshIndex& mesh) {
    if (x.dim() != 3 || x.size(1) != mesh.height || x.size(2) != mesh.width) {
        throw std::invalid_argument("band_l1_mass: input " + shape_str(x.shape()) + " does not match the mesh index");
    }
    const std::size_t c = x.size(0), plane = mesh.length();
    const auto spec = transform_planes(x.data(), c, mesh.height, mesh.width, false, 1.0, true);
    std::vector<double> mass(mesh.bands, 0.0);
    for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t j = 0; j < plane; ++j) {
            const std::size_t pos = mesh.perm[j];
            mass[j / mesh.band_length()] += std::hypot(spec[2 * ch * plane + pos], spec[(2 * ch + 1) * plane + pos]);
        }
    }
    return mass;
}

}  // namespace transmamba
