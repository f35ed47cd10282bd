#include "transmamba/fft.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace transmamba::fft {

namespace {

std::vector<std::size_t> factorize(std::size_t n) {
    std::vector<std::size_t> f;
    // radix 4 first keeps the recursion shallow for powers of two
    while (n % 4 == 0) {
        f.push_back(4);
        n /= 4;
    }
    for (std::size_t p = 2; p * p <= n; ++p) {
        while (n % p == 0) {
            f.push_back(p);
            n /= p;
        }
    }
    if (n > 1) f.push_back(n);
    return f;
}

}  // namespace

Plan::Plan(std::size_t n) : n_(n) {
    if (n == 0) throw std::invalid_argument("fft::Plan: length must be positive");
    factors_ = factorize(n);
    twiddle_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        twiddle_[k] = {std::cos(angle), std::sin(angle)};
    }
}

void Plan::recurse(const cplx* in, std::size_t in_stride, cplx* out, std::size_t n, std::size_t level, bool inverse,
                   cplx* scratch) const {
    if (n == 1) {
        out[0] = in[0];
        return;
    }
    const std::size_t p = factors_[level];
    const std::size_t m = n / p;
    // sub-transforms of the p decimated sequences x[q + p*r]
    for (std::size_t q = 0; q < p; ++q) recurse(in + q * in_stride, in_stride * p, out + q * m, m, level + 1, inverse, scratch);

    const std::size_t step = n_ / n;  // W_n^e == twiddle_[e * step], e * step < n_ below
    auto w = [&](std::size_t e) {
        const cplx t = twiddle_[e * step];
        return inverse ? std::conj(t) : t;
    };
    if (p == 2) {
        for (std::size_t k = 0; k < m; ++k) {
            const cplx a0 = out[k], a1 = out[m + k] * w(k);
            out[k] = a0 + a1;
            out[m + k] = a0 - a1;
        }
        return;
    }
    if (p == 4) {
        // multiplying by -i (forward) or +i (inverse), the quarter-turn twiddle
        auto rot = [inverse](cplx z) { return inverse ? cplx(-z.imag(), z.real()) : cplx(z.imag(), -z.real()); };
        for (std::size_t k = 0; k < m; ++k) {
            const cplx a0 = out[k], a1 = out[m + k] * w(k), a2 = out[2 * m + k] * w(2 * k),
                       a3 = out[3 * m + k] * w(3 * k);
            const cplx s02 = a0 + a2, d02 = a0 - a2, s13 = a1 + a3, d13 = rot(a1 - a3);
            out[k] = s02 + s13;
            out[m + k] = d02 + d13;
            out[2 * m + k] = s02 - s13;
            out[3 * m + k] = d02 - d13;
        }
        return;
    }
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t q = 0; q < p; ++q) scratch[q] = out[q * m + k] * w(q * k);
        for (std::size_t s = 0; s < p; ++s) {
            cplx acc = scratch[0];
            // W_p^{qs} as a power of the length-n root; reduced mod n to stay in the table
            for (std::size_t q = 1; q < p; ++q) acc += scratch[q] * w((q * s % p) * m);
            out[s * m + k] = acc;
        }
    }
}

void Plan::execute(std::span<cplx> data, bool inverse) const {
    if (data.size() != n_) throw std::invalid_argument("fft::Plan::execute: length mismatch");
    if (n_ == 1) return;
    thread_local std::vector<cplx> input;
    thread_local std::vector<cplx> scratch;
    input.assign(data.begin(), data.end());
    std::size_t max_radix = 1;
    for (auto f : factors_) max_radix = std::max(max_radix, f);
    if (scratch.size() < max_radix) scratch.resize(max_radix);
    recurse(input.data(), 1, data.data(), n_, 0, inverse, scratch.data());
}

std::shared_ptr<const Plan> plan_for(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, std::shared_ptr<const Plan>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[n];
    if (!slot) slot = std::make_shared<const Plan>(n);
    return slot;
}

void transform_2d(std::span<cplx> plane, std::size_t height, std::size_t width, bool inverse) {
    if (plane.size() != height * width) throw std::invalid_argument("fft::transform_2d: plane size mismatch");
    const auto rows = plan_for(width);
    const auto cols = plan_for(height);
    for (std::size_t y = 0; y < height; ++y) rows->execute(plane.subspan(y * width, width), inverse);
    thread_local std::vector<cplx> column;
    column.resize(height);
    for (std::size_t x = 0; x < width; ++x) {
        for (std::size_t y = 0; y < height; ++y) column[y] = plane[y * width + x];
        cols->execute(column, inverse);
        for (std::size_t y = 0; y < height; ++y) plane[y * width + x] = column[y];
    }
}

std::vector<cplx> naive_dft(std::span<const cplx> x, bool inverse) {
    const std::size_t n = x.size();
    const double sign = inverse ? 2.0 : -2.0;
    std::vector<cplx> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        cplx acc = 0;
        for (std::size_t j = 0; j < n; ++j) {
            const double angle = sign * std::numbers::pi * static_cast<double>((j * k) % n) / static_cast<double>(n);
            acc += x[j] * cplx(std::cos(angle), std::sin(angle));
        }
        out[k] = acc;
    }
    return out;
}

}  // namespace transmamba::fft
