#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace transmamba::fft {

using cplx = std::complex<double>;

/// Mixed-radix decimation-in-time plan for one transform length. Any length
/// is accepted; prime factors are handled by a direct butterfly, so the cost
/// is O(n * sum of prime factors).
class Plan {
public:
    explicit Plan(std::size_t n);

    std::size_t size() const { return n_; }
    const std::vector<std::size_t>& factors() const { return factors_; }

    /// Unnormalized transform in place. `inverse` flips the twiddle sign only.
    void execute(std::span<cplx> data, bool inverse) const;

private:
    void recurse(const cplx* in, std::size_t in_stride, cplx* out, std::size_t n, std::size_t level, bool inverse,
                 cplx* scratch) const;

    std::size_t n_;
    std::vector<std::size_t> factors_;
    std::vector<cplx> twiddle_;  // exp(-2*pi*i*k/n), k < n
};

/// Process-wide plan cache (thread-safe).
std::shared_ptr<const Plan> plan_for(std::size_t n);

/// 2D transform of one row-major H x W plane in place, unnormalized.
void transform_2d(std::span<cplx> plane, std::size_t height, std::size_t width, bool inverse);

/// O(n^2) reference used by tests and for tiny lengths.
std::vector<cplx> naive_dft(std::span<const cplx> x, bool inverse);

}  // namespace transmamba::fft
