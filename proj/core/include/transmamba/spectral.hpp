#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <vector>

#include "transmamba/tensor.hpp"

namespace transmamba {

/// Complex spectrum of a [C x H x W] feature map.
///
/// Stored interleaved as one real [2C x H x W] tensor: channel 2c holds the
/// real part of channel c and channel 2c+1 its imaginary part. That layout is
/// exactly the complex-to-real view, so C2R/R2C are free.
class ComplexPlane {
public:
    ComplexPlane() = default;
    explicit ComplexPlane(Tensor interleaved);
    static ComplexPlane from_parts(const Tensor& re, const Tensor& im);

    std::size_t channels() const { return packed_.size(0) / 2; }
    std::size_t height() const { return packed_.size(1); }
    std::size_t width() const { return packed_.size(2); }

    Tensor re() const;
    Tensor im() const;
    const Tensor& interleaved() const { return packed_; }

private:
    Tensor packed_;
};

/// Unnormalized 2D DFT of every channel.
ComplexPlane fft2(const Tensor& x);
ComplexPlane fft2(const ComplexPlane& x);
/// Inverse 2D DFT including the 1/(H*W) factor.
ComplexPlane ifft2(const ComplexPlane& x);

/// [C x H x W] complex -> [2C x H x W] real (re at 2c, im at 2c+1).
Tensor complex_to_real(const ComplexPlane& x);
/// Inverse of complex_to_real; the leading extent must be even.
ComplexPlane real_to_complex(const Tensor& x);

/// |z| per coefficient, [C x H x W]. The gradient at z = 0 is taken as 0.
Tensor complex_abs(const ComplexPlane& x);

/// Wrap-around frequency magnitude of unshifted DFT bin (u, v).
double frequency_magnitude(std::size_t u, std::size_t v, std::size_t height, std::size_t width);

/// Spectral positions ranked from highest to lowest frequency, cut into
/// `bands` equal runs. Band 0 holds the highest frequencies; DC is last.
struct MeshIndex {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t bands = 1;
    std::vector<std::size_t> perm;

    static MeshIndex build(std::size_t height, std::size_t width, std::size_t bands);

    std::size_t length() const { return height * width; }
    std::size_t band_length() const { return length() / bands; }
    /// Flat positions of band `band` in rank order.
    std::vector<std::size_t> band_positions(std::size_t band) const;
};

/// Thread-safe lazily populated (H, W, b) -> MeshIndex map.
class MeshIndexCache {
public:
    std::shared_ptr<const MeshIndex> get(std::size_t height, std::size_t width, std::size_t bands);

private:
    std::mutex mu_;
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::shared_ptr<const MeshIndex>> entries_;
};

/// [C x HW] -> [C*b x HW/b]: gather by rank, then fold bands onto channels
/// (band index fastest within a channel's block).
Tensor band_reorganize(const Tensor& x, const MeshIndex& mesh);
/// Exact inverse of band_reorganize.
Tensor band_restore(const Tensor& x, const MeshIndex& mesh);

/// Complex weight (bilinearly resized to the input's extent) times x, plus a
/// real per-channel bias on the real part.
ComplexPlane spectral_filter(const ComplexPlane& x, const ComplexPlane& weight, const Tensor& bias);
/// Same, with the weight given as separate [C x S x S] real and imaginary parts.
ComplexPlane spectral_filter(const ComplexPlane& x, const Tensor& weight_re, const Tensor& weight_im,
                             const Tensor& bias);

/// Replaces the `low_bands` lowest-frequency bands of `rainy`'s spectrum by
/// `clean`'s and returns the real part of the inverse transform in [0, 1].
Tensor band_swap(const Tensor& rainy, const Tensor& clean, const MeshIndex& mesh, std::size_t low_bands);

/// Keeps only the `low_bands` lowest-frequency bands of every channel's
/// spectrum (zeroing the rest) and returns the real inverse transform. Bins
/// whose conjugate partner falls outside the kept bands are dropped too, so
/// the output's spectrum lies entirely inside them.
Tensor band_limit(const Tensor& x, const MeshIndex& mesh, std::size_t low_bands);

/// Sum of |fft2(x)| over all channels, split by band (index 0 = highest).
std::vector<double> band_l1_mass(const Tensor& x, const MeshIndex& mesh);

}  // namespace transmamba
