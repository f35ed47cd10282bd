#include "transmamba/attention.hpp"

#include <cmath>
#include <stdexcept>

#include "transmamba/ops.hpp"

namespace transmamba {

std::size_t seff_hidden_channels(std::size_t channels, double ratio) {
    const auto hidden = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(channels)));
    if (hidden == 0) throw std::invalid_argument("SEFF expansion ratio yields zero hidden channels");
    return hidden;
}

SeffParams make_seff_params(ParamSource& src, const std::string& prefix, std::size_t channels, double ratio,
                            std::size_t weight_size) {
    SeffParams p;
    p.channels = channels;
    p.hidden = seff_hidden_channels(channels, ratio);
    const std::size_t h = p.hidden;
    p.expand_pointwise = src.get(prefix + ".expand", {2 * h, channels, 1, 1}, Init::kaiming_uniform);
    p.dw_plain = src.get(prefix + ".dw_plain", {h, 1, 3, 3}, Init::kaiming_uniform);
    p.dw_dilated = src.get(prefix + ".dw_dilated", {h, 1, 3, 3}, Init::kaiming_uniform);
    p.w1_re = src.get(prefix + ".w1.re", {h, weight_size, weight_size}, Init::spectral_real);
    p.w1_im = src.get(prefix + ".w1.im", {h, weight_size, weight_size}, Init::spectral_imag);
    p.w2_re = src.get(prefix + ".w2.re", {h, weight_size, weight_size}, Init::spectral_real);
    p.w2_im = src.get(prefix + ".w2.im", {h, weight_size, weight_size}, Init::spectral_imag);
    p.b1 = src.get(prefix + ".b1", {h}, Init::zeros);
    p.b2 = src.get(prefix + ".b2", {h}, Init::zeros);
    p.out_pointwise = src.get(prefix + ".out", {channels, h, 1, 1}, Init::kaiming_uniform);
    return p;
}

SdtbParams make_sdtb_params(ParamSource& src, const std::string& prefix, std::size_t channels, std::size_t heads,
                            std::size_t bands, double ratio, std::size_t weight_size) {
    if (heads == 0 || (2 * channels * bands) % heads != 0) {
        throw std::invalid_argument(prefix + ": heads (" + std::to_string(heads) + ") must divide 2*C*b = " +
                                    std::to_string(2 * channels * bands));
    }
    SdtbParams p;
    p.channels = channels;
    p.heads = heads;
    p.bands = bands;
    p.ln1_gamma = src.get(prefix + ".ln1.gamma", {channels}, Init::ones);
    p.ln1_beta = src.get(prefix + ".ln1.beta", {channels}, Init::zeros);
    p.qkv_pointwise = src.get(prefix + ".sbsa.qkv", {3 * channels, channels, 1, 1}, Init::kaiming_uniform);
    p.qkv_depthwise = src.get(prefix + ".sbsa.qkv_dw", {3 * channels, 1, 3, 3}, Init::kaiming_uniform);
    p.attn_out_pointwise = src.get(prefix + ".sbsa.out", {channels, channels, 1, 1}, Init::kaiming_uniform);
    p.ln2_gamma = src.get(prefix + ".ln2.gamma", {channels}, Init::ones);
    p.ln2_beta = src.get(prefix + ".ln2.beta", {channels}, Init::zeros);
    p.seff = make_seff_params(src, prefix + ".seff", channels, ratio, weight_size);
    return p;
}

namespace {

// [C x H x W] spatial map -> [heads x rows x HW/b] banded spectral tokens.
Tensor spectral_tokens(const Tensor& x, const MeshIndex& mesh, std::size_t heads) {
    const std::size_t c = x.size(0);
    const Tensor spec = complex_to_real(fft2(x));                      // [2C x H x W]
    const Tensor flat = reshape(spec, {2 * c, mesh.length()});         // [2C x HW]
    const Tensor banded = band_reorganize(flat, mesh);                 // [2Cb x HW/b]
    const std::size_t rows = 2 * c * mesh.bands / heads;
    return reshape(banded, {heads, rows, mesh.band_length()});
}

}  // namespace

Tensor sbsa_forward(const Tensor& features, const SdtbParams& p, const MeshIndex& mesh, ScaleMode scale,
                    AttentionProbe* probe) {
    if (features.dim() != 3 || features.size(0) != p.channels) {
        throw std::invalid_argument("sbsa: expected [" + std::to_string(p.channels) + " x H x W], got " +
                                    shape_str(features.shape()));
    }
    const std::size_t c = p.channels, h = features.size(1), w = features.size(2);
    if (mesh.height != h || mesh.width != w || mesh.bands != p.bands) {
        throw std::invalid_argument("sbsa: mesh index (" + std::to_string(mesh.height) + "x" + std::to_string(mesh.width) +
                                    ", b=" + std::to_string(mesh.bands) + ") does not match input " +
                                    shape_str(features.shape()) + " with b=" + std::to_string(p.bands));
    }
    const Tensor qkv = conv2d_same(conv2d_same(features, p.qkv_pointwise), p.qkv_depthwise, 1, 3 * c);
    const Tensor q = spectral_tokens(narrow(qkv, 0, 0, c), mesh, p.heads);
    const Tensor k = spectral_tokens(narrow(qkv, 0, c, c), mesh, p.heads);
    const Tensor v = spectral_tokens(narrow(qkv, 0, 2 * c, c), mesh, p.heads);

    const double denom = scale == ScaleMode::heads ? static_cast<double>(p.heads)
                                                   : static_cast<double>(mesh.band_length());
    const Tensor attn = softmax(transmamba::scale(matmul(q, k, true), 1.0 / std::sqrt(denom)), 2);
    if (probe) probe->maps.push_back(attn.detach());

    const Tensor mixed = reshape(matmul(attn, v), {2 * c * mesh.bands, mesh.band_length()});
    const Tensor restored = reshape(band_restore(mixed, mesh), {2 * c, h, w});
    const Tensor spatial = ifft2(real_to_complex(restored)).re();
    return conv2d_same(spatial, p.attn_out_pointwise);
}

Tensor seff_forward(const Tensor& features, const SeffParams& p) {
    if (features.dim() != 3 || features.size(0) != p.channels) {
        throw std::invalid_argument("seff: expected [" + std::to_string(p.channels) + " x H x W], got " +
                                    shape_str(features.shape()));
    }
    const std::size_t hid = p.hidden;
    const Tensor expanded = conv2d_same(features, p.expand_pointwise);
    const Tensor f1 = conv2d_same(narrow(expanded, 0, 0, hid), p.dw_plain, 1, hid);
    const Tensor f2 = conv2d_same(narrow(expanded, 0, hid, hid), p.dw_dilated, 2, hid);
    const Tensor g1 = ifft2(spectral_filter(fft2(f1), p.w1_re, p.w1_im, p.b1)).re();
    const Tensor g2 = ifft2(spectral_filter(fft2(f2), p.w2_re, p.w2_im, p.b2)).re();
    return conv2d_same(mul(silu(g2), g1), p.out_pointwise);
}

Tensor sdtb_forward(const Tensor& features, const SdtbParams& p, const MeshIndex& mesh, ScaleMode scale,
                    AttentionProbe* probe) {
    Tensor x = add(features, sbsa_forward(layer_norm(features, p.ln1_gamma, p.ln1_beta), p, mesh, scale, probe));
    return add(x, seff_forward(layer_norm(x, p.ln2_gamma, p.ln2_beta), p.seff));
}

}  // namespace transmamba
