#include "transmamba/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace transmamba {

namespace {

std::string lower_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return ext;
}

Tensor from_rgb8(const std::vector<unsigned char>& rgb, std::size_t h, std::size_t w) {
    std::vector<double> data(3 * h * w);
    for (std::size_t i = 0; i < h * w; ++i)
        for (std::size_t c = 0; c < 3; ++c) data[c * h * w + i] = rgb[3 * i + c] / 255.0;
    return Tensor::from({3, h, w}, std::move(data));
}

std::vector<unsigned char> to_rgb8(const Tensor& image) {
    if (image.dim() != 3 || image.size(0) != 3) {
        throw std::invalid_argument("save_image: expected [3 x H x W], got " + shape_str(image.shape()));
    }
    const std::size_t plane = image.size(1) * image.size(2);
    const auto v = image.data();
    std::vector<unsigned char> rgb(3 * plane);
    for (std::size_t i = 0; i < plane; ++i)
        for (std::size_t c = 0; c < 3; ++c)
            rgb[3 * i + c] = static_cast<unsigned char>(std::lround(std::clamp(v[c * plane + i], 0.0, 1.0) * 255.0));
    return rgb;
}

Tensor load_png(const std::filesystem::path& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
        throw std::runtime_error("cannot decode PNG " + path.string() + ": " + img.message);
    }
    img.format = PNG_FORMAT_RGB;
    std::vector<unsigned char> rgb(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, rgb.data(), 0, nullptr)) {
        const std::string msg = img.message;
        png_image_free(&img);
        throw std::runtime_error("cannot decode PNG " + path.string() + ": " + msg);
    }
    return from_rgb8(rgb, img.height, img.width);
}

void save_png(const std::filesystem::path& path, const Tensor& image) {
    const auto rgb = to_rgb8(image);
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.size(2));
    img.height = static_cast<png_uint_32>(image.size(1));
    img.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.string().c_str(), 0, rgb.data(), 0, nullptr)) {
        throw std::runtime_error("cannot write PNG " + path.string() + ": " + img.message);
    }
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string ppm_token(std::istream& in, const std::filesystem::path& path) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    if (tok.empty()) throw std::runtime_error("cannot decode PPM " + path.string() + ": truncated header");
    return tok;
}

Tensor load_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    if (ppm_token(in, path) != "P6") throw std::runtime_error("cannot decode PPM " + path.string() + ": not a binary P6 file");
    std::size_t dims[3];
    for (auto& d : dims) {
        const auto tok = ppm_token(in, path);
        if (tok.find_first_not_of("0123456789") != std::string::npos || tok.size() > 9) {
            throw std::runtime_error("cannot decode PPM " + path.string() + ": bad header value '" + tok + "'");
        }
        d = std::stoul(tok);
    }
    const std::size_t w = dims[0], h = dims[1], maxval = dims[2];
    if (w == 0 || h == 0 || maxval == 0 || maxval > 255) {
        throw std::runtime_error("cannot decode PPM " + path.string() + ": unsupported dimensions or maxval");
    }
    std::vector<unsigned char> rgb(3 * w * h);
    if (!in.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()))) {
        throw std::runtime_error("cannot decode PPM " + path.string() + ": truncated pixel data");
    }
    if (maxval != 255) {
        for (auto& v : rgb) v = static_cast<unsigned char>(std::lround(std::min<double>(v, maxval) * 255.0 / maxval));
    }
    return from_rgb8(rgb, h, w);
}

void save_ppm(const std::filesystem::path& path, const Tensor& image) {
    const auto rgb = to_rgb8(image);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << "P6\n" << image.size(2) << " " << image.size(1) << "\n255\n";
    out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (!out.flush()) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

bool is_image_path(const std::filesystem::path& path) {
    const auto ext = lower_extension(path);
    return ext == ".png" || ext == ".ppm";
}

Tensor load_image(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) throw std::runtime_error("no such image file: " + path.string());
    const auto ext = lower_extension(path);
    if (ext == ".png") return load_png(path);
    if (ext == ".ppm") return load_ppm(path);
    throw std::runtime_error("unsupported image format (expected .png or .ppm): " + path.string());
}

void save_image(const std::filesystem::path& path, const Tensor& image) {
    const auto ext = lower_extension(path);
    if (ext == ".png") return save_png(path, image);
    if (ext == ".ppm") return save_ppm(path, image);
    throw std::runtime_error("unsupported image format (expected .png or .ppm): " + path.string());
}

}  // namespace transmamba
