#include "transmamba/rain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "transmamba/image_io.hpp"
#include "transmamba/ops.hpp"

namespace transmamba {

namespace {

double draw(Rng& rng, const Range& r) { return r.hi > r.lo ? rng.uniform(r.lo, r.hi) : r.lo; }

Range parse_range(const std::string& key, const std::string& value) {
    const auto comma = value.find(',');
    try {
        if (comma == std::string::npos) {
            const double v = std::stod(value);
            return {v, v};
        }
        return {std::stod(value.substr(0, comma)), std::stod(value.substr(comma + 1))};
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': expected 'lo,hi', got '" + value + "'");
    }
}

std::string format_range(const Range& r) {
    std::ostringstream os;
    os.precision(17);
    os << r.lo << "," << r.hi;
    return os.str();
}

double smoothstep(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3 - 2 * t);
}

}  // namespace

void RainRecipe::validate() const {
    auto check = [](const char* name, const Range& r) {
        if (!(r.lo <= r.hi)) throw std::invalid_argument(std::string("rain recipe: empty range for ") + name);
    };
    check("streak_count", streak_count);
    check("length", length);
    check("angle", angle);
    check("width", width);
    check("intensity", intensity);
    if (streak_count.lo < 0) throw std::invalid_argument("rain recipe: streak_count must be non-negative");
    if (length.lo <= 0 || width.lo <= 0) throw std::invalid_argument("rain recipe: length and width must be positive");
    if (intensity.lo <= 0 || intensity.hi > 1) throw std::invalid_argument("rain recipe: intensity must lie in (0, 1]");
}

void RainRecipe::apply(const KeyValues& kv) {
    auto range = [&](const char* key, Range& dst) {
        if (auto it = kv.find(key); it != kv.end()) dst = parse_range(key, it->second);
    };
    range("rain.streak_count", streak_count);
    range("rain.length", length);
    range("rain.angle", angle);
    range("rain.width", width);
    range("rain.intensity", intensity);
    if (auto it = kv.find("rain.seed"); it != kv.end()) {
        try {
            seed = std::stoull(it->second);
        } catch (const std::exception&) {
            throw std::invalid_argument("config key 'rain.seed': expected an integer, got '" + it->second + "'");
        }
    }
    validate();
}

KeyValues RainRecipe::to_key_values() const {
    return {
        {"rain.streak_count", format_range(streak_count)}, {"rain.length", format_range(length)},
        {"rain.angle", format_range(angle)},               {"rain.width", format_range(width)},
        {"rain.intensity", format_range(intensity)},       {"rain.seed", std::to_string(seed)},
    };
}

Tensor streak_field(std::size_t height, std::size_t width, const RainRecipe& recipe) {
    recipe.validate();
    Rng rng(recipe.seed);
    const auto lo = static_cast<std::size_t>(std::ceil(recipe.streak_count.lo));
    const auto hi = static_cast<std::size_t>(std::floor(recipe.streak_count.hi));
    const std::size_t count = hi > lo ? lo + rng.below(hi - lo + 1) : lo;
    std::vector<double> s(height * width, 0.0);
    for (std::size_t k = 0; k < count; ++k) {
        const double cx = rng.uniform(0.0, static_cast<double>(width));
        const double cy = rng.uniform(0.0, static_cast<double>(height));
        const double len = draw(rng, recipe.length);
        const double theta = draw(rng, recipe.angle) * std::numbers::pi / 180.0;
        const double wid = draw(rng, recipe.width);
        const double amp = draw(rng, recipe.intensity);
        // unit vector along the streak (vertical at theta = 0) and its normal
        const double ux = std::sin(theta), uy = std::cos(theta);
        const double sigma = wid / 2.0;
        const double taper = std::max(1.0, 0.25 * len);
        const double reach = 0.5 * len + 3 * sigma;
        const auto x0 = static_cast<long>(std::floor(cx - reach)), x1 = static_cast<long>(std::ceil(cx + reach));
        const auto y0 = static_cast<long>(std::floor(cy - reach)), y1 = static_cast<long>(std::ceil(cy + reach));
        for (long y = std::max(0L, y0); y <= std::min<long>(static_cast<long>(height) - 1, y1); ++y) {
            for (long x = std::max(0L, x0); x <= std::min<long>(static_cast<long>(width) - 1, x1); ++x) {
                const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
                const double along = dx * ux + dy * uy;
                const double across = dx * uy - dy * ux;
                const double ends = smoothstep((0.5 * len - std::abs(along)) / taper);
                if (ends <= 0) continue;
                s[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)] +=
                    amp * ends * std::exp(-across * across / (2 * sigma * sigma));
            }
        }
    }
    return Tensor::from({1, height, width}, std::move(s));
}

RainPair compose_rain(const Tensor& clean, const Tensor& field, std::string id) {
    if (clean.dim() != 3 || clean.size(0) != 3) {
        throw std::invalid_argument("compose_rain: clean must be [3 x H x W], got " + shape_str(clean.shape()));
    }
    if (field.dim() != 3 || field.size(1) != clean.size(1) || field.size(2) != clean.size(2)) {
        throw std::invalid_argument("compose_rain: field " + shape_str(field.shape()) + " does not match image " +
                                    shape_str(clean.shape()));
    }
    NoGradGuard no_grad;
    return {clamp(add(clean, field), 0.0, 1.0), clean.detach(), std::move(id)};
}

RainPair synthesize_rain(const Tensor& clean, const RainRecipe& recipe, std::string id) {
    return compose_rain(clean, streak_field(clean.size(1), clean.size(2), recipe), std::move(id));
}

Tensor procedural_clean(std::size_t height, std::size_t width, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t plane = height * width;
    std::vector<double> img(3 * plane);
    double corner[4][3];
    for (auto& c : corner)
        for (auto& v : c) v = rng.uniform(0.1, 0.6);
    for (std::size_t y = 0; y < height; ++y) {
        const double fy = height > 1 ? static_cast<double>(y) / static_cast<double>(height - 1) : 0.0;
        for (std::size_t x = 0; x < width; ++x) {
            const double fx = width > 1 ? static_cast<double>(x) / static_cast<double>(width - 1) : 0.0;
            for (std::size_t c = 0; c < 3; ++c) {
                img[c * plane + y * width + x] = (1 - fy) * ((1 - fx) * corner[0][c] + fx * corner[1][c]) +
                                                 fy * ((1 - fx) * corner[2][c] + fx * corner[3][c]);
            }
        }
    }
    const std::size_t shapes = 3 + rng.below(4);
    for (std::size_t k = 0; k < shapes; ++k) {
        const double cx = rng.uniform(0.0, static_cast<double>(width));
        const double cy = rng.uniform(0.0, static_cast<double>(height));
        const double radius = rng.uniform(0.1, 0.3) * static_cast<double>(std::min(height, width));
        const bool disc = rng.coin();
        double colour[3];
        for (auto& v : colour) v = rng.uniform(0.05, 0.7);
        for (std::size_t y = 0; y < height; ++y) {
            for (std::size_t x = 0; x < width; ++x) {
                const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
                const double dist = disc ? std::hypot(dx, dy) : std::max(std::abs(dx), std::abs(dy));
                const double cover = smoothstep((radius - dist) / 1.5 + 0.5);
                for (std::size_t c = 0; c < 3; ++c) {
                    double& px = img[c * plane + y * width + x];
                    px = (1 - cover) * px + cover * colour[c];
                }
            }
        }
    }
    for (auto& v : img) v = std::clamp(v + 0.01 * rng.normal(), 0.05, 0.7);
    return Tensor::from({3, height, width}, std::move(img));
}

std::uint64_t item_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

RainPair synthetic_pair(std::size_t size, const RainRecipe& recipe, std::uint64_t index) {
    const std::uint64_t s = item_seed(recipe.seed, index);
    RainRecipe item = recipe;
    item.seed = item_seed(s, 1);
    char id[16];
    std::snprintf(id, sizeof id, "%04llu", static_cast<unsigned long long>(index));
    return synthesize_rain(procedural_clean(size, size, s), item, id);
}

RainPair random_patch(const RainPair& pair, std::size_t size, Rng& rng) {
    const std::size_t h = pair.rainy.size(1), w = pair.rainy.size(2);
    if (size == 0 || size > h || size > w) {
        throw std::invalid_argument("random_patch: size " + std::to_string(size) + " exceeds image " +
                                    std::to_string(h) + "x" + std::to_string(w));
    }
    const std::size_t top = rng.below(h - size + 1);
    const std::size_t left = rng.below(w - size + 1);
    NoGradGuard no_grad;
    auto crop = [&](const Tensor& t) { return narrow(narrow(t, 1, top, size), 2, left, size); };
    return {crop(pair.rainy), crop(pair.clean), pair.id};
}

RainPair flip_augment(const RainPair& pair, Rng& rng) {
    const bool horizontal = rng.coin();
    const bool vertical = rng.coin();
    NoGradGuard no_grad;
    auto apply = [&](Tensor t) {
        if (horizontal) t = flip(t, 2);
        if (vertical) t = flip(t, 1);
        return t;
    };
    return {apply(pair.rainy), apply(pair.clean), pair.id};
}

std::vector<RainPair> load_paired_folder(const std::filesystem::path& rain_dir, const std::filesystem::path& clean_dir) {
    namespace fs = std::filesystem;
    for (const auto& dir : {rain_dir, clean_dir}) {
        if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
    }
    auto list = [](const fs::path& dir) {
        std::vector<std::string> names;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && is_image_path(e.path())) names.push_back(e.path().filename().string());
        std::sort(names.begin(), names.end());
        return names;
    };
    const auto rain_names = list(rain_dir);
    const auto clean_names = list(clean_dir);
    for (const auto& n : clean_names) {
        if (!std::binary_search(rain_names.begin(), rain_names.end(), n)) {
            throw std::runtime_error("missing rainy counterpart for " + (clean_dir / n).string() + ": expected " +
                                     (rain_dir / n).string());
        }
    }
    std::vector<RainPair> pairs;
    for (const auto& n : rain_names) {
        if (!std::binary_search(clean_names.begin(), clean_names.end(), n)) {
            throw std::runtime_error("missing clean counterpart for " + (rain_dir / n).string() + ": expected " +
                                     (clean_dir / n).string());
        }
        RainPair p{load_image(rain_dir / n), load_image(clean_dir / n), fs::path(n).stem().string()};
        if (p.rainy.shape() != p.clean.shape()) {
            throw std::runtime_error("size mismatch between " + (rain_dir / n).string() + " and " +
                                     (clean_dir / n).string());
        }
        pairs.push_back(std::move(p));
    }
    return pairs;
}

void write_synthetic_dataset(const std::filesystem::path& root, std::size_t count, std::size_t size,
                             const RainRecipe& recipe) {
    namespace fs = std::filesystem;
    fs::create_directories(root / "rain");
    fs::create_directories(root / "clean");
    for (std::size_t i = 0; i < count; ++i) {
        const auto pair = synthetic_pair(size, recipe, i);
        save_image(root / "rain" / (pair.id + ".png"), pair.rainy);
        save_image(root / "clean" / (pair.id + ".png"), pair.clean);
    }
}

}  // namespace transmamba
