#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "transmamba/network.hpp"
#include "transmamba/rng.hpp"
#include "transmamba/tensor.hpp"

namespace transmamba {

struct RainPair {
    Tensor rainy;  // [3 x H x W] in [0, 1]
    Tensor clean;
    std::string id;
};

/// Closed range [lo, hi].
struct Range {
    double lo = 0;
    double hi = 0;
};

/// Streak statistics. Every streak draws its parameters uniformly from these
/// ranges; the angle is measured from vertical in degrees.
struct RainRecipe {
    Range streak_count{8, 16};
    Range length{14, 30};
    Range angle{-20, 20};
    Range width{1.5, 3.0};
    Range intensity{0.25, 0.5};
    std::uint64_t seed = 1;

    void validate() const;
    /// Reads `rain.*` keys (ranges are written "lo,hi").
    void apply(const KeyValues& kv);
    KeyValues to_key_values() const;
};

/// Non-negative streak field S, [1 x H x W]. Each streak is a segment with a
/// Gaussian cross-section and smooth end tapers.
Tensor streak_field(std::size_t height, std::size_t width, const RainRecipe& recipe);

/// rainy = clamp(clean + S) with S broadcast over colour channels.
RainPair compose_rain(const Tensor& clean, const Tensor& field, std::string id = {});

/// streak_field followed by compose_rain.
RainPair synthesize_rain(const Tensor& clean, const RainRecipe& recipe, std::string id = {});

/// Smooth procedural scene: colour gradient, a few soft shapes and mild noise,
/// values inside [0.05, 0.7].
Tensor procedural_clean(std::size_t height, std::size_t width, std::uint64_t seed);

/// Seed of dataset item `index` derived from a base seed (SplitMix64 finaliser).
std::uint64_t item_seed(std::uint64_t base, std::uint64_t index);

/// Clean image and rain for item `index`, fully determined by (base seed, index).
RainPair synthetic_pair(std::size_t size, const RainRecipe& recipe, std::uint64_t index);

/// Same-position square crop of both images.
RainPair random_patch(const RainPair& pair, std::size_t size, Rng& rng);
/// Independent horizontal and vertical flips, each with probability 1/2, applied to both images.
RainPair flip_augment(const RainPair& pair, Rng& rng);

/// Pairs `rain_dir/NAME` with `clean_dir/NAME` for every .png/.ppm NAME, sorted by name.
std::vector<RainPair> load_paired_folder(const std::filesystem::path& rain_dir, const std::filesystem::path& clean_dir);

/// Writes `count` synthetic pairs as root/{rain,clean}/NNNN.png.
void write_synthetic_dataset(const std::filesystem::path& root, std::size_t count, std::size_t size,
                             const RainRecipe& recipe);

}  // namespace transmamba
