#pragma once

// SSIM values from scikit-image 0.25 (structural_similarity with gaussian_weights=True,
// sigma=1.5, use_sample_covariance=False, data_range=1, channel_axis=2) on hash-generated
// pairs that are reproduced bit-for-bit below.

#include <array>
#include <cstdint>

#include "facelock/core.hpp"

namespace facelock::fixtures {

inline std::uint64_t splitmix64(std::uint64_t x) {
    std::uint64_t z = x + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline ImageTensor hash_image(std::uint64_t seed, int h, int w) {
    ImageTensor x(h, w);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(splitmix64(seed * 1000003 + i) % 256) / 255.0;
    return x;
}

struct SsimCase {
    int height, width;
    double blend;
    double expected;
};

inline constexpr std::array<SsimCase, 10> kSsimReference{{
    {16, 20, 0.0, 1.0},
    {19, 22, 0.1, 0.9885087805912304},
    {22, 24, 0.2, 0.9522060502868488},
    {25, 26, 0.30000000000000004, 0.8909462630118691},
    {28, 28, 0.4, 0.7978364331260771},
    {31, 30, 0.5, 0.6531532474001326},
    {34, 32, 0.6000000000000001, 0.5236341380636466},
    {37, 34, 0.7000000000000001, 0.34001361541700525},
    {40, 36, 0.8, 0.25380139421549497},
    {43, 38, 0.9, 0.09756993185154056},
}};

// Case k compares x with (1 - t) x + t y.
inline std::pair<ImageTensor, ImageTensor> ssim_pair(std::size_t k) {
    const auto& c = kSsimReference[k];
    auto x = hash_image(2 * k + 1, c.height, c.width);
    auto y = hash_image(2 * k + 2, c.height, c.width);
    ImageTensor b(c.height, c.width);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = (1 - c.blend) * x[i] + c.blend * y[i];
    return {x, b};
}

}  // namespace facelock::fixtures
