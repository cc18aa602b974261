#pragma once

// Shared fixtures: deterministic probe images and a central-difference gradient oracle.

#include <cmath>
#include <functional>
#include <vector>

#include "facelock/facelock.hpp"

namespace facelock::fixtures {

// Smooth random image: a few random sinusoids per channel, squashed into [0.05, 0.95].
inline ImageTensor probe_image(std::uint64_t seed, int size = 32) {
    RngState rng(seed, "probe");
    ImageTensor x(size, size);
    for (int c = 0; c < 3; ++c) {
        double fy[3], fx[3], ph[3], amp[3];
        for (int k = 0; k < 3; ++k) {
            fy[k] = rng.uniform(0.05, 0.6);
            fx[k] = rng.uniform(0.05, 0.6);
            ph[k] = rng.uniform(0.0, 6.283);
            amp[k] = rng.uniform(0.3, 1.0);
        }
        const double bias = rng.uniform(-0.5, 0.5);
        for (int y = 0; y < size; ++y)
            for (int xx = 0; xx < size; ++xx) {
                double v = bias;
                for (int k = 0; k < 3; ++k) v += amp[k] * std::sin(fy[k] * y + fx[k] * xx + ph[k]);
                x.at(y, xx, c) = 0.05 + 0.9 / (1.0 + std::exp(-v));
            }
    }
    return x;
}

// Uniform noise in [lo, hi).
inline ImageTensor noise_image(std::uint64_t seed, int size = 32, double lo = 0.0, double hi = 1.0) {
    RngState rng(seed, "noise");
    ImageTensor x(size, size);
    for (double& v : x.values()) v = rng.uniform(lo, hi);
    return x;
}

struct PixelCheck {
    int y, x, c;
    double analytic;
    double numeric;
    double rel_error;
};

// Compares d f / d x at `count` random pixels against central differences with step h.
// `f` maps a CHW leaf to a scalar Var.
inline std::vector<PixelCheck> check_gradient(const std::function<ad::Var(const ad::Var&)>& f, const ImageTensor& x,
                                              int count, std::uint64_t seed, double h = 1e-4) {
    auto leaf = ad::Var::leaf(ad::from_image(x));
    const ad::Tensor g = ad::gradient(f(leaf), leaf);
    RngState rng(seed, "fd-pixels");
    std::vector<PixelCheck> out;
    for (int i = 0; i < count; ++i) {
        const int y = static_cast<int>(rng.index(x.height()));
        const int xx = static_cast<int>(rng.index(x.width()));
        const int c = static_cast<int>(rng.index(3));
        ad::Tensor plus = ad::from_image(x), minus = ad::from_image(x);
        plus.at(c, y, xx) += h;
        minus.at(c, y, xx) -= h;
        const double fp = f(ad::Var::constant(plus)).item();
        const double fm = f(ad::Var::constant(minus)).item();
        const double numeric = (fp - fm) / (2.0 * h);
        const double analytic = g.at(c, y, xx);
        const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        out.push_back({y, xx, c, analytic, numeric, std::abs(analytic - numeric) / scale});
    }
    return out;
}

}  // namespace facelock::fixtures
