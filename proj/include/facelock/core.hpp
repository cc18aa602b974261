#pragma once

// Pixel-space and perturbation-space primitives shared by every module.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace facelock {

class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Raised when a quantity is mathematically undefined (e.g. cosine of a zero vector).
class UndefinedValueError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// 64-bit FNV-1a. Stable across platforms, used for stream labels and cache keys.
constexpr std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a_bytes(std::span<const std::byte> bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (std::byte b : bytes) {
        h ^= static_cast<std::uint64_t>(b);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// H x W x 3 image, row-major, channels interleaved. Values are expected in [0,1]
// but the container also holds unclamped intermediates (x + delta before clamping).
class ImageTensor {
public:
    static constexpr int kChannels = 3;

    ImageTensor() = default;
    ImageTensor(int height, int width, double fill = 0.0)
        : height_(height), width_(width) {
        if (height <= 0 || width <= 0) {
            throw ArgumentError("ImageTensor: height and width must be positive");
        }
        data_.assign(static_cast<std::size_t>(height) * width * kChannels, fill);
    }
    ImageTensor(int height, int width, std::vector<double> data)
        : height_(height), width_(width), data_(std::move(data)) {
        if (height <= 0 || width <= 0) {
            throw ArgumentError("ImageTensor: height and width must be positive");
        }
        if (data_.size() != static_cast<std::size_t>(height) * width * kChannels) {
            throw ArgumentError("ImageTensor: data size does not match H*W*3");
        }
    }

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(int y, int x, int c) { return data_[index(y, x, c)]; }
    double at(int y, int x, int c) const { return data_[index(y, x, c)]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    const std::vector<double>& storage() const { return data_; }

    bool same_shape(const ImageTensor& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }

    bool in_unit_range() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
    }

    bool operator==(const ImageTensor& other) const = default;

private:
    std::size_t index(int y, int x, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * kChannels + c;
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<double> data_;
};

inline void require_valid(const ImageTensor& x, std::string_view what) {
    if (x.empty()) {
        throw ArgumentError(std::string(what) + ": empty image");
    }
    if (!x.in_unit_range()) {
        throw ArgumentError(std::string(what) + ": pixel values outside [0,1]");
    }
}

inline void require_same_shape(const ImageTensor& a, const ImageTensor& b, std::string_view what) {
    if (!a.same_shape(b)) {
        throw ArgumentError(std::string(what) + ": image shapes differ");
    }
}

struct Perturbation {
    ImageTensor delta;
    double epsilon = 0.0;
    std::string method_tag;

    double linf() const {
        double m = 0.0;
        for (double v : delta.values()) m = std::max(m, std::abs(v));
        return m;
    }
};

// Named, seeded random stream. Identical (seed, label) pairs yield bit-identical draws
// on every platform: the engine is mt19937_64 and the distributions below are
// computed from raw 64-bit words rather than through <random> distributions.
class RngState {
public:
    RngState() : RngState(0, "default") {}
    RngState(std::uint64_t seed, std::string label)
        : seed_(seed), label_(std::move(label)), engine_(make_engine(seed_, label_)) {}

    std::uint64_t seed() const { return seed_; }
    const std::string& label() const { return label_; }

    // Independent child stream; does not advance this one.
    RngState derive(std::string_view suffix) const {
        return RngState(seed_, label_ + "/" + std::string(suffix));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

    // Box-Muller, one draw per call (the paired value is cached).
    double normal() {
        if (cached_) {
            cached_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        cached_ = true;
        return r * std::cos(theta);
    }

private:
    static std::mt19937_64 make_engine(std::uint64_t seed, const std::string& label) {
        const std::uint64_t h = fnv1a(label);
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
        return std::mt19937_64(seq);
    }

    std::uint64_t seed_;
    std::string label_;
    std::mt19937_64 engine_;
    bool cached_ = false;
    double spare_ = 0.0;
};

inline Perturbation clip_linf(const Perturbation& delta, double epsilon) {
    if (!(epsilon >= 0.0)) {
        throw ArgumentError("clip_linf: epsilon must be nonnegative");
    }
    Perturbation out = delta;
    out.epsilon = epsilon;
    for (double& v : out.delta.values()) v = std::clamp(v, -epsilon, epsilon);
    return out;
}

inline ImageTensor clamp_pixels(const ImageTensor& x) {
    ImageTensor out = x;
    for (double& v : out.values()) v = std::clamp(v, 0.0, 1.0);
    return out;
}

inline std::optional<double> try_cosine_sim(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) {
        throw ArgumentError("cosine_sim: vectors must be nonempty and of equal length");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return std::nullopt;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

inline double cosine_sim(std::span<const double> a, std::span<const double> b) {
    auto v = try_cosine_sim(a, b);
    if (!v) throw UndefinedValueError("cosine_sim: zero-norm vector");
    return *v;
}

// Shared projection step: clip delta to the eps-ball, clamp source+delta to [0,1].
// Returns the protected image; callers redefine delta := protected - source, which then
// satisfies |delta| <= eps exactly in floating point.
inline ImageTensor project_to_budget(const ImageTensor& source, const ImageTensor& delta, double epsilon) {
    require_same_shape(source, delta, "project_to_budget");
    ImageTensor out = source;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double s = source[i];
        const double clipped = std::clamp(delta[i], -epsilon, epsilon);
        double pixel = std::clamp(s + clipped, 0.0, 1.0);
        // s + c - s can round one ulp past eps; pull the pixel back toward the source.
        while (std::abs(pixel - s) > epsilon) pixel = std::nextafter(pixel, s);
        out[i] = pixel;
    }
    return out;
}

inline ImageTensor add(const ImageTensor& a, const ImageTensor& b) {
    require_same_shape(a, b, "add");
    ImageTensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

inline ImageTensor subtract(const ImageTensor& a, const ImageTensor& b) {
    require_same_shape(a, b, "subtract");
    ImageTensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

inline double linf_distance(const ImageTensor& a, const ImageTensor& b) {
    require_same_shape(a, b, "linf_distance");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double squared_l2_distance(const ImageTensor& a, const ImageTensor& b) {
    require_same_shape(a, b, "squared_l2_distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

}  // namespace facelock
