#pragma once

// Builders for ad::PlaneMap: the linear spatial transforms shared by purification,
// dataset resizing, the toy editor's warp and differentiable EOT transforms.

#include <cmath>
#include <memory>
#include <vector>

#include "facelock/autodiff.hpp"
#include "facelock/core.hpp"

namespace facelock::resample {

using ad::PlaneMap;

// Mirror index without repeating the edge sample (d c b | a b c d | c b a).
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

inline double reflect_coord(double u, int n) {
    if (n == 1) return 0.0;
    const double period = 2.0 * (n - 1);
    u = std::fmod(std::abs(u), period);
    return u <= n - 1 ? u : period - u;
}

namespace detail {

class MapBuilder {
public:
    MapBuilder(int in_h, int in_w, int out_h, int out_w) {
        map_.in_height = in_h;
        map_.in_width = in_w;
        map_.out_height = out_h;
        map_.out_width = out_w;
        map_.row_begin.reserve(map_.out_plane() + 1);
        map_.row_begin.push_back(0);
    }
    void tap(int y, int x, double w) {
        if (w == 0.0) return;
        map_.index.push_back(static_cast<std::size_t>(y) * map_.in_width + x);
        map_.weight.push_back(w);
    }
    void end_row() { map_.row_begin.push_back(map_.index.size()); }

    // Bilinear sample at continuous (y, x), already inside [0,n-1].
    void bilinear(double y, double x) {
        const int y0 = static_cast<int>(std::floor(y));
        const int x0 = static_cast<int>(std::floor(x));
        const int y1 = std::min(y0 + 1, map_.in_height - 1);
        const int x1 = std::min(x0 + 1, map_.in_width - 1);
        const double fy = y - y0, fx = x - x0;
        tap(y0, x0, (1 - fy) * (1 - fx));
        tap(y0, x1, (1 - fy) * fx);
        tap(y1, x0, fy * (1 - fx));
        tap(y1, x1, fy * fx);
    }

    std::shared_ptr<const PlaneMap> finish() { return std::make_shared<const PlaneMap>(std::move(map_)); }

private:
    PlaneMap map_;
};

}  // namespace detail

inline std::shared_ptr<const PlaneMap> identity(int h, int w) {
    detail::MapBuilder b(h, w, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            b.tap(y, x, 1.0);
            b.end_row();
        }
    return b.finish();
}

inline std::shared_ptr<const PlaneMap> crop(int h, int w, int top, int left, int out_h, int out_w) {
    if (top < 0 || left < 0 || top + out_h > h || left + out_w > w || out_h <= 0 || out_w <= 0) {
        throw ArgumentError("crop: window outside image");
    }
    detail::MapBuilder b(h, w, out_h, out_w);
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            b.tap(top + y, left + x, 1.0);
            b.end_row();
        }
    return b.finish();
}

// Half-pixel-centred bilinear resize with edge clamping.
inline std::shared_ptr<const PlaneMap> resize_bilinear(int h, int w, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw ArgumentError("resize_bilinear: target size must be positive");
    detail::MapBuilder b(h, w, out_h, out_w);
    const double sy = static_cast<double>(h) / out_h, sx = static_cast<double>(w) / out_w;
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            const double uy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
            const double ux = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
            b.bilinear(uy, ux);
            b.end_row();
        }
    return b.finish();
}

inline std::vector<double> gaussian_kernel_1d(int size, double sigma) {
    if (size <= 0 || size % 2 == 0) throw ArgumentError("gaussian_kernel_1d: size must be positive and odd");
    if (!(sigma > 0.0)) throw ArgumentError("gaussian_kernel_1d: sigma must be positive");
    std::vector<double> k(size);
    const int r = size / 2;
    double s = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - r;
        k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        s += k[i];
    }
    for (double& v : k) v /= s;
    return k;
}

// k x k Gaussian blur with reflect padding, same-size output.
inline std::shared_ptr<const PlaneMap> gaussian_blur(int h, int w, int size, double sigma) {
    const auto k = gaussian_kernel_1d(size, sigma);
    const int r = size / 2;
    detail::MapBuilder b(h, w, h, w);
    std::vector<double> row(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            // Reflection can fold two taps onto one pixel on tiny images; merge them.
            std::fill(row.begin(), row.end(), 0.0);
            std::vector<std::size_t> touched;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const int iy = reflect_index(y + dy, h), ix = reflect_index(x + dx, w);
                    const std::size_t idx = static_cast<std::size_t>(iy) * w + ix;
                    if (row[idx] == 0.0) touched.push_back(idx);
                    row[idx] += k[dy + r] * k[dx + r];
                }
            std::sort(touched.begin(), touched.end());
            for (auto idx : touched) b.tap(static_cast<int>(idx / w), static_cast<int>(idx % w), row[idx]);
            b.end_row();
        }
    return b.finish();
}

// Rotation about the image centre by `degrees` (counter-clockwise), bilinear sampling,
// reflect fill, same-size canvas.
inline std::shared_ptr<const PlaneMap> rotation(int h, int w, double degrees) {
    const double theta = degrees * 3.14159265358979323846 / 180.0;
    const double c = std::cos(theta), s = std::sin(theta);
    const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    detail::MapBuilder b(h, w, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double dx = x - cx, dy = y - cy;
            // inverse rotation maps output coordinates back into the source
            const double sx = c * dx - s * dy + cx;
            const double sy = s * dx + c * dy + cy;
            b.bilinear(reflect_coord(sy, h), reflect_coord(sx, w));
            b.end_row();
        }
    return b.finish();
}

// Per-pixel displacement (source = output + offset), bilinear, reflect fill.
inline std::shared_ptr<const PlaneMap> displacement(int h, int w, const std::vector<double>& offset_y,
                                                    const std::vector<double>& offset_x) {
    if (offset_y.size() != static_cast<std::size_t>(h) * w || offset_x.size() != offset_y.size()) {
        throw ArgumentError("displacement: offset field size mismatch");
    }
    detail::MapBuilder b(h, w, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            b.bilinear(reflect_coord(y + offset_y[i], h), reflect_coord(x + offset_x[i], w));
            b.end_row();
        }
    return b.finish();
}

inline ImageTensor apply(const ImageTensor& img, const PlaneMap& map) {
    return ad::to_image(ad::apply_plane_map(ad::from_image(img), map));
}

}  // namespace facelock::resample
