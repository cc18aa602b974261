#pragma once

// Evaluation metrics in two groups:
//   prompt fidelity  - CLIP-S, CLIP-SD, PSNR, SSIM, LPIPS
//   image integrity  - CLIP-I, FR
// PSNR/SSIM/LPIPS compare the no-defense edit with the defended edit; a lower similarity
// (higher LPIPS) means the protection changed the edit more.

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "facelock/autodiff.hpp"
#include "facelock/backends.hpp"
#include "facelock/core.hpp"
#include "facelock/resample.hpp"

namespace facelock::metrics {

enum class Metric { clip_s, psnr, ssim, lpips, clip_i, fr, clip_sd };
enum class Group { prompt_fidelity, image_integrity };
enum class Better { lower_better_for_defense, higher_better_for_defense };

// Report column order: the six main-table metrics, then CLIP-SD.
inline constexpr std::array<Metric, 7> kMetricOrder{Metric::clip_s, Metric::psnr,  Metric::ssim,   Metric::lpips,
                                                    Metric::clip_i, Metric::fr,    Metric::clip_sd};

struct MetricInfo {
    Metric metric;
    std::string_view key;
    std::string_view label;
    Group group;
    Better direction;
};

inline constexpr MetricInfo info(Metric m) {
    switch (m) {
        case Metric::clip_s: return {m, "clip_s", "CLIP-S", Group::prompt_fidelity, Better::lower_better_for_defense};
        case Metric::psnr: return {m, "psnr", "PSNR", Group::prompt_fidelity, Better::lower_better_for_defense};
        case Metric::ssim: return {m, "ssim", "SSIM", Group::prompt_fidelity, Better::lower_better_for_defense};
        case Metric::lpips: return {m, "lpips", "LPIPS", Group::prompt_fidelity, Better::higher_better_for_defense};
        case Metric::clip_i: return {m, "clip_i", "CLIP-I", Group::image_integrity, Better::lower_better_for_defense};
        case Metric::fr: return {m, "fr", "FR", Group::image_integrity, Better::lower_better_for_defense};
        case Metric::clip_sd: return {m, "clip_sd", "CLIP-SD", Group::prompt_fidelity, Better::lower_better_for_defense};
    }
    return {m, "?", "?", Group::prompt_fidelity, Better::lower_better_for_defense};
}

inline std::string_view arrow(Better b) { return b == Better::higher_better_for_defense ? "↑" : "↓"; }
inline std::string_view to_string(Group g) { return g == Group::prompt_fidelity ? "prompt_fidelity" : "image_integrity"; }
inline std::string_view to_string(Better b) {
    return b == Better::higher_better_for_defense ? "higher_better_for_defense" : "lower_better_for_defense";
}

inline Metric parse_metric(std::string_view key) {
    for (auto m : kMetricOrder)
        if (info(m).key == key) return m;
    throw ArgumentError("unknown metric '" + std::string(key) + "'");
}

struct MetricValue {
    std::string name;
    double value = 0.0;
    Group group = Group::prompt_fidelity;
    Better direction = Better::lower_better_for_defense;
};

inline MetricValue make_value(Metric m, double v) {
    const auto i = info(m);
    return {std::string(i.key), v, i.group, i.direction};
}

// A value plus the fallback flag raised while computing it, if any.
struct Score {
    double value = 0.0;
    std::optional<std::string> flag;
};

inline constexpr double kPsnrCap = 100.0;

inline double mse(const ImageTensor& a, const ImageTensor& b) {
    require_same_shape(a, b, "mse");
    return squared_l2_distance(a, b) / static_cast<double>(a.size());
}

// 10 log10(1/MSE) on the [0,1] scale, capped at 100 dB (flagged when MSE is zero).
inline Score psnr_scored(const ImageTensor& a, const ImageTensor& b) {
    const double e = mse(a, b);
    if (e == 0.0) return {kPsnrCap, "psnr_capped"};
    return {std::min(kPsnrCap, 10.0 * std::log10(1.0 / e)), std::nullopt};
}

inline double psnr(const ImageTensor& a, const ImageTensor& b) { return psnr_scored(a, b).value; }

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double data_range = 1.0;
};

namespace detail {

// Valid-mode separable filtering of one H x W plane.
inline std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w, const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int oh = h - n + 1, ow = w - n + 1;
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += k[i] * plane[static_cast<std::size_t>(y) * w + x + i];
            tmp[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    return out;
}

}  // namespace detail

// Mean local SSIM with a Gaussian window over valid positions, averaged over channels.
inline double ssim(const ImageTensor& a, const ImageTensor& b, const SsimParams& p = {}) {
    require_same_shape(a, b, "ssim");
    const int h = a.height(), w = a.width();
    if (std::min(h, w) < p.window) {
        throw ArgumentError("ssim: image sides must be at least the window size (" + std::to_string(p.window) + ")");
    }
    const auto k = resample::gaussian_kernel_1d(p.window, p.sigma);
    const double c1 = (p.k1 * p.data_range) * (p.k1 * p.data_range);
    const double c2 = (p.k2 * p.data_range) * (p.k2 * p.data_range);
    const std::size_t n = static_cast<std::size_t>(h) * w;

    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        std::vector<double> pa(n), pb(n), aa(n), bb(n), ab(n);
        for (std::size_t i = 0; i < n; ++i) {
            pa[i] = a[i * 3 + c];
            pb[i] = b[i * 3 + c];
            aa[i] = pa[i] * pa[i];
            bb[i] = pb[i] * pb[i];
            ab[i] = pa[i] * pb[i];
        }
        const auto mu_a = detail::filter_valid(pa, h, w, k);
        const auto mu_b = detail::filter_valid(pb, h, w, k);
        const auto e_aa = detail::filter_valid(aa, h, w, k);
        const auto e_bb = detail::filter_valid(bb, h, w, k);
        const auto e_ab = detail::filter_valid(ab, h, w, k);
        double acc = 0.0;
        for (std::size_t i = 0; i < mu_a.size(); ++i) {
            const double va = e_aa[i] - mu_a[i] * mu_a[i];
            const double vb = e_bb[i] - mu_b[i] * mu_b[i];
            const double cov = e_ab[i] - mu_a[i] * mu_b[i];
            acc += ((2 * mu_a[i] * mu_b[i] + c1) * (2 * cov + c2)) /
                   ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
        }
        total += acc / static_cast<double>(mu_a.size());
    }
    return total / 3.0;
}

// sum_l w_l * mean_{h,w} || f_l(a)/|f_l(a)| - f_l(b)/|f_l(b)| ||^2, channel-normalised.
inline double lpips(const BackendBundle& bundle, const ImageTensor& a, const ImageTensor& b) {
    require_same_shape(a, b, "lpips");
    constexpr double kEps = 1e-10;
    const auto fa = bundle.feat->features(ad::Var::constant(ad::from_image(a)));
    const auto fb = bundle.feat->features(ad::Var::constant(ad::from_image(b)));
    const auto weights = bundle.feat->layer_weights();
    double total = 0.0;
    for (std::size_t l = 0; l < fa.size(); ++l) {
        const auto& ta = fa[l].value();
        const auto& tb = fb[l].value();
        const auto s = ta.shape();
        double layer = 0.0;
        for (int y = 0; y < s.height; ++y)
            for (int x = 0; x < s.width; ++x) {
                double na = 0.0, nb = 0.0;
                for (int c = 0; c < s.channels; ++c) {
                    na += ta.at(c, y, x) * ta.at(c, y, x);
                    nb += tb.at(c, y, x) * tb.at(c, y, x);
                }
                na = std::sqrt(na) + kEps;
                nb = std::sqrt(nb) + kEps;
                double d = 0.0;
                for (int c = 0; c < s.channels; ++c) {
                    const double diff = ta.at(c, y, x) / na - tb.at(c, y, x) / nb;
                    d += diff * diff;
                }
                layer += d;
            }
        total += weights[l] * layer / static_cast<double>(s.plane());
    }
    return total;
}

// cos(E_edit - E_src, E_prompt). A zero embedding shift yields 0 with a flag.
inline Score clip_s(const BackendBundle& bundle, const ImageTensor& src, const ImageTensor& edited,
                    std::string_view prompt) {
    if (prompt.empty()) throw ArgumentError("clip_s: prompt must be nonempty");
    const auto e_src = bundle.clip->embed_image(src);
    const auto e_edit = bundle.clip->embed_image(edited);
    const auto e_prompt = bundle.clip->embed_text(prompt);
    std::vector<double> shift(e_edit.size());
    for (std::size_t i = 0; i < shift.size(); ++i) shift[i] = e_edit[i] - e_src[i];
    auto v = try_cosine_sim(shift, e_prompt.values());
    if (!v) {
        const bool zero_shift = std::all_of(shift.begin(), shift.end(), [](double s) { return s == 0.0; });
        return {0.0, zero_shift ? "clip_s_zero_shift" : "clip_s_zero_prompt_embedding"};
    }
    return {*v, std::nullopt};
}

inline Score clip_sd_from_embeddings(std::span<const double> e_edit, std::span<const double> e_desc) {
    auto v = try_cosine_sim(e_edit, e_desc);
    if (!v) return {0.0, "clip_sd_zero_embedding"};
    return {*v, std::nullopt};
}

// cos(E_edit, E_desc) against a descriptive caption of the intended result.
inline Score clip_sd(const BackendBundle& bundle, const ImageTensor& edited, std::string_view description) {
    if (description.empty()) throw ArgumentError("clip_sd: description must be nonempty");
    const auto e_edit = bundle.clip->embed_image(edited);
    const auto e_desc = bundle.clip->embed_text(description);
    return clip_sd_from_embeddings(e_edit.values(), e_desc.values());
}

// cos(E_edit, E_src)
inline double clip_i(const BackendBundle& bundle, const ImageTensor& src, const ImageTensor& edited) {
    const auto e_src = bundle.clip->embed_image(src);
    const auto e_edit = bundle.clip->embed_image(edited);
    return cosine_sim(e_edit.values(), e_src.values());
}

// Face-recognition similarity between the edited and the source image.
inline double fr_score(const BackendBundle& bundle, const ImageTensor& src, const ImageTensor& edited) {
    return bundle.face->similarity(edited, src);
}

struct Summary {
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
    std::size_t count = 0;

    bool operator==(const Summary&) const = default;
};

inline Summary summarize(std::span<const double> values) {
    Summary s;
    s.count = values.size();
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size()));
    return s;
}

}  // namespace facelock::metrics
