#pragma once

// Adversary-side input transformations applied before editing.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <unistd.h>

#include "facelock/core.hpp"
#include "facelock/image_io.hpp"
#include "facelock/resample.hpp"

namespace facelock::purification {

enum class Kind { none, blur, rotate, jpeg, color_jitter, external };

struct PurifySpec {
    Kind kind = Kind::none;
    int blur_kernel = 5;
    double blur_sigma = 1.5;
    double rotate_min_degrees = -10.0;
    double rotate_max_degrees = 10.0;
    int jpeg_quality = 75;
    double brightness = 0.2;  // factor drawn from [1-b, 1+b]
    double contrast = 0.2;
    double saturation = 0.2;
    // Shell command with {input} and {output} placeholders, each replaced by a PNG path.
    std::string external_command;
    RngState rng{0, "purify"};

    void validate() const {
        if (blur_kernel <= 0 || blur_kernel % 2 == 0) throw ArgumentError("PurifySpec: blur kernel must be odd and positive");
        if (!(blur_sigma > 0.0)) throw ArgumentError("PurifySpec: blur sigma must be positive");
        if (rotate_min_degrees > rotate_max_degrees) throw ArgumentError("PurifySpec: rotation range is empty");
        if (jpeg_quality < 1 || jpeg_quality > 100) throw ArgumentError("PurifySpec: JPEG quality must be in [1,100]");
        if (brightness < 0.0 || brightness >= 1.0 || contrast < 0.0 || contrast >= 1.0 || saturation < 0.0 ||
            saturation >= 1.0) {
            throw ArgumentError("PurifySpec: jitter ranges must be in [0,1)");
        }
    }
};

// Short label used in records and reports: none, blur, rotate, jpeg75, color_jitter, external.
inline std::string label(const PurifySpec& s) {
    switch (s.kind) {
        case Kind::none: return "none";
        case Kind::blur: return "blur";
        case Kind::rotate: return "rotate";
        case Kind::jpeg: return "jpeg" + std::to_string(s.jpeg_quality);
        case Kind::color_jitter: return "color_jitter";
        case Kind::external: return "external";
    }
    return "unknown";
}

// Inverse of label(); other parameters keep their defaults.
inline PurifySpec parse_label(std::string_view text) {
    PurifySpec s;
    if (text == "none") {
        s.kind = Kind::none;
    } else if (text == "blur") {
        s.kind = Kind::blur;
    } else if (text == "rotate") {
        s.kind = Kind::rotate;
    } else if (text == "color_jitter") {
        s.kind = Kind::color_jitter;
    } else if (text == "external" || text == "diffpure") {
        s.kind = Kind::external;
    } else if (text.starts_with("jpeg")) {
        s.kind = Kind::jpeg;
        const auto q = text.substr(4);
        if (!q.empty()) {
            try {
                std::size_t used = 0;
                s.jpeg_quality = std::stoi(std::string(q), &used);
                if (used != q.size()) throw ArgumentError("bad quality");
            } catch (const std::exception&) {
                throw ArgumentError("unknown purification '" + std::string(text) + "'");
            }
        }
    } else {
        throw ArgumentError("unknown purification '" + std::string(text) +
                            "' (expected none, blur, rotate, jpeg<Q>, color_jitter or external)");
    }
    s.validate();
    return s;
}

namespace detail {

inline ImageTensor color_jitter(const ImageTensor& x, const PurifySpec& s) {
    RngState rng = s.rng;
    const double b = rng.uniform(1.0 - s.brightness, 1.0 + s.brightness);
    const double c = rng.uniform(1.0 - s.contrast, 1.0 + s.contrast);
    const double sat = rng.uniform(1.0 - s.saturation, 1.0 + s.saturation);
    ImageTensor out = x;
    for (double& v : out.values()) v = std::clamp(v * b, 0.0, 1.0);

    auto luma = [](double r, double g, double bl) { return 0.299 * r + 0.587 * g + 0.114 * bl; };
    const std::size_t n = static_cast<std::size_t>(x.height()) * x.width();
    double mean_gray = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_gray += luma(out[3 * i], out[3 * i + 1], out[3 * i + 2]);
    mean_gray /= static_cast<double>(n);
    for (double& v : out.values()) v = std::clamp((v - mean_gray) * c + mean_gray, 0.0, 1.0);

    for (std::size_t i = 0; i < n; ++i) {
        const double g = luma(out[3 * i], out[3 * i + 1], out[3 * i + 2]);
        for (int ch = 0; ch < 3; ++ch) out[3 * i + ch] = std::clamp((out[3 * i + ch] - g) * sat + g, 0.0, 1.0);
    }
    return out;
}

inline std::string replace_all(std::string s, std::string_view from, const std::string& to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
    return s;
}

inline std::optional<ImageTensor> run_external(const ImageTensor& x, const std::string& command, std::string& error) {
    if (command.empty()) {
        error = "no external purifier configured (purify.external.command)";
        return std::nullopt;
    }
    static std::atomic<unsigned> counter{0};
    const auto dir = std::filesystem::temp_directory_path() /
                     ("facelock-purify-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(dir);
    const auto in = dir / "input.png", out = dir / "output.png";
    std::optional<ImageTensor> result;
    try {
        io::write_png(in, x);
        const std::string cmd = replace_all(replace_all(command, "{input}", in.string()), "{output}", out.string());
        const int status = std::system(cmd.c_str());
        if (status != 0) {
            error = "external purifier exited with status " + std::to_string(status);
        } else {
            auto img = io::read_png(out);
            if (!img.same_shape(x)) {
                error = "external purifier changed the image size";
            } else {
                result = std::move(img);
            }
        }
    } catch (const std::exception& e) {
        error = std::string("external purifier failed: ") + e.what();
    }
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
    return result;
}

}  // namespace detail

// Applies the purification. Failures of the external hook fall back to the identity and
// append a message to `warnings` when provided.
inline ImageTensor purify(const ImageTensor& x, const PurifySpec& spec, std::vector<std::string>* warnings = nullptr) {
    spec.validate();
    require_valid(x, "purify");
    const int h = x.height(), w = x.width();
    switch (spec.kind) {
        case Kind::none: return x;
        case Kind::blur: return clamp_pixels(resample::apply(x, *resample::gaussian_blur(h, w, spec.blur_kernel, spec.blur_sigma)));
        case Kind::rotate: {
            RngState rng = spec.rng;
            const double deg = rng.uniform(spec.rotate_min_degrees, spec.rotate_max_degrees);
            return clamp_pixels(resample::apply(x, *resample::rotation(h, w, deg)));
        }
        case Kind::jpeg: return io::jpeg_roundtrip(x, spec.jpeg_quality);
        case Kind::color_jitter: return detail::color_jitter(x, spec);
        case Kind::external: {
            std::string error;
            auto out = detail::run_external(x, spec.external_command, error);
            if (out) return *out;
            if (warnings) warnings->push_back("purify/external: " + error + "; passing image through unchanged");
            return x;
        }
    }
    return x;
}

}  // namespace facelock::purification
