#pragma once

// Deterministic toy implementations of the five backend components.
//
// Small fixed-random-weight conv nets, fully differentiable through facelock::ad, so the
// optimisation and metric machinery can be verified offline at 16/32/64 px. The codec
// carries an approximate colour pass-through path so that decode(encode(x)) resembles a
// softened x; everything else is random projection.

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "facelock/autodiff.hpp"
#include "facelock/backends.hpp"
#include "facelock/core.hpp"
#include "facelock/resample.hpp"

namespace facelock::toy {

namespace detail {

inline ad::ConvWeights random_conv(RngState& rng, int in, int out, int kernel, int stride, int padding,
                                   double gain = 1.0) {
    ad::ConvWeights cw{in, out, kernel, stride, padding, {}, {}};
    const double std = gain / std::sqrt(static_cast<double>(in * kernel * kernel));
    cw.weight.resize(static_cast<std::size_t>(out) * in * kernel * kernel);
    for (double& w : cw.weight) w = std * rng.normal();
    cw.bias.resize(out);
    for (double& b : cw.bias) b = 0.1 * rng.normal();
    return cw;
}

inline ad::LinearWeights random_linear(RngState& rng, int in, int out, double bias_std = 0.0) {
    ad::LinearWeights lw{in, out, {}, {}};
    const double std = 1.0 / std::sqrt(static_cast<double>(in));
    lw.weight.resize(static_cast<std::size_t>(out) * in);
    for (double& w : lw.weight) w = std * rng.normal();
    lw.bias.resize(out);
    for (double& b : lw.bias) b = bias_std * rng.normal();
    return lw;
}

// Overwrite the first `n` output channels with a per-channel box filter of the matching
// input channel (scaled by `gain`) plus small noise, and set their bias.
inline void add_passthrough(ad::ConvWeights& cw, RngState& rng, int n, double gain, double bias, double noise) {
    const int k = cw.kernel;
    for (int o = 0; o < n; ++o) {
        for (int i = 0; i < cw.in_channels; ++i)
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    const std::size_t idx = ((static_cast<std::size_t>(o) * cw.in_channels + i) * k + ky) * k + kx;
                    cw.weight[idx] = (i == o ? gain / (k * k) : 0.0) + noise * rng.normal();
                }
        cw.bias[o] = bias;
    }
}

// Maps [0,1] pixels to [-1,1], the range the toy nets were drawn for.
inline ad::Var centred(const ad::Var& x) { return ad::add_scalar(ad::scale(x, 2.0), -1.0); }

}  // namespace detail

// 2-layer stride-2 conv encoder, mirrored upsample+conv decoder. Latent = (4, H/4, W/4).
class ToyCodec final : public LatentCodec {
public:
    static constexpr int kLatentChannels = 4;

    explicit ToyCodec(std::uint64_t seed) {
        RngState rng(seed, "toy/codec");
        enc1_ = detail::random_conv(rng, 3, 8, 3, 2, 1, 1.5);
        detail::add_passthrough(enc1_, rng, 3, 2.0, -1.0, 0.02);
        enc2_ = detail::random_conv(rng, 8, kLatentChannels, 3, 2, 1);
        detail::add_passthrough(enc2_, rng, 3, 1.0, 0.0, 0.02);
        dec1_ = detail::random_conv(rng, kLatentChannels, 8, 3, 1, 1, 1.5);
        detail::add_passthrough(dec1_, rng, 3, 1.0, 0.0, 0.02);
        dec2_ = detail::random_conv(rng, 8, 3, 3, 1, 1);
        detail::add_passthrough(dec2_, rng, 3, 4.0, 0.0, 0.03);
    }

    ad::Var encode(const ad::Var& image) const override {
        const auto& s = image.shape();
        if (s.channels != 3 || s.height % 4 != 0 || s.width % 4 != 0) {
            throw ArgumentError("ToyCodec::encode: expected 3 channels and sides divisible by 4, got " + ad::to_string(s));
        }
        return ad::conv2d(ad::tanh(ad::conv2d(image, enc1_)), enc2_);
    }

    ad::Var decode(const ad::Var& latent) const override {
        auto h = ad::tanh(ad::conv2d(ad::upsample_nearest(latent, 2), dec1_));
        return ad::sigmoid(ad::conv2d(ad::upsample_nearest(h, 2), dec2_));
    }

private:
    ad::ConvWeights enc1_, enc2_, dec1_, dec2_;
};

// Centred half-size crop (the "detected face"), two convs, global pool, 16-d embedding.
class ToyFaceEmbedder final : public FaceEmbedder {
public:
    static constexpr int kDimension = 16;

    explicit ToyFaceEmbedder(std::uint64_t seed) {
        RngState rng(seed, "toy/face");
        conv1_ = detail::random_conv(rng, 3, 8, 3, 1, 1, 1.5);
        conv2_ = detail::random_conv(rng, 8, 16, 3, 2, 1, 1.5);
        head_ = detail::random_linear(rng, 16, kDimension, 0.0);
        // Embeddings are taken relative to the pooled features of a fixed noise pattern,
        // which spreads otherwise near-parallel embeddings of smooth images apart.
        ad::Tensor reference(ad::Shape{3, 8, 8});
        for (double& v : reference.values()) v = std::clamp(0.5 + 0.25 * rng.normal(), 0.0, 1.0);
        reference_pool_ = pooled(ad::Var::constant(reference)).value();
    }

    ad::Var embed(const ad::Var& image) const override {
        const auto& s = image.shape();
        auto box = face_box(s.height, s.width);
        auto crop = resample::crop(s.height, s.width, box.top, box.left, box.height, box.width);
        auto centred_pool = ad::sub(pooled(ad::resample(image, crop)), ad::Var::constant(reference_pool_));
        return ad::linear(centred_pool, head_);
    }

    // The centred rectangle covering half of each dimension; a constant image has no face.
    FaceMask region_mask(const ImageTensor& x) const override {
        FaceMask m{x.height(), x.width(), std::vector<double>(static_cast<std::size_t>(x.height()) * x.width(), 0.0), true};
        const auto [lo, hi] = std::minmax_element(x.values().begin(), x.values().end());
        if (*lo == *hi) {
            std::fill(m.values.begin(), m.values.end(), 1.0);
            m.face_found = false;
            return m;
        }
        auto box = face_box(x.height(), x.width());
        for (int y = box.top; y < box.top + box.height; ++y)
            for (int xx = box.left; xx < box.left + box.width; ++xx) m.values[static_cast<std::size_t>(y) * x.width() + xx] = 1.0;
        return m;
    }

private:
    struct Box {
        int top, left, height, width;
    };
    static Box face_box(int h, int w) {
        const int bh = std::max(1, h / 2), bw = std::max(1, w / 2);
        return {(h - bh) / 2, (w - bw) / 2, bh, bw};
    }

    ad::Var pooled(const ad::Var& face) const {
        auto x = detail::centred(face);
        x = ad::tanh(ad::conv2d(x, conv1_));
        x = ad::tanh(ad::conv2d(x, conv2_));
        return ad::global_avg_pool(x);
    }

    ad::ConvWeights conv1_, conv2_;
    ad::LinearWeights head_;
    ad::Tensor reference_pool_;
};

enum class FeatureFamily { alexnet, squeezenet, vgg };

inline std::string to_string(FeatureFamily f) {
    switch (f) {
        case FeatureFamily::alexnet: return "alexnet_family";
        case FeatureFamily::squeezenet: return "squeezenet_family";
        case FeatureFamily::vgg: return "vgg_family";
    }
    return "unknown";
}

inline FeatureFamily parse_feature_family(std::string_view name) {
    if (name == "alexnet_family" || name == "alexnet") return FeatureFamily::alexnet;
    if (name == "squeezenet_family" || name == "squeezenet") return FeatureFamily::squeezenet;
    if (name == "vgg_family" || name == "vgg") return FeatureFamily::vgg;
    throw ArgumentError("unknown feature extractor family '" + std::string(name) +
                        "' (expected alexnet_family, squeezenet_family or vgg_family)");
}

// Three conv layers exposed as the feature list; layout differs per family.
class ToyFeatureExtractor final : public FeatureExtractor {
public:
    ToyFeatureExtractor(std::uint64_t seed, FeatureFamily family) : family_(family) {
        RngState rng(seed, "toy/feat/" + to_string(family));
        switch (family) {
            case FeatureFamily::alexnet:
                layers_ = {detail::random_conv(rng, 3, 12, 5, 2, 2, 1.5), detail::random_conv(rng, 12, 16, 3, 2, 1, 1.5),
                           detail::random_conv(rng, 16, 16, 3, 1, 1, 1.5)};
                break;
            case FeatureFamily::squeezenet:
                layers_ = {detail::random_conv(rng, 3, 8, 3, 2, 1, 1.5), detail::random_conv(rng, 8, 4, 1, 1, 0, 1.5),
                           detail::random_conv(rng, 4, 16, 3, 1, 1, 1.5)};
                break;
            case FeatureFamily::vgg:
                layers_ = {detail::random_conv(rng, 3, 8, 3, 1, 1, 1.5), detail::random_conv(rng, 8, 16, 3, 2, 1, 1.5),
                           detail::random_conv(rng, 16, 16, 3, 2, 1, 1.5)};
                break;
        }
        weights_.assign(layers_.size(), 1.0 / static_cast<double>(layers_.size()));
    }

    std::vector<ad::Var> features(const ad::Var& image) const override {
        std::vector<ad::Var> out;
        auto x = detail::centred(image);
        for (const auto& layer : layers_) {
            x = ad::tanh(ad::conv2d(x, layer));
            out.push_back(x);
        }
        return out;
    }

    std::span<const double> layer_weights() const override { return weights_; }
    std::string family() const override { return to_string(family_); }

private:
    FeatureFamily family_;
    std::vector<ad::ConvWeights> layers_;
    std::vector<double> weights_;
};

// Conv image head and hashed bag-of-tokens text head in a shared 32-d space.
class ToyTextImageEmbedder final : public TextImageEmbedder {
public:
    static constexpr int kDimension = 32;

    explicit ToyTextImageEmbedder(std::uint64_t seed) : seed_(seed) {
        RngState rng(seed, "toy/clip/image");
        conv1_ = detail::random_conv(rng, 3, 8, 3, 2, 1, 1.5);
        conv2_ = detail::random_conv(rng, 8, 16, 3, 2, 1, 1.5);
        head_ = detail::random_linear(rng, 16, kDimension, 0.0);
    }

    ad::Tensor embed_image(const ImageTensor& img) const override {
        auto x = detail::centred(ad::Var::constant(ad::from_image(img)));
        x = ad::tanh(ad::conv2d(x, conv1_));
        x = ad::tanh(ad::conv2d(x, conv2_));
        return ad::linear(ad::global_avg_pool(x), head_).value();
    }

    ad::Tensor embed_text(std::string_view text) const override {
        std::vector<double> acc(kDimension, 0.0);
        for (const auto& token : tokenize(text)) {
            RngState rng(seed_, "toy/clip/token/" + token);
            for (double& v : acc) v += rng.normal();
        }
        return ad::Tensor::vector(std::move(acc));
    }

    int dimension() const override { return kDimension; }

    static std::vector<std::string> tokenize(std::string_view text) {
        std::vector<std::string> tokens;
        std::string cur;
        for (char ch : text) {
            const auto uc = static_cast<unsigned char>(ch);
            if (std::isalnum(uc)) {
                cur.push_back(static_cast<char>(std::tolower(uc)));
            } else if (!cur.empty()) {
                tokens.push_back(std::move(cur));
                cur.clear();
            }
        }
        if (!cur.empty()) tokens.push_back(std::move(cur));
        return tokens;
    }

private:
    std::uint64_t seed_;
    ad::ConvWeights conv1_, conv2_;
    ad::LinearWeights head_;
};

// Codec round trip followed by a prompt-seeded smooth colour field and warp. The prompt
// fixes the field; the RngState jitters its phases, so identical (prompt, seed) pairs
// reproduce bit-for-bit. text_guidance scales the colour change and image_guidance damps
// the warp; inference_steps is accepted but a diffusion loop is not simulated.
class ToyEditor final : public InstructionEditor {
public:
    ToyEditor(std::uint64_t seed, std::shared_ptr<const LatentCodec> codec) : seed_(seed), codec_(std::move(codec)) {}

    ImageTensor edit(const ImageTensor& x, std::string_view prompt, const EditParams& params,
                     const RngState& rng) const override {
        params.validate();
        require_valid(x, "ToyEditor::edit");
        const int h = x.height(), w = x.width();
        const ImageTensor base = codec_->roundtrip(x);

        RngState field(seed_ ^ fnv1a(prompt), "toy/editor/prompt");
        RngState jitter = rng.derive("toy-editor");
        constexpr double kTwoPi = 2.0 * 3.14159265358979323846;
        const double colour_scale = params.text_guidance / 7.5;
        const double warp_px = 1.5 / std::max(params.image_guidance, 0.1);

        struct Wave {
            double fy, fx, phase, amp;
        };
        auto draw_wave = [&](double amp_scale) {
            Wave wv{field.uniform(0.5, 2.0), field.uniform(0.5, 2.0), field.uniform(0.0, kTwoPi),
                    field.uniform(-1.0, 1.0) * amp_scale};
            wv.phase += 0.3 * jitter.normal();
            return wv;
        };

        std::array<double, 3> bias{};
        std::array<std::array<Wave, 2>, 3> colour{};
        for (int c = 0; c < 3; ++c) {
            bias[c] = field.uniform(-0.05, 0.05) * colour_scale;
            for (auto& wv : colour[c]) wv = draw_wave(0.08 * colour_scale);
        }
        const Wave warp_y = draw_wave(warp_px), warp_x = draw_wave(warp_px);

        std::vector<double> oy(static_cast<std::size_t>(h) * w), ox(oy.size());
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                const std::size_t i = static_cast<std::size_t>(y) * w + xx;
                oy[i] = warp_y.amp * std::sin(kTwoPi * (warp_y.fy * y / h + warp_y.fx * xx / w) + warp_y.phase);
                ox[i] = warp_x.amp * std::sin(kTwoPi * (warp_x.fy * y / h + warp_x.fx * xx / w) + warp_x.phase);
            }
        ImageTensor out = resample::apply(base, *resample::displacement(h, w, oy, ox));
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx)
                for (int c = 0; c < 3; ++c) {
                    double shift = bias[c];
                    for (const auto& wv : colour[c])
                        shift += wv.amp * std::sin(kTwoPi * (wv.fy * y / h + wv.fx * xx / w) + wv.phase);
                    out.at(y, xx, c) += shift;
                }
        return clamp_pixels(out);
    }

private:
    std::uint64_t seed_;
    std::shared_ptr<const LatentCodec> codec_;
};

inline BackendBundle make_toy_bundle(std::uint64_t seed, int image_size,
                                     FeatureFamily family = FeatureFamily::vgg) {
    if (image_size != 16 && image_size != 32 && image_size != 64) {
        throw ArgumentError("make_toy_bundle: image_size must be 16, 32 or 64 (got " + std::to_string(image_size) + ")");
    }
    BackendBundle b;
    auto codec = std::make_shared<const ToyCodec>(seed);
    b.codec = codec;
    b.face = std::make_shared<const ToyFaceEmbedder>(seed);
    b.feat = std::make_shared<const ToyFeatureExtractor>(seed, family);
    b.clip = std::make_shared<const ToyTextImageEmbedder>(seed);
    b.editor = std::make_shared<const ToyEditor>(seed, codec);
    b.kind = BackendKind::toy;
    b.description = "toy(seed=" + std::to_string(seed) + ",size=" + std::to_string(image_size) + ",feat=" +
                    to_string(family) + ")";
    return b;
}

}  // namespace facelock::toy
