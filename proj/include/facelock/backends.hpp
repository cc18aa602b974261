#pragma once

// Interfaces for the five neural components the attacks differentiate through or query.
// Differentiable components consume and produce ad::Var so gradients flow back to the
// input image; images enter the graph in CHW layout via ad::from_image.

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "facelock/autodiff.hpp"
#include "facelock/core.hpp"

namespace facelock {

class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EditParams {
    int image_size = 512;
    int inference_steps = 50;
    double image_guidance = 1.5;
    double text_guidance = 7.5;

    void validate() const {
        if (image_size <= 0) throw ArgumentError("EditParams: image_size must be positive");
        if (inference_steps <= 0) throw ArgumentError("EditParams: inference_steps must be positive");
        if (image_guidance < 0.0 || text_guidance < 0.0) throw ArgumentError("EditParams: guidance scales must be >= 0");
    }
    bool operator==(const EditParams&) const = default;
};

struct FaceMask {
    int height = 0;
    int width = 0;
    std::vector<double> values;  // H*W, each 0 or 1
    bool face_found = true;

    double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }

    // Broadcast to CHW with three channels.
    ad::Tensor as_image_tensor() const {
        ad::Tensor t(ad::Shape{3, height, width});
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < height; ++y)
                for (int x = 0; x < width; ++x) t.at(c, y, x) = at(y, x);
        return t;
    }
};

class LatentCodec {
public:
    virtual ~LatentCodec() = default;
    virtual ad::Var encode(const ad::Var& image) const = 0;
    virtual ad::Var decode(const ad::Var& latent) const = 0;

    ad::Tensor encode(const ImageTensor& x) const { return encode(ad::Var::constant(ad::from_image(x))).value(); }
    ImageTensor roundtrip(const ImageTensor& x) const {
        return ad::to_image(decode(encode(ad::Var::constant(ad::from_image(x)))).value());
    }
};

class FaceEmbedder {
public:
    virtual ~FaceEmbedder() = default;
    virtual ad::Var embed(const ad::Var& image) const = 0;
    // Facial region used by pixel-level penalties; all ones with face_found=false when
    // no face is detected.
    virtual FaceMask region_mask(const ImageTensor& x) const = 0;

    ad::Var similarity(const ad::Var& a, const ad::Var& b) const { return ad::cosine_similarity(embed(a), embed(b)); }
    double similarity(const ImageTensor& a, const ImageTensor& b) const {
        return similarity(ad::Var::constant(ad::from_image(a)), ad::Var::constant(ad::from_image(b))).item();
    }
};

class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::vector<ad::Var> features(const ad::Var& image) const = 0;
    virtual std::span<const double> layer_weights() const = 0;
    virtual std::string family() const = 0;
};

class TextImageEmbedder {
public:
    virtual ~TextImageEmbedder() = default;
    virtual ad::Tensor embed_image(const ImageTensor& x) const = 0;
    virtual ad::Tensor embed_text(std::string_view text) const = 0;
    virtual int dimension() const = 0;
};

class InstructionEditor {
public:
    virtual ~InstructionEditor() = default;
    virtual ImageTensor edit(const ImageTensor& x, std::string_view prompt, const EditParams& params,
                             const RngState& rng) const = 0;
};

enum class BackendKind { toy, real };

inline std::string to_string(BackendKind k) { return k == BackendKind::toy ? "toy" : "real"; }

struct BackendBundle {
    std::shared_ptr<const LatentCodec> codec;
    std::shared_ptr<const FaceEmbedder> face;
    std::shared_ptr<const FeatureExtractor> feat;
    std::shared_ptr<const TextImageEmbedder> clip;
    std::shared_ptr<const InstructionEditor> editor;
    BackendKind kind = BackendKind::toy;
    // Free-form identity of the bound models, folded into cache keys and sidecars.
    std::string description;

    void validate() const {
        std::string missing;
        if (!codec) missing += " codec";
        if (!face) missing += " face";
        if (!feat) missing += " feature_extractor";
        if (!clip) missing += " clip";
        if (!editor) missing += " editor";
        if (!missing.empty()) throw BackendError("backend bundle is missing:" + missing);
    }
};

inline FaceMask face_region_mask(const FaceEmbedder& face, const ImageTensor& x) {
    require_valid(x, "face_region_mask");
    return face.region_mask(x);
}

}  // namespace facelock
