#pragma once

// Adapter contract for pretrained backends.
//
// Real models (the editing model's VAE, a face recogniser, a pretrained CNN stack, a
// CLIP-style embedder, an instruction editor) live outside this library. A deployment
// registers one factory per component provider; real_bundle() resolves the configured
// provider names, checks that weights are reachable and assembles the bundle.
// Differentiable providers wrap their framework's forward/backward with ad::custom.

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "facelock/backends.hpp"

namespace facelock {

struct ComponentSpec {
    std::string provider;  // registered factory name
    std::string weights;   // path or identifier; paths are checked for existence
};

struct RealBackendConfig {
    ComponentSpec codec;
    ComponentSpec face;
    ComponentSpec feature_extractor;
    ComponentSpec clip;
    ComponentSpec editor;
    std::string feature_family = "alexnet_family";
};

class ProviderRegistry {
public:
    using CodecFactory = std::function<std::shared_ptr<const LatentCodec>(const ComponentSpec&)>;
    using FaceFactory = std::function<std::shared_ptr<const FaceEmbedder>(const ComponentSpec&)>;
    using FeatureFactory =
        std::function<std::shared_ptr<const FeatureExtractor>(const ComponentSpec&, const std::string& family)>;
    using ClipFactory = std::function<std::shared_ptr<const TextImageEmbedder>(const ComponentSpec&)>;
    using EditorFactory = std::function<std::shared_ptr<const InstructionEditor>(const ComponentSpec&)>;

    static ProviderRegistry& instance() {
        static ProviderRegistry registry;
        return registry;
    }

    void register_codec(const std::string& name, CodecFactory f) { put(codecs_, name, std::move(f)); }
    void register_face(const std::string& name, FaceFactory f) { put(faces_, name, std::move(f)); }
    void register_feature(const std::string& name, FeatureFactory f) { put(features_, name, std::move(f)); }
    void register_clip(const std::string& name, ClipFactory f) { put(clips_, name, std::move(f)); }
    void register_editor(const std::string& name, EditorFactory f) { put(editors_, name, std::move(f)); }

    void clear() {
        std::lock_guard lock(mutex_);
        codecs_.clear();
        faces_.clear();
        features_.clear();
        clips_.clear();
        editors_.clear();
    }

    template <typename F>
    F find(const std::map<std::string, F>& table, const std::string& name) const {
        std::lock_guard lock(mutex_);
        auto it = table.find(name);
        return it == table.end() ? F{} : it->second;
    }

    const std::map<std::string, CodecFactory>& codecs() const { return codecs_; }
    const std::map<std::string, FaceFactory>& faces() const { return faces_; }
    const std::map<std::string, FeatureFactory>& features() const { return features_; }
    const std::map<std::string, ClipFactory>& clips() const { return clips_; }
    const std::map<std::string, EditorFactory>& editors() const { return editors_; }

private:
    template <typename F>
    void put(std::map<std::string, F>& table, const std::string& name, F f) {
        std::lock_guard lock(mutex_);
        table[name] = std::move(f);
    }

    mutable std::mutex mutex_;
    std::map<std::string, CodecFactory> codecs_;
    std::map<std::string, FaceFactory> faces_;
    std::map<std::string, FeatureFactory> features_;
    std::map<std::string, ClipFactory> clips_;
    std::map<std::string, EditorFactory> editors_;
};

namespace detail {

// Identifiers that look like filesystem paths must exist; hub-style ids pass through.
inline bool weights_reachable(const std::string& weights) {
    if (weights.empty()) return true;
    const bool path_like = weights.front() == '/' || weights.starts_with("./") || weights.starts_with("../");
    return !path_like || std::filesystem::exists(weights);
}

}  // namespace detail

inline BackendBundle real_bundle(const RealBackendConfig& cfg, const ProviderRegistry& registry = ProviderRegistry::instance()) {
    std::vector<std::string> problems;
    auto check = [&](const char* role, const ComponentSpec& spec, bool registered) {
        if (spec.provider.empty()) {
            problems.push_back(std::string(role) + " (not configured)");
        } else if (!registered) {
            problems.push_back(std::string(role) + " (no provider named '" + spec.provider + "')");
        } else if (!detail::weights_reachable(spec.weights)) {
            problems.push_back(std::string(role) + " (weights not found: " + spec.weights + ")");
        }
    };
    auto codec_f = registry.find(registry.codecs(), cfg.codec.provider);
    auto face_f = registry.find(registry.faces(), cfg.face.provider);
    auto feat_f = registry.find(registry.features(), cfg.feature_extractor.provider);
    auto clip_f = registry.find(registry.clips(), cfg.clip.provider);
    auto editor_f = registry.find(registry.editors(), cfg.editor.provider);
    check("codec", cfg.codec, static_cast<bool>(codec_f));
    check("face", cfg.face, static_cast<bool>(face_f));
    check("feature_extractor", cfg.feature_extractor, static_cast<bool>(feat_f));
    check("clip", cfg.clip, static_cast<bool>(clip_f));
    check("editor", cfg.editor, static_cast<bool>(editor_f));
    if (!problems.empty()) {
        std::string msg = "real backend unavailable; missing components:";
        for (const auto& p : problems) msg += " " + p + ";";
        throw BackendError(msg);
    }

    BackendBundle b;
    b.codec = codec_f(cfg.codec);
    b.face = face_f(cfg.face);
    b.feat = feat_f(cfg.feature_extractor, cfg.feature_family);
    b.clip = clip_f(cfg.clip);
    b.editor = editor_f(cfg.editor);
    b.kind = BackendKind::real;
    b.description = "real(codec=" + cfg.codec.provider + ",face=" + cfg.face.provider + ",feat=" +
                    cfg.feature_extractor.provider + ":" + cfg.feature_family + ",clip=" + cfg.clip.provider +
                    ",editor=" + cfg.editor.provider + ")";
    b.validate();
    return b;
}

}  // namespace facelock
