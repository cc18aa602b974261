#pragma once

// Experiment configuration: an INI file with [backend], [attack], [edit], [purify] and
// [plan] sections. Unknown keys are rejected so typos do not silently fall back to defaults.

#include <cstdint>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "facelock/attacks.hpp"
#include "facelock/backends.hpp"
#include "facelock/harness/catalog.hpp"
#include "facelock/purification.hpp"
#include "facelock/real_backend.hpp"
#include "facelock/toy_backend.hpp"

namespace facelock::harness {

struct BackendConfig {
    BackendKind kind = BackendKind::toy;
    std::uint64_t toy_seed = 0;
    toy::FeatureFamily family = toy::FeatureFamily::vgg;
    RealBackendConfig real;
};

struct ExperimentPlan {
    std::filesystem::path dataset;
    std::vector<AttackName> methods{AttackName::facelock};
    PromptCatalog prompts = PromptCatalog::defaults();
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::vector<purification::PurifySpec> purifications{purification::PurifySpec{}};
    EditParams edit_params{32, 50, 1.5, 7.5};
    AttackConfig attack;
    BackendConfig backend;
    std::filesystem::path out_dir;  // empty: nothing is written to disk
    int jobs = 1;

    std::size_t cardinality(std::size_t n_images) const {
        return n_images * prompts.size() * (methods.size() + 1) * seeds.size() * purifications.size();
    }
};

inline BackendBundle make_bundle(const BackendConfig& cfg, int image_size) {
    if (cfg.kind == BackendKind::toy) return toy::make_toy_bundle(cfg.toy_seed, image_size, cfg.family);
    RealBackendConfig real = cfg.real;
    real.feature_family = toy::to_string(cfg.family);
    return real_bundle(real);
}

inline std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

template <class T, class F>
std::vector<T> parse_list(const std::string& text, F parse_one) {
    std::vector<T> out;
    for (const auto& s : split_list(text)) out.push_back(parse_one(s));
    return out;
}

inline std::uint64_t parse_u64(const std::string& s) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size() || s.front() == '-') throw ArgumentError("expected a non-negative integer, got '" + s + "'");
    return v;
}

inline int parse_int(const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) throw ArgumentError("expected an integer, got '" + s + "'");
    return v;
}

inline double parse_double(const std::string& s) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) throw ArgumentError("expected a number, got '" + s + "'");
    return v;
}

namespace detail {

using Ptree = boost::property_tree::ptree;

inline void check_keys(const Ptree& section, const std::string& name, const std::set<std::string>& allowed) {
    for (const auto& [k, v] : section) {
        if (!allowed.count(k)) throw ArgumentError("config: unknown key [" + name + "] " + k);
    }
}

inline const Ptree* section(const Ptree& root, const std::string& name) {
    auto it = root.find(name);
    return it == root.not_found() ? nullptr : &it->second;
}

inline void apply_backend(const Ptree& s, BackendConfig& b) {
    check_keys(s, "backend", {"kind", "seed", "feature_extractor", "feature_extractor_provider",
                              "feature_extractor_weights", "codec", "codec_weights", "face", "face_weights", "clip",
                              "clip_weights", "editor", "editor_weights"});
    if (auto v = s.get_optional<std::string>("kind")) {
        if (*v == "toy") b.kind = BackendKind::toy;
        else if (*v == "real") b.kind = BackendKind::real;
        else throw ArgumentError("config: backend.kind must be toy or real");
    }
    if (auto v = s.get_optional<std::string>("seed")) b.toy_seed = parse_u64(*v);
    if (auto v = s.get_optional<std::string>("feature_extractor")) b.family = toy::parse_feature_family(*v);
    auto comp = [&](const std::string& key, ComponentSpec& spec) {
        if (auto v = s.get_optional<std::string>(key)) spec.provider = *v;
        if (auto v = s.get_optional<std::string>(key + "_weights")) spec.weights = *v;
    };
    comp("codec", b.real.codec);
    comp("face", b.real.face);
    comp("clip", b.real.clip);
    comp("editor", b.real.editor);
    if (auto v = s.get_optional<std::string>("feature_extractor_provider")) b.real.feature_extractor.provider = *v;
    if (auto v = s.get_optional<std::string>("feature_extractor_weights")) b.real.feature_extractor.weights = *v;
}

inline void apply_attack(const Ptree& s, AttackConfig& a, std::vector<AttackName>* methods) {
    check_keys(s, "attack", {"name", "epsilon", "alpha", "steps", "lambda_latent", "lambda_aux", "losses", "cw_c",
                             "eot_beta", "eot_samples", "eot_transforms", "eot_rotate_degrees", "seed"});
    if (auto v = s.get_optional<std::string>("name"); v && methods) *methods = {parse_attack_name(*v)};
    if (auto v = s.get_optional<std::string>("epsilon")) a.epsilon = parse_double(*v);
    if (auto v = s.get_optional<std::string>("alpha")) a.alpha = parse_double(*v);
    if (auto v = s.get_optional<std::string>("steps")) a.steps = parse_int(*v);
    if (auto v = s.get_optional<std::string>("lambda_latent")) a.lambda_latent = parse_double(*v);
    if (auto v = s.get_optional<std::string>("lambda_aux")) a.lambda_aux = parse_double(*v);
    if (auto v = s.get_optional<std::string>("losses")) {
        a.loss_toggles.clear();
        for (const auto& n : split_list(*v)) a.loss_toggles.insert(parse_loss_name(n));
    }
    if (auto v = s.get_optional<std::string>("cw_c")) a.cw_c = parse_double(*v);
    if (auto v = s.get_optional<std::string>("eot_beta")) a.eot_beta = parse_double(*v);
    if (auto v = s.get_optional<std::string>("eot_samples")) a.eot_samples = parse_int(*v);
    if (auto v = s.get_optional<std::string>("eot_transforms")) {
        a.eot_transforms = parse_list<EotTransform>(*v, [](const std::string& t) { return parse_eot_transform(t); });
    }
    if (auto v = s.get_optional<std::string>("eot_rotate_degrees")) a.eot_rotate_degrees = parse_double(*v);
    if (auto v = s.get_optional<std::string>("seed")) a.rng = RngState(parse_u64(*v), a.rng.label());
}

inline void apply_edit(const Ptree& s, EditParams& e) {
    check_keys(s, "edit", {"image_size", "inference_steps", "image_guidance", "text_guidance"});
    if (auto v = s.get_optional<std::string>("image_size")) e.image_size = parse_int(*v);
    if (auto v = s.get_optional<std::string>("inference_steps")) e.inference_steps = parse_int(*v);
    if (auto v = s.get_optional<std::string>("image_guidance")) e.image_guidance = parse_double(*v);
    if (auto v = s.get_optional<std::string>("text_guidance")) e.text_guidance = parse_double(*v);
}

// Parameters shared by every purification of the plan; the label chooses the kind.
inline void apply_purify(const Ptree& s, purification::PurifySpec& p) {
    check_keys(s, "purify", {"blur_kernel", "blur_sigma", "rotate_min_degrees", "rotate_max_degrees", "jpeg_quality",
                             "brightness", "contrast", "saturation", "external_command", "external.command"});
    if (auto v = s.get_optional<std::string>("blur_kernel")) p.blur_kernel = parse_int(*v);
    if (auto v = s.get_optional<std::string>("blur_sigma")) p.blur_sigma = parse_double(*v);
    if (auto v = s.get_optional<std::string>("rotate_min_degrees")) p.rotate_min_degrees = parse_double(*v);
    if (auto v = s.get_optional<std::string>("rotate_max_degrees")) p.rotate_max_degrees = parse_double(*v);
    if (auto v = s.get_optional<std::string>("jpeg_quality")) p.jpeg_quality = parse_int(*v);
    if (auto v = s.get_optional<std::string>("brightness")) p.brightness = parse_double(*v);
    if (auto v = s.get_optional<std::string>("contrast")) p.contrast = parse_double(*v);
    if (auto v = s.get_optional<std::string>("saturation")) p.saturation = parse_double(*v);
    if (auto v = s.get_optional<std::string>("external_command")) p.external_command = *v;
    // "external.command" is a literal key here, not a nested path.
    if (auto v = s.get_optional<std::string>(Ptree::path_type("external.command", '/'))) p.external_command = *v;
}

}  // namespace detail

// Builds a purification from its label on top of shared parameters. An explicit
// quality in the label ("jpeg90") wins over [purify] jpeg_quality.
inline purification::PurifySpec purify_from_label(const std::string& label, const purification::PurifySpec& base) {
    auto parsed = purification::parse_label(label);
    auto spec = base;
    spec.kind = parsed.kind;
    if (parsed.kind == purification::Kind::jpeg && label != "jpeg") spec.jpeg_quality = parsed.jpeg_quality;
    spec.validate();
    return spec;
}

struct LoadedConfig {
    ExperimentPlan plan;
    purification::PurifySpec purify_base;
    std::vector<std::string> purification_labels{"none"};
    bool image_size_set = false;
};

inline LoadedConfig load_config(const std::filesystem::path& path) {
    detail::Ptree root;
    try {
        boost::property_tree::read_ini(path.string(), root);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ArgumentError("config: " + std::string(e.what()));
    }
    LoadedConfig lc;
    auto& plan = lc.plan;
    for (const auto& [name, sec] : root) {
        if (name != "backend" && name != "attack" && name != "edit" && name != "purify" && name != "plan") {
            throw ArgumentError("config: unknown section [" + name + "]");
        }
    }
    if (auto* s = detail::section(root, "backend")) detail::apply_backend(*s, plan.backend);
    if (auto* s = detail::section(root, "attack")) detail::apply_attack(*s, plan.attack, &plan.methods);
    if (auto* s = detail::section(root, "edit")) {
        lc.image_size_set = s->count("image_size") > 0;
        detail::apply_edit(*s, plan.edit_params);
    }
    if (!lc.image_size_set && plan.backend.kind == BackendKind::real) plan.edit_params.image_size = 512;
    if (auto* s = detail::section(root, "purify")) detail::apply_purify(*s, lc.purify_base);
    if (auto* s = detail::section(root, "plan")) {
        detail::check_keys(*s, "plan", {"dataset", "methods", "prompts", "prompt_ids", "seeds", "purifications", "out", "jobs"});
        const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
        auto resolve = [&](const std::string& p) {
            std::filesystem::path q(p);
            return q.is_absolute() ? q : base / q;
        };
        if (auto v = s->get_optional<std::string>("dataset")) plan.dataset = resolve(*v);
        if (auto v = s->get_optional<std::string>("methods")) {
            plan.methods = parse_list<AttackName>(*v, [](const std::string& n) { return parse_attack_name(n); });
        }
        if (auto v = s->get_optional<std::string>("prompts")) plan.prompts = PromptCatalog::load(resolve(*v));
        if (auto v = s->get_optional<std::string>("prompt_ids")) {
            plan.prompts = plan.prompts.select(parse_list<int>(*v, parse_int));
        }
        if (auto v = s->get_optional<std::string>("seeds")) plan.seeds = parse_list<std::uint64_t>(*v, parse_u64);
        if (auto v = s->get_optional<std::string>("purifications")) lc.purification_labels = split_list(*v);
        if (auto v = s->get_optional<std::string>("out")) plan.out_dir = resolve(*v);
        if (auto v = s->get_optional<std::string>("jobs")) plan.jobs = parse_int(*v);
    }
    plan.purifications.clear();
    for (const auto& l : lc.purification_labels) plan.purifications.push_back(purify_from_label(l, lc.purify_base));
    plan.attack.validate();
    plan.edit_params.validate();
    return lc;
}

// Stable text form of the attack settings, used for config hashes.
inline std::string canonical_string(const AttackConfig& a) {
    std::ostringstream o;
    o.precision(17);
    o << "epsilon=" << a.epsilon << ";alpha=" << a.alpha << ";steps=" << a.steps << ";lambda_latent=" << a.lambda_latent
      << ";lambda_aux=" << a.lambda_aux << ";losses=";
    for (auto l : a.loss_toggles) o << to_string(l) << ",";
    o << ";cw_c=" << a.cw_c << ";eot_beta=" << a.eot_beta << ";eot_samples=" << a.eot_samples << ";eot_transforms=";
    for (auto t : a.eot_transforms) o << to_string(t) << ",";
    o << ";eot_rotate_degrees=" << a.eot_rotate_degrees << ";seed=" << a.rng.seed() << ";label=" << a.rng.label();
    return o.str();
}

inline std::string canonical_string(const EditParams& e) {
    std::ostringstream o;
    o.precision(17);
    o << "image_size=" << e.image_size << ";inference_steps=" << e.inference_steps
      << ";image_guidance=" << e.image_guidance << ";text_guidance=" << e.text_guidance;
    return o.str();
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace facelock::harness
