#pragma once

// Perturbation generators: FaceLock and its design ladder (CVL, CVL-D, CVL-DP) plus the
// PhotoGuard encoder attack, its EOT variant, the untargeted encoder, VAE and CW-L2
// baselines. All L-inf attacks share one sign-PGD engine; CW uses a tanh
// reparametrisation with plain gradient descent.

#include <cmath>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "facelock/autodiff.hpp"
#include "facelock/backends.hpp"
#include "facelock/core.hpp"
#include "facelock/resample.hpp"

namespace facelock {

class AttackError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class LossName { fr, fe, latent, pixel, l2, encoder_targeted, encoder_untargeted, vae_target, eot };

inline std::string to_string(LossName n) {
    switch (n) {
        case LossName::fr: return "fr";
        case LossName::fe: return "fe";
        case LossName::latent: return "latent";
        case LossName::pixel: return "pixel";
        case LossName::l2: return "l2";
        case LossName::encoder_targeted: return "encoder_targeted";
        case LossName::encoder_untargeted: return "encoder_untargeted";
        case LossName::vae_target: return "vae_target";
        case LossName::eot: return "eot";
    }
    return "unknown";
}

inline LossName parse_loss_name(std::string_view s) {
    for (auto n : {LossName::fr, LossName::fe, LossName::latent, LossName::pixel, LossName::l2,
                   LossName::encoder_targeted, LossName::encoder_untargeted, LossName::vae_target, LossName::eot}) {
        if (s == to_string(n)) return n;
    }
    throw ArgumentError("unknown loss term '" + std::string(s) + "'");
}

enum class Direction { ascend, descend };

struct LossTerm {
    LossName name;
    double weight = 1.0;
    Direction direction = Direction::ascend;
};

enum class EotTransform { identity, blur, rotate };

inline std::string to_string(EotTransform t) {
    switch (t) {
        case EotTransform::identity: return "identity";
        case EotTransform::blur: return "blur";
        case EotTransform::rotate: return "rotate";
    }
    return "unknown";
}

inline EotTransform parse_eot_transform(std::string_view s) {
    if (s == "identity" || s == "none") return EotTransform::identity;
    if (s == "blur") return EotTransform::blur;
    if (s == "rotate") return EotTransform::rotate;
    throw ArgumentError("unknown EOT transform '" + std::string(s) + "' (expected identity, blur or rotate)");
}

struct AttackConfig {
    double epsilon = 0.02;
    double alpha = 0.003;
    int steps = 100;
    double lambda_latent = 0.2;
    // Weight on the auxiliary term: f_FE for FaceLock, the masked pixel norm for CVL-DP.
    double lambda_aux = 1.0;
    std::set<LossName> loss_toggles{LossName::fr, LossName::fe, LossName::latent};
    double cw_c = 1.0;
    double eot_beta = 0.1;
    int eot_samples = 2;
    std::vector<EotTransform> eot_transforms{EotTransform::blur, EotTransform::rotate};
    double eot_rotate_degrees = 10.0;
    RngState rng{0, "attack"};

    // Zero epsilon / alpha / steps are accepted as degenerate no-op configurations.
    void validate() const {
        if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw ArgumentError("AttackConfig: epsilon must be >= 0");
        if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ArgumentError("AttackConfig: alpha must be >= 0");
        if (steps < 0) throw ArgumentError("AttackConfig: steps must be >= 0");
        if (lambda_latent < 0.0 || lambda_aux < 0.0) throw ArgumentError("AttackConfig: lambda weights must be >= 0");
        if (cw_c < 0.0) throw ArgumentError("AttackConfig: cw_c must be >= 0");
        if (eot_beta < 0.0) throw ArgumentError("AttackConfig: eot_beta must be >= 0");
        if (eot_samples < 1) throw ArgumentError("AttackConfig: eot_samples must be >= 1");
    }
};

struct TraceStep {
    std::vector<std::pair<std::string, double>> terms;  // unweighted term values
    double objective = 0.0;                             // weighted total being optimised

    double term(std::string_view name) const {
        for (const auto& [n, v] : terms)
            if (n == name) return v;
        throw ArgumentError("TraceStep: no term '" + std::string(name) + "'");
    }
    bool has(std::string_view name) const {
        for (const auto& t : terms)
            if (t.first == name) return true;
        return false;
    }
};

struct ProtectionResult {
    ImageTensor protected_image;
    Perturbation perturbation;
    std::vector<TraceStep> loss_trace;
    std::string method_tag;
};

// Called once per step with the iterate the step's objective was evaluated at
// (the protected image for sign-PGD, the tanh-space image for CW).
using StepObserver = std::function<void(int step, const ImageTensor& iterate)>;

// ---- loss functions --------------------------------------------------------

inline ad::Var image_var(const ImageTensor& x) { return ad::Var::constant(ad::from_image(x)); }

// Negative face similarity; higher means more biometric disparity.
inline ad::Var fr_loss(const BackendBundle& b, const ad::Var& x_decoded, const ad::Var& x_src) {
    return ad::scale(b.face->similarity(x_decoded, x_src), -1.0);
}

inline double fr_loss(const BackendBundle& b, const ImageTensor& x_decoded, const ImageTensor& x_src) {
    require_valid(x_decoded, "fr_loss");
    require_valid(x_src, "fr_loss");
    return fr_loss(b, image_var(x_decoded), image_var(x_src)).item();
}

namespace detail {

inline ad::Var weighted_feature_distance(std::span<const double> weights, const std::vector<ad::Var>& fa,
                                         const std::vector<ad::Var>& fb) {
    if (fa.size() != fb.size() || fa.size() != weights.size()) {
        throw ArgumentError("fe_loss: feature/weight layer count mismatch");
    }
    ad::Var total;
    for (std::size_t l = 0; l < fa.size(); ++l) {
        const double w = weights[l] / static_cast<double>(fa[l].value().size());
        auto term = ad::scale(ad::squared_distance(fa[l], fb[l]), w);
        total = total.defined() ? ad::add(total, term) : term;
    }
    return total;
}

}  // namespace detail

// sum_l w_l * ||phi_l(a) - phi_l(b)||^2 / numel(phi_l)
inline ad::Var fe_loss(const BackendBundle& b, const ad::Var& x_decoded, const ad::Var& x_src) {
    return detail::weighted_feature_distance(b.feat->layer_weights(), b.feat->features(x_decoded), b.feat->features(x_src));
}

inline double fe_loss(const BackendBundle& b, const ImageTensor& x_decoded, const ImageTensor& x_src) {
    require_same_shape(x_decoded, x_src, "fe_loss");
    return fe_loss(b, image_var(x_decoded), image_var(x_src)).item();
}

// ||E(x') - z_src||^2
inline ad::Var latent_loss(const BackendBundle& b, const ad::Var& x_protected, const ad::Tensor& z_src) {
    return ad::squared_distance(b.codec->encode(x_protected), ad::Var::constant(z_src));
}

inline double latent_loss(const BackendBundle& b, const ImageTensor& x_protected, const ad::Tensor& z_src) {
    return latent_loss(b, image_var(x_protected), z_src).item();
}

// ---- shared sign-PGD engine ------------------------------------------------

struct SignPgdProblem {
    std::string method_tag;
    Direction direction = Direction::ascend;
    std::vector<LossTerm> terms;
    // Unweighted term values at x', in the order of `terms`.
    std::function<std::vector<ad::Var>(const ad::Var& x_prime, RngState& step_rng)> evaluate;
};

namespace detail {

inline void require_finite(double v, const std::string& tag, const std::string& what, int step) {
    if (!std::isfinite(v)) {
        throw AttackError(tag + ": non-finite " + what + " at step " + std::to_string(step));
    }
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Sum of +-w_i * l_i, where a term whose direction differs from the attack's enters negated.
inline ad::Var assemble_objective(const SignPgdProblem& p, const std::vector<ad::Var>& values, TraceStep& trace,
                                  int step) {
    ad::Var total;
    double objective = 0.0;
    for (std::size_t i = 0; i < p.terms.size(); ++i) {
        const auto& t = p.terms[i];
        const double v = values[i].item();
        require_finite(v, p.method_tag, "loss term '" + to_string(t.name) + "'", step);
        trace.terms.emplace_back(to_string(t.name), v);
        if (t.weight == 0.0) continue;
        const double signed_w = t.direction == p.direction ? t.weight : -t.weight;
        auto contrib = signed_w == 1.0 ? values[i] : ad::scale(values[i], signed_w);
        total = total.defined() ? ad::add(total, contrib) : contrib;
        objective += signed_w * v;
    }
    trace.objective = total.defined() ? total.item() : 0.0;
    return total;
}

inline ImageTensor initial_protected(const ImageTensor& x, const AttackConfig& cfg) {
    // N(0, I) scaled by eps/3, then projected, so the start point honours the budget.
    RngState init = cfg.rng.derive("init");
    ImageTensor delta(x.height(), x.width());
    for (double& v : delta.values()) v = init.normal() * cfg.epsilon / 3.0;
    return project_to_budget(x, delta, cfg.epsilon);
}

inline ProtectionResult finish(const ImageTensor& x, ImageTensor protected_image, double epsilon,
                               std::vector<TraceStep> trace, std::string tag) {
    ProtectionResult r;
    r.perturbation.delta = subtract(protected_image, x);
    r.perturbation.epsilon = epsilon;
    r.perturbation.method_tag = tag;
    r.protected_image = std::move(protected_image);
    r.loss_trace = std::move(trace);
    r.method_tag = std::move(tag);
    return r;
}

}  // namespace detail

inline ProtectionResult run_sign_pgd(const ImageTensor& x, const AttackConfig& cfg, const SignPgdProblem& p,
                                     const StepObserver& observer = {}) {
    cfg.validate();
    require_valid(x, p.method_tag);
    ImageTensor protected_image = detail::initial_protected(x, cfg);
    RngState step_rng = cfg.rng.derive("steps");
    const double step_sign = p.direction == Direction::ascend ? 1.0 : -1.0;

    std::vector<TraceStep> trace;
    trace.reserve(cfg.steps);
    for (int step = 0; step < cfg.steps; ++step) {
        if (observer) observer(step, protected_image);
        auto xv = ad::Var::leaf(ad::from_image(protected_image));
        auto values = p.evaluate(xv, step_rng);
        TraceStep ts;
        auto total = detail::assemble_objective(p, values, ts, step);
        trace.push_back(std::move(ts));

        ImageTensor delta = subtract(protected_image, x);
        if (total.defined() && total.requires_grad()) {
            const ad::Tensor g = ad::gradient(total, xv);
            for (int yy = 0; yy < x.height(); ++yy)
                for (int xx = 0; xx < x.width(); ++xx)
                    for (int c = 0; c < 3; ++c) {
                        const double gv = g.at(c, yy, xx);
                        detail::require_finite(gv, p.method_tag, "gradient", step);
                        delta.at(yy, xx, c) += step_sign * cfg.alpha * detail::sign(gv);
                    }
        }
        protected_image = project_to_budget(x, delta, cfg.epsilon);
    }
    return detail::finish(x, std::move(protected_image), cfg.epsilon, std::move(trace), p.method_tag);
}

// ---- FaceLock and the design ladder ----------------------------------------

// Maximises l_FR + lambda_aux * l_FE + lambda_latent * l_L on the codec round trip of x'.
// The returned problem owns everything it needs and can be evaluated on its own.
inline SignPgdProblem facelock_problem(const BackendBundle& b, const ImageTensor& x, const AttackConfig& cfg) {
    require_valid(x, "facelock");
    const auto src = image_var(x);
    const auto z_src = ad::Var::constant(b.codec->encode(x));
    const auto src_embedding = ad::Var::constant(b.face->embed(src).value());
    std::vector<ad::Var> src_features;
    for (const auto& f : b.feat->features(src)) src_features.push_back(ad::Var::constant(f.value()));

    const bool use_fr = cfg.loss_toggles.contains(LossName::fr);
    const bool use_fe = cfg.loss_toggles.contains(LossName::fe);
    const bool use_latent = cfg.loss_toggles.contains(LossName::latent);

    SignPgdProblem p;
    p.method_tag = "facelock";
    if (use_fr) p.terms.push_back({LossName::fr, 1.0, Direction::ascend});
    if (use_fe) p.terms.push_back({LossName::fe, cfg.lambda_aux, Direction::ascend});
    if (use_latent) p.terms.push_back({LossName::latent, cfg.lambda_latent, Direction::ascend});
    if (p.terms.empty()) throw ArgumentError("facelock: at least one of fr, fe, latent must be enabled");

    p.evaluate = [b, z_src, src_embedding, src_features, use_fr, use_fe, use_latent](const ad::Var& xp, RngState&) {
        std::vector<ad::Var> out;
        const auto z = b.codec->encode(xp);
        const auto decoded = b.codec->decode(z);
        if (use_fr) out.push_back(ad::scale(ad::cosine_similarity(b.face->embed(decoded), src_embedding), -1.0));
        if (use_fe) {
            out.push_back(detail::weighted_feature_distance(b.feat->layer_weights(), b.feat->features(decoded), src_features));
        }
        if (use_latent) out.push_back(ad::squared_distance(z, z_src));
        return out;
    };
    return p;
}

// Weighted objective of `p` at x' as a differentiable scalar, plus its trace entry.
inline ad::Var problem_objective(const SignPgdProblem& p, const ad::Var& x_prime, RngState& rng, TraceStep* trace = nullptr) {
    TraceStep ts;
    auto total = detail::assemble_objective(p, p.evaluate(x_prime, rng), ts, 0);
    if (trace) *trace = std::move(ts);
    return total;
}

inline ProtectionResult facelock_protect(const BackendBundle& b, const ImageTensor& x, const AttackConfig& cfg,
                                         const StepObserver& observer = {}) {
    return run_sign_pgd(x, cfg, facelock_problem(b, x, cfg), observer);
}

// Design I: attack the face recogniser directly, no codec in the loop.
inline ProtectionResult cvl_attack(const BackendBundle& b, const ImageTensor& x, const AttackConfig& cfg,
                                   const StepObserver& observer = {}) {
    require_valid(x, "cvl");
    const ad::Var src_embedding = ad::Var::constant(b.face->embed(image_var(x)).value());
    SignPgdProblem p;
    p.method_tag = "cvl";
    p.terms = {{LossName::fr, 1.0, Direction::ascend}};
    p.evaluate = [&](const ad::Var& xp, RngState&) {
        return std::vector<ad::Var>{ad::scale(ad::cosine_similarity(b.face->embed(xp), src_embedding), -1.0)};
    };
    return run_sign_pgd(x, cfg, p, observer);
}

// Design II: f_FR on the codec round trip.
inline ProtectionResult cvl_d_attack(const BackendBundle& b, const ImageTensor& x, const AttackConfig& cfg,
                                     const StepObserver& observer = {}) {
    require_valid(x, "cvl_d");
    const ad::Var src_embedding = ad::Var::constant(b.face->embed(image_var(x)).value());
    SignPgdProblem p;
    p.method_tag = "cvl_d";
    p.terms = {{LossName::fr, 1.0, Direction::ascend}};
    p.evaluate = [&](const ad::Var& xp, RngState&) {
        const auto decoded = b.codec->decode(b.codec->encode(xp));
        return std::vector<ad::Var>{ad::scale(ad::cosine_similarity(b.face->embed(decoded), src_embedding), -1.0)};
    };
    return run_sign_pgd(x, cfg, p, observer);
}

// Design III: Design II plus lambda_aux * ||delta (.) m||_2 over the facial region m.
// Pass `mask` to override the detector (tests use an all-zero mask).
inline ProtectionResult cvl_dp_attack(const BackendBundle& b, const ImageTensor& x, const AttackConfig& cfg,
                                      std::optional<FaceMask> mask = std::nullopt, const StepObserver& observer = {}) {
    require_valid(x, "cvl_dp");
    const FaceMask m = mask ? *mask : face_region_mask(*b.face, x);
    if (m.height != x.height() || m.width != x.width()) throw ArgumentError("cvl_dp: mask shape does not match image");
    const ad::Var mask_var = ad::Var::constant(m.as_image_tensor());
    const ad::Var src = image_var(x);
    const ad::Var src_embedding = ad::Var::constant(b.face->embed(src).value());
    SignPgdProblem p;
    p.method_tag = "cvl_dp";
    p.terms = {{LossName::fr, 1.0, Direction::ascend}, {LossName::pixel, cfg.lambda_aux, Direction::ascend}};
    p.evaluate = [&](const ad::Var& xp, RngState&) {
        const auto decoded = b.codec->decode(b.codec->encode(xp));
        auto fr = ad::scale(ad::cosine_similarity(b.face->embed(decoded), src_embedding), -1.0);
        auto pixel = ad::l2_norm(ad::mul(ad::sub(xp, src), mask_var));
        return std::vector<ad::Var>{fr, pixel};
    };
    return run_sign_pgd(x, cfg, p, observer);
}

// ---- baselines -------------------------------------------------------------

inline ImageTensor gray_target(const ImageTensor& like) { return ImageTensor(like.height(), like.width(), 0.5); }

// PhotoGuard encoder attack: descend ||E(x') - E(x_target)||^2.
inline ProtectionResult encoder_attack_targeted(const BackendBundle& b, const ImageTensor& x,
                                                const std::optional<ImageTensor>& x_target, const AttackConfig& cfg,
                                                const StepObserver& observer = {}) {
    require_valid(x, "photoguard");
    const ImageTensor target = x_target ? *x_target : gray_target(x);
    require_same_shape(x, target, "photoguard");
    const ad::Var z_target = ad::Var::constant(b.codec->encode(target));
    SignPgdProblem p;
    p.method_tag = "photoguard";
    p.direction = Direction::descend;
    p.terms = {{LossName::encoder_targeted, 1.0, Direction::descend}};
    p.evaluate = [&](const ad::Var& xp, RngState&) {
        return std::vector<ad::Var>{ad::squared_distance(b.codec->encode(xp), z_target)};
    };
    return run_sign_pgd(x, cfg, p, observer);
}

// Ascend ||E(x') - E(x)||^2.
inline ProtectionResult encoder_attack_untargeted(const BackendBundle& b, const ImageTensor& x, const AttackConfig& cfg,
                                                  const StepObserver& observer = {}) {
    require_valid(x, "untargeted_encoder");
    const ad::Var z_src = ad::Var::constant(b.codec->encode(x));
    SignPgdProblem p;
    p.method_tag = "untargeted_encoder";
    p.terms = {{LossName::encoder_untargeted, 1.0, Direction::ascend}};
    p.evaluate = [&](const ad::Var& xp, RngState&) {
        return std::vector<ad::Var>{ad::squared_distance(b.codec->encode(xp), z_src)};
    };
    return run_sign_pgd(x, cfg, p, observer);
}

// Descend ||D(E(x')) - x_target||^2.
inline ProtectionResult vae_attack(const BackendBundle& b, const ImageTensor& x,
                                   const std::optional<ImageTensor>& x_target, const AttackConfig& cfg,
                                   const StepObserver& observer = {}) {
    require_valid(x, "vae");
    const ImageTensor target = x_target ? *x_target : gray_target(x);
    require_same_shape(x, target, "vae");
    const ad::Var target_var = image_var(target);
    SignPgdProblem p;
    p.method_tag = "vae";
    p.direction = Direction::descend;
    p.terms = {{LossName::vae_target, 1.0, Direction::descend}};
    p.evaluate = [&](const ad::Var& xp, RngState&) {
        return std::vector<ad::Var>{ad::squared_distance(b.codec->decode(b.codec->encode(xp)), target_var)};
    };
    return run_sign_pgd(x, cfg, p, observer);
}

// PhotoGuard's expectation-over-transformation variant: ascend
//   mean_s ||E(f_s(x')) - E(x)||^2 - beta * ||x' - x||^2
// with cfg.eot_samples transforms drawn per evaluation from `transforms`. Each evaluation
// is a Monte Carlo estimate; fix the RngState to compare two points on common draws.
inline SignPgdProblem eot_problem(const BackendBundle& b, const ImageTensor& x, const AttackConfig& cfg,
                                  const std::vector<EotTransform>& transforms) {
    require_valid(x, "eot_encoder");
    if (transforms.empty()) throw ArgumentError("eot_encoder: transform set must not be empty");
    const int h = x.height(), w = x.width();
    const ad::Var src = image_var(x);
    const ad::Var z_src = ad::Var::constant(b.codec->encode(x));
    const auto blur = resample::gaussian_blur(h, w, 5, 1.5);
    const int samples = cfg.eot_samples;
    const double max_degrees = cfg.eot_rotate_degrees;

    SignPgdProblem p;
    p.method_tag = "eot_encoder";
    p.terms = {{LossName::eot, 1.0, Direction::ascend}, {LossName::l2, cfg.eot_beta, Direction::descend}};
    p.evaluate = [b, src, z_src, blur, transforms, samples, max_degrees, h, w](const ad::Var& xp, RngState& rng) {
        ad::Var acc;
        for (int s = 0; s < samples; ++s) {
            const EotTransform t = transforms[rng.index(transforms.size())];
            ad::Var view = xp;
            if (t == EotTransform::blur) {
                view = ad::resample(xp, blur);
            } else if (t == EotTransform::rotate) {
                const double deg = rng.uniform(-max_degrees, max_degrees);
                view = ad::resample(xp, resample::rotation(h, w, deg));
            }
            auto d = ad::squared_distance(b.codec->encode(view), z_src);
            acc = acc.defined() ? ad::add(acc, d) : d;
        }
        auto expectation = samples == 1 ? acc : ad::scale(acc, 1.0 / samples);
        return std::vector<ad::Var>{expectation, ad::squared_distance(xp, src)};
    };
    return p;
}

inline ProtectionResult eot_encoder_attack(const BackendBundle& b, const ImageTensor& x, const AttackConfig& cfg,
                                           const std::vector<EotTransform>& transforms,
                                           const StepObserver& observer = {}) {
    return run_sign_pgd(x, cfg, eot_problem(b, x, cfg, transforms), observer);
}

// Carlini-Wagner L2 on the encoder: x' = (tanh(w)+1)/2 with w initialised to 0,
// gradient descent on ||x'-x||^2 + c * (-||E(x')-E(x)||^2), then an L-inf clip to eps.
inline ProtectionResult cw_l2_attack(const BackendBundle& b, const ImageTensor& x, const AttackConfig& cfg,
                                     const StepObserver& observer = {}) {
    cfg.validate();
    require_valid(x, "cw_l2");
    const std::string tag = "cw_l2";
    const ad::Var src = image_var(x);
    const ad::Var z_src = ad::Var::constant(b.codec->encode(x));
    ad::Tensor w(ad::Shape{3, x.height(), x.width()}, 0.0);

    auto to_unit = [](const ad::Var& wv) { return ad::scale(ad::add_scalar(ad::tanh(wv), 1.0), 0.5); };

    std::vector<TraceStep> trace;
    trace.reserve(cfg.steps);
    for (int step = 0; step < cfg.steps; ++step) {
        auto wv = ad::Var::leaf(w);
        auto xp = to_unit(wv);
        if (observer) observer(step, ad::to_image(xp.value()));
        auto l2 = ad::squared_distance(xp, src);
        auto latent = ad::scale(ad::squared_distance(b.codec->encode(xp), z_src), -1.0);
        TraceStep ts;
        detail::require_finite(l2.item(), tag, "loss term 'l2'", step);
        detail::require_finite(latent.item(), tag, "loss term 'latent'", step);
        ts.terms = {{"l2", l2.item()}, {"latent", latent.item()}};
        auto total = cfg.cw_c == 0.0 ? l2 : ad::add(l2, ad::scale(latent, cfg.cw_c));
        ts.objective = total.item();
        trace.push_back(std::move(ts));
        const ad::Tensor g = ad::gradient(total, wv);
        for (std::size_t i = 0; i < w.size(); ++i) {
            detail::require_finite(g[i], tag, "gradient", step);
            w[i] -= cfg.alpha * g[i];
        }
    }
    const ImageTensor x_prime = ad::to_image(to_unit(ad::Var::constant(w)).value());
    const ImageTensor delta = clip_linf(Perturbation{subtract(x_prime, x), cfg.epsilon, tag}, cfg.epsilon).delta;
    return detail::finish(x, project_to_budget(x, delta, cfg.epsilon), cfg.epsilon, std::move(trace), tag);
}

// ---- dispatch ---------------------------------------------------------------

enum class AttackName { facelock, cvl, cvl_d, cvl_dp, photoguard, untargeted_encoder, vae, cw_l2, eot_encoder };

inline constexpr AttackName kAllAttacks[] = {AttackName::facelock,   AttackName::cvl,
                                             AttackName::cvl_d,      AttackName::cvl_dp,
                                             AttackName::photoguard, AttackName::untargeted_encoder,
                                             AttackName::vae,        AttackName::cw_l2,
                                             AttackName::eot_encoder};

inline std::string to_string(AttackName a) {
    switch (a) {
        case AttackName::facelock: return "facelock";
        case AttackName::cvl: return "cvl";
        case AttackName::cvl_d: return "cvl_d";
        case AttackName::cvl_dp: return "cvl_dp";
        case AttackName::photoguard: return "photoguard";
        case AttackName::untargeted_encoder: return "untargeted_encoder";
        case AttackName::vae: return "vae";
        case AttackName::cw_l2: return "cw_l2";
        case AttackName::eot_encoder: return "eot_encoder";
    }
    return "unknown";
}

inline AttackName parse_attack_name(std::string_view s) {
    for (auto a : kAllAttacks)
        if (s == to_string(a)) return a;
    throw ArgumentError("unknown attack '" + std::string(s) +
                        "' (expected facelock, cvl, cvl_d, cvl_dp, photoguard, untargeted_encoder, vae, cw_l2, "
                        "eot_encoder)");
}

inline Direction attack_direction(AttackName a) {
    switch (a) {
        case AttackName::photoguard:
        case AttackName::vae:
        case AttackName::cw_l2: return Direction::descend;
        default: return Direction::ascend;
    }
}

// The scalar used for endpoint-improvement checks: l_FR + l_FE for FaceLock (the
// latent regulariser is excluded), the optimised objective otherwise.
inline double improvement_objective(AttackName a, const TraceStep& step) {
    if (a == AttackName::facelock) {
        double v = 0.0;
        if (step.has("fr")) v += step.term("fr");
        if (step.has("fe")) v += step.term("fe");
        return v;
    }
    return step.objective;
}

// Which ingredients each design uses, for ablation tables.
struct DesignComponents {
    bool cvl = false;
    bool diffusion = false;
    bool pixel = false;
    bool feature = false;
};

inline DesignComponents design_components(AttackName a) {
    switch (a) {
        case AttackName::cvl: return {true, false, false, false};
        case AttackName::cvl_d: return {true, true, false, false};
        case AttackName::cvl_dp: return {true, true, true, false};
        case AttackName::facelock: return {true, true, false, true};
        default: throw ArgumentError(to_string(a) + " is not one of the design-ladder methods");
    }
}

inline ProtectionResult protect(const BackendBundle& b, AttackName a, const ImageTensor& x, const AttackConfig& cfg,
                                const std::optional<ImageTensor>& target = std::nullopt,
                                const StepObserver& observer = {}) {
    switch (a) {
        case AttackName::facelock: return facelock_protect(b, x, cfg, observer);
        case AttackName::cvl: return cvl_attack(b, x, cfg, observer);
        case AttackName::cvl_d: return cvl_d_attack(b, x, cfg, observer);
        case AttackName::cvl_dp: return cvl_dp_attack(b, x, cfg, std::nullopt, observer);
        case AttackName::photoguard: return encoder_attack_targeted(b, x, target, cfg, observer);
        case AttackName::untargeted_encoder: return encoder_attack_untargeted(b, x, cfg, observer);
        case AttackName::vae: return vae_attack(b, x, target, cfg, observer);
        case AttackName::cw_l2: return cw_l2_attack(b, x, cfg, observer);
        case AttackName::eot_encoder: return eot_encoder_attack(b, x, cfg, cfg.eot_transforms, observer);
    }
    throw ArgumentError("protect: unhandled attack");
}

}  // namespace facelock
