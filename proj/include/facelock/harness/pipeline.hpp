#pragma once

// protect -> (purify) -> edit -> evaluate over an ExperimentPlan.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "facelock/attacks.hpp"
#include "facelock/harness/catalog.hpp"
#include "facelock/harness/config.hpp"
#include "facelock/harness/records.hpp"
#include "facelock/harness/report.hpp"
#include "facelock/image_io.hpp"
#include "facelock/metrics.hpp"
#include "facelock/purification.hpp"
#include "facelock/resample.hpp"

namespace facelock::harness {

namespace fs = std::filesystem;

// Warnings collected during a run. Thread-safe; optionally echoed to stderr.
class RunLog {
public:
    explicit RunLog(bool echo = false) : echo_(echo) {}

    void warn(const std::string& msg) {
        std::lock_guard lock(mutex_);
        if (echo_) std::cerr << "warning: " << msg << "\n";
        warnings_.push_back(msg);
    }
    std::vector<std::string> warnings() const {
        std::lock_guard lock(mutex_);
        return warnings_;
    }

private:
    bool echo_;
    mutable std::mutex mutex_;
    std::vector<std::string> warnings_;
};

// Runs fn(0..n-1) on up to `jobs` threads. Results must be written by index so the
// outcome does not depend on scheduling. The first exception is rethrown.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& fn) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = n;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

// ---- dataset ---------------------------------------------------------------

struct DatasetImage {
    std::string id;  // file stem
    ImageTensor image;
};

inline ImageTensor resize_to(const ImageTensor& x, int size) {
    if (x.height() == size && x.width() == size) return x;
    return clamp_pixels(resample::apply(x, *resample::resize_bilinear(x.height(), x.width(), size, size)));
}

inline bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

// PNG/JPEG files sorted by name; unreadable ones are skipped with a warning.
inline std::vector<DatasetImage> load_dataset(const fs::path& dir, int image_size, RunLog& log) {
    if (!fs::is_directory(dir)) throw ArgumentError("dataset path " + dir.string() + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && has_image_extension(e.path())) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<DatasetImage> out;
    for (const auto& f : files) {
        try {
            out.push_back({f.stem().string(), resize_to(io::read_image(f), image_size)});
        } catch (const std::exception& e) {
            log.warn("skipping " + f.filename().string() + ": " + e.what());
        }
    }
    if (out.empty()) throw ArgumentError("dataset " + dir.string() + " contains no readable images");
    return out;
}

inline std::vector<DatasetImage> load_inputs(const fs::path& path, int image_size, RunLog& log) {
    if (fs::is_directory(path)) return load_dataset(path, image_size, log);
    return {{path.stem().string(), resize_to(io::read_image(path), image_size)}};
}

// ---- protection ------------------------------------------------------------

struct ProtectedImage {
    std::string image_id;
    AttackName method = AttackName::facelock;
    ProtectionResult result;
    std::vector<std::string> flags;
};

struct ProtectionSet {
    std::vector<ProtectedImage> items;

    const ProtectedImage& get(const std::string& image_id, AttackName method) const {
        for (const auto& p : items)
            if (p.image_id == image_id && p.method == method) return p;
        throw ArgumentError("no protection for " + image_id + " / " + to_string(method));
    }
};

inline AttackConfig attack_config_for(const AttackConfig& base, AttackName method, const std::string& image_id) {
    AttackConfig cfg = base;
    cfg.rng = RngState(base.rng.seed(), base.rng.label() + "/" + to_string(method) + "/" + image_id);
    return cfg;
}

inline nlohmann::ordered_json trace_step_json(const TraceStep& s) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [n, v] : s.terms) j[n] = v;
    j["objective"] = s.objective;
    return j;
}

inline nlohmann::ordered_json sidecar_json(const ProtectedImage& p, const AttackConfig& cfg, const BackendBundle& b) {
    nlohmann::ordered_json j;
    j["image_id"] = p.image_id;
    j["method"] = to_string(p.method);
    j["backend"] = b.description;
    j["epsilon"] = cfg.epsilon;
    j["config"] = canonical_string(cfg);
    j["config_hash"] = hex64(fnv1a(canonical_string(cfg) + "|" + b.description + "|" + to_string(p.method)));
    j["linf"] = p.result.perturbation.linf();
    nlohmann::ordered_json trace;
    trace["steps"] = p.result.loss_trace.size();
    if (!p.result.loss_trace.empty()) {
        trace["first"] = trace_step_json(p.result.loss_trace.front());
        trace["last"] = trace_step_json(p.result.loss_trace.back());
    }
    j["trace"] = std::move(trace);
    j["flags"] = p.flags;
    return j;
}

inline void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot write " + path.string());
    out << text;
}

// One protection per (image, method). With an output directory, writes
// protected/<method>/<image>.png and a JSON sidecar next to it.
inline ProtectionSet run_protection(const ExperimentPlan& plan, const BackendBundle& bundle,
                                    const std::vector<DatasetImage>& images, RunLog& log) {
    ProtectionSet set;
    for (const auto& img : images)
        for (auto m : plan.methods) set.items.push_back({img.id, m, {}, {}});
    parallel_for(set.items.size(), plan.jobs, [&](std::size_t i) {
        auto& item = set.items[i];
        const auto& src = std::find_if(images.begin(), images.end(), [&](const DatasetImage& d) { return d.id == item.image_id; })->image;
        const auto cfg = attack_config_for(plan.attack, item.method, item.image_id);
        if (item.method == AttackName::cvl_dp && !bundle.face->region_mask(src).face_found) {
            item.flags.push_back("no_face_detected");
            log.warn(item.image_id + ": no face detected, cvl_dp uses the whole image as mask");
        }
        item.result = protect(bundle, item.method, src, cfg);
        if (!plan.out_dir.empty()) {
            const auto base = plan.out_dir / "protected" / to_string(item.method) / item.image_id;
            io::write_png(fs::path(base).replace_extension(".png"), item.result.protected_image);
            write_text(fs::path(base).replace_extension(".json"), sidecar_json(item, cfg, bundle).dump(2) + "\n");
        }
    });
    return set;
}

// ---- editing ---------------------------------------------------------------

struct EditOutput {
    std::string image_id;
    const PromptEntry* prompt = nullptr;
    std::string method;  // kNoDefense or an attack name
    std::uint64_t seed = 0;
    std::size_t purification = 0;  // index into plan.purifications
    std::string purification_label;
    std::string edit_stream;
    ImageTensor edited;
    std::vector<std::string> flags;
};

// Stream labels depend only on (image, prompt, seed[, purification]) so the unprotected
// baseline and every defense share them.
inline RngState edit_stream(std::uint64_t seed, const std::string& image_id, int prompt_id) {
    return RngState(seed, "edit/" + image_id + "/p" + std::to_string(prompt_id));
}

inline RngState purify_stream(std::uint64_t seed, const std::string& image_id, const std::string& label) {
    return RngState(seed, "purify/" + image_id + "/" + label);
}

inline std::uint64_t edit_cache_key(const ImageTensor& input, const std::string& prompt, const EditParams& params,
                                    const RngState& stream, const std::string& backend) {
    auto h = fnv1a_bytes(std::as_bytes(std::span(input.values().data(), input.values().size())));
    h = fnv1a(prompt + "|" + canonical_string(params) + "|" + std::to_string(stream.seed()) + "|" + stream.label() + "|" +
                  backend,
              h);
    return h;
}

// Edits (after optional purification) for every tuple, in the fixed order
// image, prompt, method (no-defense first), seed, purification. Outputs are quantised
// to 8 bits, matching what an editor would hand back as an image file.
inline std::vector<EditOutput> run_edits(const ExperimentPlan& plan, const BackendBundle& bundle,
                                         const std::vector<DatasetImage>& images, const ProtectionSet& protections,
                                         RunLog& log) {
    std::vector<EditOutput> out;
    std::vector<std::string> methods{kNoDefense};
    for (auto m : plan.methods) methods.push_back(to_string(m));
    for (const auto& img : images)
        for (const auto& prompt : plan.prompts.entries)
            for (const auto& m : methods)
                for (auto seed : plan.seeds)
                    for (std::size_t p = 0; p < plan.purifications.size(); ++p) {
                        EditOutput e;
                        e.image_id = img.id;
                        e.prompt = &prompt;
                        e.method = m;
                        e.seed = seed;
                        e.purification = p;
                        e.purification_label = purification::label(plan.purifications[p]);
                        out.push_back(std::move(e));
                    }

    const fs::path cache_dir = plan.out_dir.empty() ? fs::path() : plan.out_dir / "cache" / "edits";
    parallel_for(out.size(), plan.jobs, [&](std::size_t i) {
        auto& e = out[i];
        const auto& src = std::find_if(images.begin(), images.end(), [&](const DatasetImage& d) { return d.id == e.image_id; })->image;
        ImageTensor input = src;
        if (e.method != kNoDefense) {
            const auto& prot = protections.get(e.image_id, parse_attack_name(e.method));
            input = prot.result.protected_image;
            e.flags = prot.flags;
        }
        auto spec = plan.purifications[e.purification];
        spec.rng = purify_stream(e.seed, e.image_id, e.purification_label);
        std::vector<std::string> warnings;
        input = purification::purify(input, spec, &warnings);
        for (const auto& w : warnings) {
            log.warn(e.image_id + "/" + e.method + ": " + w);
            e.flags.push_back("purifier_unavailable");
        }

        const auto stream = edit_stream(e.seed, e.image_id, e.prompt->id);
        e.edit_stream = stream.label() + "#" + std::to_string(stream.seed());
        fs::path cached;
        if (!cache_dir.empty()) {
            cached = cache_dir / (hex64(edit_cache_key(input, e.prompt->text, plan.edit_params, stream, bundle.description)) + ".png");
            if (fs::exists(cached)) {
                try {
                    e.edited = io::read_png(cached);
                    if (e.edited.height() == input.height() && e.edited.width() == input.width()) return;
                } catch (const std::exception&) {
                }
                log.warn("ignoring unreadable cache entry " + cached.string());
            }
        }
        e.edited = io::quantize8(bundle.editor->edit(input, e.prompt->text, plan.edit_params, stream));
        if (!cached.empty()) {
            // Write to a unique temporary name first so concurrent runs never see partial files.
            auto tmp = cached;
            tmp += ".tmp" + std::to_string(i);
            io::write_png(tmp, e.edited);
            fs::rename(tmp, cached);
        }
    });
    return out;
}

// ---- evaluation ------------------------------------------------------------

// One record per edit. PSNR/SSIM/LPIPS compare with the no-defense edit of the same
// (image, prompt, seed, purification) and are null on the no-defense rows.
inline std::vector<EvaluationRecord> evaluate(const ExperimentPlan& plan, const BackendBundle& bundle,
                                              const std::vector<DatasetImage>& images,
                                              const std::vector<EditOutput>& edits,
                                              const std::map<std::string, std::string>& tags = {}) {
    using metrics::Metric;
    std::map<std::tuple<std::string, int, std::uint64_t, std::size_t>, const EditOutput*> baseline;
    for (const auto& e : edits)
        if (e.method == kNoDefense) baseline[{e.image_id, e.prompt->id, e.seed, e.purification}] = &e;

    std::vector<EvaluationRecord> records(edits.size());
    parallel_for(edits.size(), plan.jobs, [&](std::size_t i) {
        const auto& e = edits[i];
        const auto& src = std::find_if(images.begin(), images.end(), [&](const DatasetImage& d) { return d.id == e.image_id; })->image;
        auto& r = records[i];
        r.image_id = e.image_id;
        r.prompt_id = e.prompt->id;
        r.prompt_category = to_string(e.prompt->category);
        r.method = e.method;
        r.seed = e.seed;
        r.purification = e.purification_label;
        r.edit_stream = e.edit_stream;
        r.tags = tags;
        r.flags = e.flags;
        r.record_id = make_record_id(r.image_id, r.prompt_id, r.method, r.seed, r.purification, tags);

        auto flag = [&](const std::optional<std::string>& f) {
            if (f) r.flags.push_back(*f);
        };
        const auto cs = metrics::clip_s(bundle, src, e.edited, e.prompt->text);
        r.set(Metric::clip_s, cs.value);
        flag(cs.flag);
        r.set(Metric::clip_i, metrics::clip_i(bundle, src, e.edited));
        r.set(Metric::fr, metrics::fr_score(bundle, src, e.edited));
        if (e.prompt->description) {
            const auto sd = metrics::clip_sd(bundle, e.edited, *e.prompt->description);
            r.set(Metric::clip_sd, sd.value);
            flag(sd.flag);
        } else {
            r.flags.push_back("clip_sd_no_description");
        }
        if (e.method != kNoDefense) {
            auto it = baseline.find({e.image_id, e.prompt->id, e.seed, e.purification});
            if (it == baseline.end()) throw ArgumentError("evaluate: missing no-defense edit for " + r.record_id);
            const auto& ref = it->second->edited;
            const auto ps = metrics::psnr_scored(ref, e.edited);
            r.set(Metric::psnr, ps.value);
            flag(ps.flag);
            r.set(Metric::ssim, metrics::ssim(ref, e.edited));
            r.set(Metric::lpips, metrics::lpips(bundle, ref, e.edited));
        }
    });
    return records;
}

// ---- whole plans and the table shapes ---------------------------------------

struct PlanResult {
    std::vector<DatasetImage> images;
    ProtectionSet protections;
    std::vector<EvaluationRecord> records;
};

inline PlanResult run_plan(const ExperimentPlan& plan, const BackendBundle& bundle, const std::vector<DatasetImage>& images,
                           RunLog& log, const std::map<std::string, std::string>& tags = {}) {
    PlanResult res;
    res.images = images;
    res.protections = run_protection(plan, bundle, images, log);
    const auto edits = run_edits(plan, bundle, images, res.protections, log);
    res.records = evaluate(plan, bundle, images, edits, tags);
    return res;
}

inline PlanResult run_plan(const ExperimentPlan& plan, RunLog& log) {
    const auto bundle = make_bundle(plan.backend, plan.edit_params.image_size);
    const auto images = load_dataset(plan.dataset, plan.edit_params.image_size, log);
    return run_plan(plan, bundle, images, log);
}

inline Report method_table(const std::vector<EvaluationRecord>& records) {
    return aggregate(records, {"method"}, "Defense comparison");
}
inline Report category_table(const std::vector<EvaluationRecord>& records) {
    return aggregate(records, {"method", "category"}, "Per editing type");
}
inline Report purification_table(const std::vector<EvaluationRecord>& records) {
    return aggregate(records, {"method", "purification"}, "Under purification");
}

inline std::string format_budget(double eps) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, eps);
    return std::string(buf, res.ptr);
}

inline std::vector<EvaluationRecord> without_baseline(const std::vector<EvaluationRecord>& records) {
    std::vector<EvaluationRecord> out;
    for (const auto& r : records)
        if (r.method != kNoDefense) out.push_back(r);
    return out;
}

struct AblationResult {
    Report report;
    std::vector<EvaluationRecord> records;  // includes the no-defense rows of every sub-run
};

// FaceLock at each budget; one report row per budget.
inline AblationResult budget_sweep(const ExperimentPlan& plan, const BackendBundle& bundle,
                                   const std::vector<DatasetImage>& images, const std::vector<double>& budgets,
                                   RunLog& log) {
    AblationResult out;
    for (double eps : budgets) {
        ExperimentPlan p = plan;
        p.methods = {AttackName::facelock};
        p.attack.epsilon = eps;
        if (!plan.out_dir.empty()) p.out_dir = plan.out_dir / ("budget_" + format_budget(eps));
        auto res = run_plan(p, bundle, images, log, {{"budget", format_budget(eps)}});
        out.records.insert(out.records.end(), res.records.begin(), res.records.end());
    }
    out.report = aggregate(without_baseline(out.records), {"budget"}, "Perturbation budget");
    return out;
}

// The CVL -> CVL-D -> CVL-DP / FaceLock ladder with component checklist columns.
inline AblationResult design_ablation(const ExperimentPlan& plan, const BackendBundle& bundle,
                                      const std::vector<DatasetImage>& images, RunLog& log) {
    ExperimentPlan p = plan;
    p.methods = {AttackName::cvl, AttackName::cvl_d, AttackName::cvl_dp, AttackName::facelock};
    auto res = run_plan(p, bundle, images, log);
    AblationResult out;
    out.records = res.records;
    out.report = aggregate(without_baseline(res.records), {"method"}, "Design ablation");
    out.report.extra_columns = {"cvl", "diffusion", "pixel", "feature"};
    for (auto& row : out.report.rows) {
        const auto c = design_components(parse_attack_name(row.keys[0]));
        auto mark = [](bool b) { return std::string(b ? "✓" : ""); };
        row.extras = {mark(c.cvl), mark(c.diffusion), mark(c.pixel), mark(c.feature)};
    }
    return out;
}

// FaceLock with each feature-extractor family swapped into the bundle.
inline AblationResult backbone_ablation(const ExperimentPlan& plan, const std::vector<DatasetImage>& images,
                                        const std::vector<toy::FeatureFamily>& families, RunLog& log) {
    AblationResult out;
    for (auto fam : families) {
        ExperimentPlan p = plan;
        p.methods = {AttackName::facelock};
        p.backend.family = fam;
        if (!plan.out_dir.empty()) p.out_dir = plan.out_dir / toy::to_string(fam);
        const auto bundle = make_bundle(p.backend, p.edit_params.image_size);
        auto res = run_plan(p, bundle, images, log, {{"backbone", toy::to_string(fam)}});
        out.records.insert(out.records.end(), res.records.begin(), res.records.end());
    }
    out.report = aggregate(without_baseline(out.records), {"backbone"}, "Feature extractor");
    return out;
}

}  // namespace facelock::harness
