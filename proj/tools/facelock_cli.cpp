// facelock: command-line front end for protection, editing, purification and evaluation.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "facelock/facelock.hpp"

namespace fs = std::filesystem;
using namespace facelock;
using namespace facelock::harness;

namespace {

struct Globals {
    std::string config;
    std::string backend;
    std::optional<std::uint64_t> seed;
    std::string out = "facelock_out";
    int jobs = 1;
    std::string dataset;
    int image_size = 0;
};

ExperimentPlan build_plan(const Globals& g) {
    LoadedConfig lc;
    if (!g.config.empty()) lc = load_config(g.config);
    ExperimentPlan plan = lc.plan;
    if (!g.backend.empty()) {
        if (g.backend == "toy") {
            plan.backend.kind = BackendKind::toy;
            if (!lc.image_size_set) plan.edit_params.image_size = 32;
        } else {
            plan.backend.kind = BackendKind::real;
            if (!lc.image_size_set) plan.edit_params.image_size = 512;
        }
    }
    if (g.image_size > 0) plan.edit_params.image_size = g.image_size;
    if (g.seed) plan.attack.rng = RngState(*g.seed, plan.attack.rng.label());
    if (!g.dataset.empty()) plan.dataset = g.dataset;
    plan.out_dir = g.out;
    plan.jobs = g.jobs;
    plan.edit_params.validate();
    return plan;
}

// Warnings also go to <out>/warnings.log so skipped inputs stay on record.
void save_warnings(const RunLog& log, const fs::path& out) {
    const auto w = log.warnings();
    if (w.empty()) return;
    std::string text;
    for (const auto& line : w) text += line + "\n";
    write_text(out / "warnings.log", text);
    std::cerr << w.size() << " warning(s) written to " << (out / "warnings.log").string() << "\n";
}

void write_tables(const std::vector<Report>& reports, const std::vector<std::string>& stems, const fs::path& dir,
                  const std::vector<ReportFormat>& formats) {
    for (std::size_t i = 0; i < reports.size(); ++i) {
        for (const auto& p : emit_report(reports[i], dir / stems[i], formats)) std::cout << "wrote " << p.string() << "\n";
    }
}

std::vector<ReportFormat> all_formats() { return {ReportFormat::csv, ReportFormat::json, ReportFormat::markdown}; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FaceLock portrait protection toolkit"};
    app.require_subcommand(1);

    Globals g;
    app.add_option("--config", g.config, "INI file with [backend] [attack] [edit] [purify] [plan] sections")
        ->check(CLI::ExistingFile);
    app.add_option("--backend", g.backend, "Model backend")->check(CLI::IsMember({"toy", "real"}));
    app.add_option("--seed", g.seed, "Attack RNG seed");
    app.add_option("--out", g.out, "Output directory")->capture_default_str();
    app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    app.add_option("--image-size", g.image_size, "Working resolution (toy backend: 16, 32 or 64)");

    // protect
    auto* protect_cmd = app.add_subcommand("protect", "Protect an image or a directory of images");
    std::string protect_input, attack_name;
    protect_cmd->add_option("input", protect_input, "Image file or directory")->required()->check(CLI::ExistingPath);
    protect_cmd->add_option("--attack", attack_name, "Attack name (default: [attack] name or facelock)");

    // edit
    auto* edit_cmd = app.add_subcommand("edit", "Edit images with catalog prompts under fixed seeds");
    std::string edit_input, prompt_file;
    std::vector<int> prompt_ids;
    std::vector<std::uint64_t> edit_seeds;
    edit_cmd->add_option("input", edit_input, "Image file or directory")->required()->check(CLI::ExistingPath);
    edit_cmd->add_option("--prompts", prompt_file, "Prompt catalog (TSV)")->check(CLI::ExistingFile);
    edit_cmd->add_option("--prompt-ids", prompt_ids, "Catalog ids to use")->delimiter(',');
    edit_cmd->add_option("--seeds", edit_seeds, "Edit seeds")->delimiter(',');

    // purify
    auto* purify_cmd = app.add_subcommand("purify", "Apply purifications to images");
    std::string purify_input;
    std::vector<std::string> purify_specs;
    purify_cmd->add_option("input", purify_input, "Image file or directory")->required()->check(CLI::ExistingPath);
    purify_cmd->add_option("--spec", purify_specs, "none, blur, rotate, jpeg<Q>, color_jitter or external")
        ->delimiter(',')
        ->required();

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "Run the plan and write records and reports");
    eval_cmd->add_option("--dataset", g.dataset, "Dataset directory (overrides [plan] dataset)");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "FaceLock over several perturbation budgets");
    std::vector<double> budgets{0.01, 0.02, 0.03, 0.04, 0.05};
    sweep_cmd->add_option("--budgets", budgets, "Budgets on the [0,1] pixel scale")->delimiter(',')->capture_default_str();
    sweep_cmd->add_option("--dataset", g.dataset, "Dataset directory");

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "Design or feature-extractor ablation");
    bool designs = false;
    std::vector<std::string> backbones;
    ablate_cmd->add_flag("--designs", designs, "CVL, CVL-D, CVL-DP and FaceLock");
    ablate_cmd->add_option("--backbones", backbones, "Feature families, e.g. alexnet_family,vgg_family")->delimiter(',');
    ablate_cmd->add_option("--dataset", g.dataset, "Dataset directory");

    // report
    auto* report_cmd = app.add_subcommand("report", "Aggregate a record store into tables");
    std::string records_path, report_stem;
    std::vector<std::string> group_by{"method"};
    std::vector<std::string> formats{"csv", "json", "markdown"};
    report_cmd->add_option("records", records_path, "JSON-lines record store")->required()->check(CLI::ExistingFile);
    report_cmd->add_option("--group-by", group_by, "Grouping keys")->delimiter(',')->capture_default_str();
    report_cmd->add_option("--format", formats, "csv, json, markdown")->delimiter(',')->capture_default_str();
    report_cmd->add_option("--output", report_stem, "Output path without extension (default: print to stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        RunLog log(true);
        if (report_cmd->parsed()) {
            const auto records = read_jsonl(records_path);
            const auto rep = aggregate(records, group_by);
            for (const auto& f : formats) {
                const auto fmt = parse_report_format(f);
                if (report_stem.empty()) {
                    std::cout << render(rep, fmt);
                } else {
                    for (const auto& p : emit_report(rep, report_stem, {fmt})) std::cout << "wrote " << p.string() << "\n";
                }
            }
            return 0;
        }

        ExperimentPlan plan = build_plan(g);
        const fs::path out = plan.out_dir;

        if (protect_cmd->parsed()) {
            if (!attack_name.empty()) plan.methods = {parse_attack_name(attack_name)};
            else if (plan.methods.size() != 1) plan.methods = {AttackName::facelock};
            const auto bundle = make_bundle(plan.backend, plan.edit_params.image_size);
            const auto images = load_inputs(protect_input, plan.edit_params.image_size, log);
            const auto set = run_protection(plan, bundle, images, log);
            for (const auto& p : set.items) {
                std::cout << p.image_id << " " << to_string(p.method) << " linf=" << p.result.perturbation.linf() << " -> "
                          << (out / "protected" / to_string(p.method) / (p.image_id + ".png")).string() << "\n";
            }
        } else if (edit_cmd->parsed()) {
            if (!prompt_file.empty()) plan.prompts = PromptCatalog::load(prompt_file);
            if (!prompt_ids.empty()) plan.prompts = plan.prompts.select(prompt_ids);
            if (!edit_seeds.empty()) plan.seeds = edit_seeds;
            const auto bundle = make_bundle(plan.backend, plan.edit_params.image_size);
            const auto images = load_inputs(edit_input, plan.edit_params.image_size, log);
            std::vector<std::tuple<std::size_t, const PromptEntry*, std::uint64_t>> jobs;
            for (std::size_t i = 0; i < images.size(); ++i)
                for (const auto& pr : plan.prompts.entries)
                    for (auto s : plan.seeds) jobs.emplace_back(i, &pr, s);
            parallel_for(jobs.size(), plan.jobs, [&](std::size_t j) {
                const auto& [i, pr, s] = jobs[j];
                const auto edited = io::quantize8(
                    bundle.editor->edit(images[i].image, pr->text, plan.edit_params, edit_stream(s, images[i].id, pr->id)));
                io::write_png(out / "edits" / images[i].id / ("p" + std::to_string(pr->id) + "_s" + std::to_string(s) + ".png"),
                              edited);
            });
            std::cout << "wrote " << jobs.size() << " edits under " << (out / "edits").string() << "\n";
        } else if (purify_cmd->parsed()) {
            LoadedConfig lc;
            if (!g.config.empty()) lc = load_config(g.config);
            const auto images = load_inputs(purify_input, plan.edit_params.image_size, log);
            for (const auto& label : purify_specs) {
                auto spec = purify_from_label(label, lc.purify_base);
                for (const auto& img : images) {
                    spec.rng = purify_stream(plan.attack.rng.seed(), img.id, label);
                    std::vector<std::string> warnings;
                    const auto res = purification::purify(img.image, spec, &warnings);
                    for (const auto& w : warnings) log.warn(img.id + ": " + w);
                    io::write_png(out / "purified" / label / (img.id + ".png"), res);
                }
            }
            std::cout << "wrote " << images.size() * purify_specs.size() << " images under " << (out / "purified").string()
                      << "\n";
        } else if (eval_cmd->parsed()) {
            if (plan.dataset.empty()) throw ArgumentError("evaluate needs a dataset ([plan] dataset or --dataset)");
            const auto res = run_plan(plan, log);
            write_jsonl(out / "records.jsonl", res.records);
            std::cout << "wrote " << res.records.size() << " records to " << (out / "records.jsonl").string() << "\n";
            write_tables({method_table(res.records), category_table(res.records), purification_table(res.records)},
                         {"table_method", "table_category", "table_purification"}, out, all_formats());
        } else if (sweep_cmd->parsed()) {
            if (plan.dataset.empty()) throw ArgumentError("sweep needs a dataset ([plan] dataset or --dataset)");
            const auto bundle = make_bundle(plan.backend, plan.edit_params.image_size);
            const auto images = load_dataset(plan.dataset, plan.edit_params.image_size, log);
            plan.out_dir = out / "sweep";
            const auto res = budget_sweep(plan, bundle, images, budgets, log);
            write_jsonl(out / "sweep" / "records.jsonl", res.records);
            write_tables({res.report}, {"budget_sweep"}, out / "sweep", all_formats());
        } else if (ablate_cmd->parsed()) {
            if (plan.dataset.empty()) throw ArgumentError("ablate needs a dataset ([plan] dataset or --dataset)");
            if (!designs && backbones.empty()) throw ArgumentError("ablate needs --designs and/or --backbones");
            const auto images = load_dataset(plan.dataset, plan.edit_params.image_size, log);
            if (designs) {
                const auto bundle = make_bundle(plan.backend, plan.edit_params.image_size);
                auto p = plan;
                p.out_dir = out / "designs";
                const auto res = design_ablation(p, bundle, images, log);
                write_jsonl(p.out_dir / "records.jsonl", res.records);
                write_tables({res.report}, {"design_ablation"}, p.out_dir, all_formats());
            }
            if (!backbones.empty()) {
                std::vector<toy::FeatureFamily> fams;
                for (const auto& b : backbones) fams.push_back(toy::parse_feature_family(b));
                auto p = plan;
                p.out_dir = out / "backbones";
                const auto res = backbone_ablation(p, images, fams, log);
                write_jsonl(p.out_dir / "records.jsonl", res.records);
                write_tables({res.report}, {"backbone_ablation"}, p.out_dir, all_formats());
            }
        }
        save_warnings(log, out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
