#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "facelock/facelock.hpp"
#include "support.hpp"

using namespace facelock;
using namespace facelock::harness;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    auto d = fs::temp_directory_path() / ("facelock_harness_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<DatasetImage> images(int n, int size = 16) {
    std::vector<DatasetImage> out;
    for (int i = 0; i < n; ++i) out.push_back({"img" + std::to_string(i), fixtures::probe_image(100 + i, size)});
    return out;
}

ExperimentPlan small_plan() {
    ExperimentPlan p;
    p.methods = {AttackName::facelock, AttackName::photoguard};
    p.prompts = PromptCatalog::defaults().select({0, 12});
    p.seeds = {0, 1};
    p.purifications = {purification::parse_label("none"), purification::parse_label("jpeg75")};
    p.edit_params.image_size = 16;
    p.attack.steps = 8;
    return p;
}

const BackendBundle& bundle16() {
    static const BackendBundle b = toy::make_toy_bundle(0, 16);
    return b;
}

}  // namespace

TEST(Catalog, DefaultsHaveTwentyFivePromptsInThreeCategories) {
    auto c = PromptCatalog::defaults();
    ASSERT_EQ(c.size(), 25u);
    int n[3] = {};
    for (const auto& e : c.entries) ++n[static_cast<int>(e.category)];
    EXPECT_EQ(n[0], 10);
    EXPECT_EQ(n[1], 8);
    EXPECT_EQ(n[2], 7);
    for (int i = 0; i < 25; ++i) EXPECT_EQ(c.entries[i].id, i);
    EXPECT_EQ(c.entries[0].text, "Turn the person's hair pink");
}

TEST(Catalog, LoadsTsvWithOptionalDescriptions) {
    auto d = fresh_dir("catalog");
    {
        std::ofstream out(d / "p.tsv");
        out << "# comment\n"
            << "accessory\tLet the person wear a hat\tA photo of a person wearing a hat\n"
            << "\n"
            << "background\tLet it be snowy\n";
    }
    auto c = PromptCatalog::load(d / "p.tsv");
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c.entries[0].category, PromptCategory::accessory);
    EXPECT_EQ(c.entries[0].description, "A photo of a person wearing a hat");
    EXPECT_FALSE(c.entries[1].description);
    auto sel = c.select({1});
    EXPECT_EQ(sel.entries[0].id, 1);
    EXPECT_THROW(c.select({5}), ArgumentError);
    {
        std::ofstream out(d / "bad.tsv");
        out << "hairstyle\tX\n";
    }
    EXPECT_THROW(PromptCatalog::load(d / "bad.tsv"), ArgumentError);
}

TEST(Config, LoadsSectionsAndResolvesPaths) {
    auto d = fresh_dir("config");
    {
        std::ofstream out(d / "plan.ini");
        out << "[backend]\nkind = toy\nseed = 3\nfeature_extractor = alexnet\n"
            << "[attack]\nepsilon = 0.03\nsteps = 7\nlosses = fr,fe\n"
            << "[edit]\nimage_size = 16\n"
            << "[purify]\njpeg_quality = 60\n"
            << "[plan]\ndataset = data\nmethods = facelock,cvl\nprompt_ids = 3,4\nseeds = 0,2\n"
            << "purifications = none,jpeg,blur\nout = results\njobs = 2\n";
    }
    auto lc = load_config(d / "plan.ini");
    const auto& p = lc.plan;
    EXPECT_EQ(p.backend.toy_seed, 3u);
    EXPECT_EQ(p.backend.family, toy::FeatureFamily::alexnet);
    EXPECT_EQ(p.attack.epsilon, 0.03);
    EXPECT_EQ(p.attack.steps, 7);
    EXPECT_EQ(p.attack.loss_toggles, (std::set<LossName>{LossName::fr, LossName::fe}));
    EXPECT_EQ(p.edit_params.image_size, 16);
    EXPECT_EQ(p.dataset, d / "data");
    EXPECT_EQ(p.out_dir, d / "results");
    EXPECT_EQ(p.methods, (std::vector<AttackName>{AttackName::facelock, AttackName::cvl}));
    ASSERT_EQ(p.prompts.size(), 2u);
    EXPECT_EQ(p.prompts.entries[0].id, 3);
    EXPECT_EQ(p.seeds, (std::vector<std::uint64_t>{0, 2}));
    ASSERT_EQ(p.purifications.size(), 3u);
    EXPECT_EQ(purification::label(p.purifications[1]), "jpeg60");
    EXPECT_EQ(p.jobs, 2);
    EXPECT_EQ(p.cardinality(4), 4u * 2 * 3 * 2 * 3);
}

TEST(Config, RejectsUnknownKeysAndSections) {
    auto d = fresh_dir("config_bad");
    {
        std::ofstream out(d / "a.ini");
        out << "[attack]\nepsilonn = 0.03\n";
    }
    EXPECT_THROW(load_config(d / "a.ini"), ArgumentError);
    {
        std::ofstream out(d / "b.ini");
        out << "[attacks]\nepsilon = 0.03\n";
    }
    EXPECT_THROW(load_config(d / "b.ini"), ArgumentError);
    {
        std::ofstream out(d / "c.ini");
        out << "[attack]\nepsilon = -1\n";
    }
    EXPECT_THROW(load_config(d / "c.ini"), ArgumentError);
}

TEST(Dataset, SortedSkipsBadFilesAndNormalisesSize) {
    auto d = fresh_dir("dataset");
    io::write_png(d / "b.png", fixtures::probe_image(1, 24));
    io::write_png(d / "a.png", fixtures::probe_image(2, 16));
    {
        std::ofstream out(d / "c.png");
        out << "broken";
    }
    {
        std::ofstream out(d / "notes.txt");
        out << "ignored";
    }
    RunLog log(false);
    auto imgs = load_dataset(d, 16, log);
    ASSERT_EQ(imgs.size(), 2u);
    EXPECT_EQ(imgs[0].id, "a");
    EXPECT_EQ(imgs[1].id, "b");
    EXPECT_EQ(imgs[1].image.height(), 16);
    EXPECT_EQ(log.warnings().size(), 1u);

    auto empty = fresh_dir("dataset_empty");
    EXPECT_THROW(load_dataset(empty, 16, log), std::exception);
}

TEST(Protection, WritesDeterministicArtifacts) {
    auto plan = small_plan();
    plan.methods = {AttackName::facelock};
    auto imgs = images(2);
    RunLog log(false);
    const auto dir_a = fresh_dir("prot_a"), dir_b = fresh_dir("prot_b");
    plan.out_dir = dir_a;
    auto a = run_protection(plan, bundle16(), imgs, log);
    plan.out_dir = dir_b;
    run_protection(plan, bundle16(), imgs, log);
    for (const auto& f : fs::recursive_directory_iterator(dir_a)) {
        if (!f.is_regular_file()) continue;
        const auto rel = fs::relative(f.path(), dir_a);
        EXPECT_EQ(slurp(f.path()), slurp(dir_b / rel)) << rel;
    }
    ASSERT_EQ(a.items.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_LE(linf_distance(a.items[i].result.protected_image, imgs[i].image), 0.02);
}

TEST(Protection, SidecarCarriesConfigAndTrace) {
    auto plan = small_plan();
    plan.methods = {AttackName::facelock};
    auto imgs = images(2);
    RunLog log(false);
    plan.out_dir = fresh_dir("sidecar");
    run_protection(plan, bundle16(), imgs, log);
    std::size_t n = 0;
    for (const auto& f : fs::recursive_directory_iterator(plan.out_dir))
        if (f.is_regular_file()) ++n;
    EXPECT_EQ(n, 4u);
    auto j = nlohmann::json::parse(slurp(plan.out_dir / "protected" / "facelock" / "img0.json"));
    EXPECT_EQ(j["image_id"], "img0");
    EXPECT_EQ(j["method"], "facelock");
    EXPECT_LE(j["linf"].get<double>(), 0.02);
    EXPECT_EQ(j["trace"]["steps"], 8);
}

TEST(Edits, BaselineAndDefensesShareStreams) {
    auto plan = small_plan();
    auto imgs = images(2);
    RunLog log(false);
    auto prot = run_protection(plan, bundle16(), imgs, log);
    auto edits = run_edits(plan, bundle16(), imgs, prot, log);
    EXPECT_EQ(edits.size(), plan.cardinality(imgs.size()));
    std::map<std::tuple<std::string, int, std::uint64_t, std::string>, std::set<std::string>> streams;
    for (const auto& e : edits) {
        streams[{e.image_id, e.prompt->id, e.seed, e.purification_label}].insert(e.edit_stream);
        EXPECT_EQ(e.edit_stream, "edit/" + e.image_id + "/p" + std::to_string(e.prompt->id) + "#" + std::to_string(e.seed));
        EXPECT_EQ(e.edited, io::quantize8(e.edited));
    }
    for (const auto& [k, s] : streams) EXPECT_EQ(s.size(), 1u);
    EXPECT_EQ(edits.front().method, kNoDefense);
}

TEST(Evaluate, BaselineRowsHaveNullPairedMetrics) {
    auto plan = small_plan();
    auto imgs = images(2);
    RunLog log(false);
    auto res = run_plan(plan, bundle16(), imgs, log);
    ASSERT_EQ(res.records.size(), 48u);
    using metrics::Metric;
    for (const auto& r : res.records) {
        const bool base = r.method == kNoDefense;
        EXPECT_EQ(r.value(Metric::psnr).has_value(), !base);
        EXPECT_EQ(r.value(Metric::ssim).has_value(), !base);
        EXPECT_EQ(r.value(Metric::lpips).has_value(), !base);
        EXPECT_TRUE(r.value(Metric::fr).has_value());
        EXPECT_TRUE(r.value(Metric::clip_i).has_value());
        EXPECT_FALSE(r.value(Metric::clip_sd).has_value());
        EXPECT_NE(std::find(r.flags.begin(), r.flags.end(), "clip_sd_no_description"), r.flags.end());
    }
}

TEST(Evaluate, IdenticalDefenseMatchesBaselineExactly) {
    // Zero budget means the "protected" image is the source, so edits coincide.
    auto plan = small_plan();
    plan.methods = {AttackName::facelock};
    plan.attack.epsilon = 0.0;
    auto imgs = images(1);
    RunLog log(false);
    using metrics::Metric;
    for (const auto& r : run_plan(plan, bundle16(), imgs, log).records) {
        if (r.method == kNoDefense) continue;
        EXPECT_EQ(*r.value(Metric::psnr), 100.0);
        EXPECT_NEAR(*r.value(Metric::ssim), 1.0, 1e-12);
        EXPECT_EQ(*r.value(Metric::lpips), 0.0);
        EXPECT_NE(std::find(r.flags.begin(), r.flags.end(), "psnr_capped"), r.flags.end());
    }
}

TEST(Evaluate, ParallelRunMatchesSerial) {
    auto plan = small_plan();
    auto imgs = images(2);
    RunLog log(false);
    auto serial = run_plan(plan, bundle16(), imgs, log).records;
    plan.jobs = 4;
    EXPECT_EQ(to_jsonl(serial), to_jsonl(run_plan(plan, bundle16(), imgs, log).records));
}

TEST(Aggregate, EveryCellReaggregatesFromItsRecordIds) {
    auto plan = small_plan();
    auto imgs = images(2);
    RunLog log(false);
    auto records = run_plan(plan, bundle16(), imgs, log).records;
    std::map<std::string, const EvaluationRecord*> by_id;
    for (const auto& r : records) by_id[r.record_id] = &r;
    EXPECT_EQ(by_id.size(), records.size());
    for (const auto& rep : {method_table(records), category_table(records), purification_table(records)}) {
        std::size_t covered = 0;
        for (const auto& row : rep.rows) {
            std::vector<const EvaluationRecord*> members;
            for (const auto& id : row.record_ids) members.push_back(by_id.at(id));
            covered += members.size();
            auto again = summarize_records(members);
            for (std::size_t m = 0; m < again.size(); ++m) {
                ASSERT_EQ(again[m].has_value(), row.cells[m].has_value());
                if (!again[m]) continue;
                EXPECT_NEAR(again[m]->mean, row.cells[m]->mean, 1e-9);
                EXPECT_NEAR(again[m]->std, row.cells[m]->std, 1e-9);
            }
        }
        EXPECT_EQ(covered, records.size());
    }
}

TEST(Aggregate, FiveSeedRunMatchesIndependentRecomputation) {
    auto plan = small_plan();
    plan.methods = {AttackName::facelock};
    plan.prompts = PromptCatalog::defaults().select({3});
    plan.seeds = {0, 1, 2, 3, 4};
    plan.purifications = {purification::parse_label("none")};
    auto imgs = images(1);
    RunLog log(false);
    auto records = run_plan(plan, bundle16(), imgs, log).records;
    auto rep = method_table(records);
    ASSERT_EQ(rep.rows.size(), 2u);
    for (const auto& row : rep.rows) {
        double sum = 0.0, n = 0.0;
        for (const auto& r : records)
            if (r.method == row.keys[0]) sum += *r.value(metrics::Metric::fr), n += 1;
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& r : records)
            if (r.method == row.keys[0]) ss += std::pow(*r.value(metrics::Metric::fr) - mean, 2);
        const auto& cell = *row.cells[EvaluationRecord::index_of(metrics::Metric::fr)];
        EXPECT_EQ(n, 5.0);
        EXPECT_NEAR(cell.mean, mean, 1e-12);
        EXPECT_NEAR(cell.std, std::sqrt(ss / n), 1e-12);
    }
}

TEST(Report, CsvJsonMarkdownAgree) {
    auto plan = small_plan();
    auto imgs = images(1);
    RunLog log(false);
    auto rep = method_table(run_plan(plan, bundle16(), imgs, log).records);
    const auto csv = render_csv(rep);
    EXPECT_EQ(csv.rfind("method,clip_s_mean,clip_s_std,psnr_mean,psnr_std,ssim_mean", 0), 0u);
    EXPECT_EQ(report_from_json(nlohmann::json::parse(render(rep, ReportFormat::json))), rep);

    auto count_cells = [](const std::string& text, char sep, bool markdown) {
        std::size_t cells = 0;
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            if (markdown && (line.rfind("|", 0) != 0 || line.find("---") != std::string::npos)) continue;
            if (line.empty()) continue;
            const auto seps = static_cast<std::size_t>(std::count(line.begin(), line.end(), sep));
            cells += markdown ? seps - 1 : seps + 1;
        }
        return cells;
    };
    EXPECT_EQ(count_cells(csv, ',', false), count_cells(render_markdown(rep), '|', true));
    EXPECT_NE(render_markdown(rep).find("LPIPS ↑"), std::string::npos);
    EXPECT_NE(render_markdown(rep).find("FR ↓"), std::string::npos);
}

TEST(Report, NullCellsRenderEmptyInCsv) {
    EvaluationRecord r;
    r.record_id = "x";
    r.method = kNoDefense;
    r.set(metrics::Metric::fr, 0.5);
    auto rep = aggregate({r}, {"method"});
    const auto csv = render_csv(rep);
    EXPECT_NE(csv.find("no_defense,,,,,,,,,,,0.500,0.000,,"), std::string::npos) << csv;
}

TEST(Records, JsonlRoundTrip) {
    auto plan = small_plan();
    auto imgs = images(1);
    RunLog log(false);
    auto records = run_plan(plan, bundle16(), imgs, log, {{"budget", "0.02"}}).records;
    auto d = fresh_dir("jsonl");
    write_jsonl(d / "r.jsonl", records);
    EXPECT_EQ(read_jsonl(d / "r.jsonl"), records);
    EXPECT_EQ(records.front().key("budget"), "0.02");
    EXPECT_NE(records.front().record_id.find("|budget=0.02"), std::string::npos);
}

TEST(Ablation, ZeroBudgetMatchesUnprotectedFr) {
    auto plan = small_plan();
    plan.purifications = {purification::parse_label("none")};
    auto imgs = images(2);
    RunLog log(false);
    auto sweep = budget_sweep(plan, bundle16(), imgs, {0.0, 0.02}, log);
    ASSERT_EQ(sweep.report.rows.size(), 2u);
    EXPECT_EQ(sweep.report.rows[0].keys[0], "0");
    EXPECT_EQ(sweep.report.rows[1].keys[0], "0.02");
    std::map<std::tuple<std::string, int, std::uint64_t>, double> base;
    for (const auto& r : sweep.records)
        if (r.method == kNoDefense && r.key("budget") == "0") base[{r.image_id, r.prompt_id, r.seed}] = *r.value(metrics::Metric::fr);
    int checked = 0;
    for (const auto& r : sweep.records)
        if (r.method != kNoDefense && r.key("budget") == "0") {
            EXPECT_NEAR(*r.value(metrics::Metric::fr), base.at({r.image_id, r.prompt_id, r.seed}), 1e-6);
            ++checked;
        }
    EXPECT_EQ(checked, 2 * 2 * 2);
}

TEST(Ablation, DesignLadderHasFourRowsWithChecklist) {
    auto plan = small_plan();
    plan.prompts = PromptCatalog::defaults().select({0});
    plan.seeds = {0};
    plan.purifications = {purification::parse_label("none")};
    plan.attack.steps = 3;
    auto imgs = images(1);
    RunLog log(false);
    auto res = design_ablation(plan, bundle16(), imgs, log);
    ASSERT_EQ(res.report.rows.size(), 4u);
    const auto* cvl = res.report.find({"cvl"});
    ASSERT_NE(cvl, nullptr);
    EXPECT_EQ(cvl->extras, (std::vector<std::string>{"✓", "", "", ""}));
    EXPECT_EQ(res.report.find({"facelock"})->extras, (std::vector<std::string>{"✓", "✓", "", "✓"}));
    EXPECT_NE(render_csv(res.report).find("method,cvl,diffusion,pixel,feature,clip_s_mean"), std::string::npos);
}

TEST(Ablation, BackboneRowsPerFamily) {
    auto plan = small_plan();
    plan.prompts = PromptCatalog::defaults().select({0});
    plan.seeds = {0};
    plan.purifications = {purification::parse_label("none")};
    plan.attack.steps = 3;
    auto imgs = images(1);
    RunLog log(false);
    auto res = backbone_ablation(plan, imgs, {toy::FeatureFamily::alexnet, toy::FeatureFamily::vgg}, log);
    ASSERT_EQ(res.report.rows.size(), 2u);
    EXPECT_EQ(res.report.rows[0].keys[0], "alexnet_family");
}
