#pragma once

// Grouped (mean, std) tables over evaluation records, rendered as CSV, JSON or markdown.

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "facelock/harness/records.hpp"
#include "facelock/metrics.hpp"

namespace facelock::harness {

using MetricCells = std::array<std::optional<metrics::Summary>, metrics::kMetricOrder.size()>;

struct ReportRow {
    std::vector<std::string> keys;    // aligned with Report::group_by
    std::vector<std::string> extras;  // aligned with Report::extra_columns
    MetricCells cells{};              // nullopt when no record carries the metric
    std::vector<std::string> record_ids;

    bool operator==(const ReportRow&) const = default;
};

struct Report {
    std::string title;
    std::vector<std::string> group_by;
    std::vector<std::string> extra_columns;
    std::vector<ReportRow> rows;

    const ReportRow* find(const std::vector<std::string>& keys) const {
        for (const auto& r : rows)
            if (r.keys == keys) return &r;
        return nullptr;
    }

    bool operator==(const Report&) const = default;
};

// Mean and population std of every metric over the records; nulls are skipped.
inline MetricCells summarize_records(const std::vector<const EvaluationRecord*>& records) {
    MetricCells cells{};
    for (std::size_t i = 0; i < cells.size(); ++i) {
        std::vector<double> vals;
        for (const auto* r : records)
            if (r->values[i]) vals.push_back(*r->values[i]);
        if (!vals.empty()) cells[i] = metrics::summarize(vals);
    }
    return cells;
}

inline MetricCells summarize_records(const std::vector<EvaluationRecord>& records) {
    std::vector<const EvaluationRecord*> ptrs;
    for (const auto& r : records) ptrs.push_back(&r);
    return summarize_records(ptrs);
}

// Rows appear in order of first occurrence of their key tuple in `records`.
inline Report aggregate(const std::vector<EvaluationRecord>& records, const std::vector<std::string>& group_by,
                        std::string title = "") {
    Report rep;
    rep.title = std::move(title);
    rep.group_by = group_by;
    std::vector<std::vector<const EvaluationRecord*>> members;
    for (const auto& r : records) {
        std::vector<std::string> keys;
        for (const auto& g : group_by) keys.push_back(r.key(g));
        auto it = std::find_if(rep.rows.begin(), rep.rows.end(), [&](const ReportRow& row) { return row.keys == keys; });
        std::size_t idx = static_cast<std::size_t>(it - rep.rows.begin());
        if (it == rep.rows.end()) {
            rep.rows.push_back(ReportRow{keys, {}, {}, {}});
            members.emplace_back();
        }
        members[idx].push_back(&r);
        rep.rows[idx].record_ids.push_back(r.record_id);
    }
    for (std::size_t i = 0; i < rep.rows.size(); ++i) rep.rows[i].cells = summarize_records(members[i]);
    return rep;
}

// ---- rendering -------------------------------------------------------------

enum class ReportFormat { csv, json, markdown };

inline ReportFormat parse_report_format(std::string_view s) {
    if (s == "csv") return ReportFormat::csv;
    if (s == "json") return ReportFormat::json;
    if (s == "markdown" || s == "md") return ReportFormat::markdown;
    throw ArgumentError("unknown report format '" + std::string(s) + "' (csv, json, markdown)");
}

inline std::string extension(ReportFormat f) {
    switch (f) {
        case ReportFormat::csv: return ".csv";
        case ReportFormat::json: return ".json";
        case ReportFormat::markdown: return ".md";
    }
    return "";
}

inline std::string fixed3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace detail

// Column names shared by CSV and markdown: keys, extras, then (mean, std) per metric.
inline std::vector<std::string> report_columns(const Report& r) {
    std::vector<std::string> cols = r.group_by;
    cols.insert(cols.end(), r.extra_columns.begin(), r.extra_columns.end());
    for (auto m : metrics::kMetricOrder) {
        const std::string key(metrics::info(m).key);
        cols.push_back(key + "_mean");
        cols.push_back(key + "_std");
    }
    return cols;
}

inline std::string render_csv(const Report& r) {
    std::string out;
    auto line = [&](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out += ',';
            out += detail::csv_field(fields[i]);
        }
        out += '\n';
    };
    line(report_columns(r));
    for (const auto& row : r.rows) {
        std::vector<std::string> f = row.keys;
        f.insert(f.end(), row.extras.begin(), row.extras.end());
        for (const auto& c : row.cells) {
            f.push_back(c ? fixed3(c->mean) : "");
            f.push_back(c ? fixed3(c->std) : "");
        }
        line(f);
    }
    return out;
}

inline std::string render_markdown(const Report& r) {
    std::string out;
    if (!r.title.empty()) out += "### " + r.title + "\n\n";
    std::vector<std::string> head = r.group_by;
    head.insert(head.end(), r.extra_columns.begin(), r.extra_columns.end());
    for (auto m : metrics::kMetricOrder) {
        const auto i = metrics::info(m);
        const std::string label = std::string(i.label) + " " + std::string(metrics::arrow(i.direction));
        head.push_back(label + " mean");
        head.push_back(label + " std");
    }
    auto line = [&](const std::vector<std::string>& cells) {
        out += "|";
        for (const auto& c : cells) out += " " + c + " |";
        out += "\n";
    };
    line(head);
    line(std::vector<std::string>(head.size(), "---"));
    for (const auto& row : r.rows) {
        std::vector<std::string> f = row.keys;
        f.insert(f.end(), row.extras.begin(), row.extras.end());
        for (const auto& c : row.cells) {
            f.push_back(c ? fixed3(c->mean) : "-");
            f.push_back(c ? fixed3(c->std) : "-");
        }
        line(f);
    }
    return out;
}

inline nlohmann::ordered_json to_json(const Report& r) {
    nlohmann::ordered_json j;
    j["title"] = r.title;
    j["group_by"] = r.group_by;
    j["extra_columns"] = r.extra_columns;
    auto meta = nlohmann::ordered_json::array();
    for (auto m : metrics::kMetricOrder) {
        const auto i = metrics::info(m);
        meta.push_back({{"key", i.key},
                        {"label", i.label},
                        {"group", metrics::to_string(i.group)},
                        {"direction", metrics::to_string(i.direction)},
                        {"arrow", metrics::arrow(i.direction)}});
    }
    j["metrics"] = std::move(meta);
    auto rows = nlohmann::ordered_json::array();
    for (const auto& row : r.rows) {
        nlohmann::ordered_json jr;
        jr["keys"] = row.keys;
        jr["extras"] = row.extras;
        nlohmann::ordered_json cells = nlohmann::ordered_json::object();
        for (std::size_t i = 0; i < row.cells.size(); ++i) {
            const std::string key(metrics::info(metrics::kMetricOrder[i]).key);
            if (row.cells[i]) {
                cells[key] = {{"mean", row.cells[i]->mean}, {"std", row.cells[i]->std}, {"count", row.cells[i]->count}};
            } else {
                cells[key] = nullptr;
            }
        }
        jr["metrics"] = std::move(cells);
        jr["record_ids"] = row.record_ids;
        rows.push_back(std::move(jr));
    }
    j["rows"] = std::move(rows);
    return j;
}

inline Report report_from_json(const nlohmann::json& j) {
    Report r;
    r.title = j.at("title").get<std::string>();
    r.group_by = j.at("group_by").get<std::vector<std::string>>();
    r.extra_columns = j.at("extra_columns").get<std::vector<std::string>>();
    for (const auto& jr : j.at("rows")) {
        ReportRow row;
        row.keys = jr.at("keys").get<std::vector<std::string>>();
        row.extras = jr.at("extras").get<std::vector<std::string>>();
        for (std::size_t i = 0; i < row.cells.size(); ++i) {
            const auto& c = jr.at("metrics").at(std::string(metrics::info(metrics::kMetricOrder[i]).key));
            if (!c.is_null()) {
                row.cells[i] = metrics::Summary{c.at("mean").get<double>(), c.at("std").get<double>(),
                                                c.at("count").get<std::size_t>()};
            }
        }
        row.record_ids = jr.at("record_ids").get<std::vector<std::string>>();
        r.rows.push_back(std::move(row));
    }
    return r;
}

inline std::string render(const Report& r, ReportFormat f) {
    switch (f) {
        case ReportFormat::csv: return render_csv(r);
        case ReportFormat::json: return to_json(r).dump(2) + "\n";
        case ReportFormat::markdown: return render_markdown(r);
    }
    return "";
}

// Writes `<stem><ext>` for each format and returns the written paths.
inline std::vector<std::filesystem::path> emit_report(const Report& r, const std::filesystem::path& stem,
                                                      const std::vector<ReportFormat>& formats) {
    std::vector<std::filesystem::path> written;
    if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
    for (auto f : formats) {
        auto path = stem;
        path += extension(f);
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ArgumentError("cannot write " + path.string());
        out << render(r, f);
        written.push_back(path);
    }
    return written;
}

}  // namespace facelock::harness
