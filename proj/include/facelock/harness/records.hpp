#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "facelock/metrics.hpp"

namespace facelock::harness {

inline constexpr const char* kNoDefense = "no_defense";

// One row per (image, prompt, method, seed, purification).
struct EvaluationRecord {
    std::string record_id;
    std::string image_id;
    int prompt_id = 0;
    std::string prompt_category;
    std::string method;
    std::uint64_t seed = 0;
    std::string purification = "none";
    std::array<std::optional<double>, metrics::kMetricOrder.size()> values{};  // kMetricOrder positions
    std::vector<std::string> flags;
    std::string edit_stream;  // label of the editor RngState used
    std::map<std::string, std::string> tags;  // extra grouping keys (budget, design, backbone)

    std::optional<double> value(metrics::Metric m) const { return values[index_of(m)]; }
    void set(metrics::Metric m, std::optional<double> v) { values[index_of(m)] = v; }

    // Grouping key lookup; tags take the remaining names.
    std::string key(const std::string& name) const {
        if (name == "method") return method;
        if (name == "category") return prompt_category;
        if (name == "purification") return purification;
        if (name == "image") return image_id;
        if (name == "seed") return std::to_string(seed);
        if (name == "prompt") return std::to_string(prompt_id);
        auto it = tags.find(name);
        if (it == tags.end()) throw ArgumentError("record " + record_id + " has no key '" + name + "'");
        return it->second;
    }

    static std::size_t index_of(metrics::Metric m) {
        for (std::size_t i = 0; i < metrics::kMetricOrder.size(); ++i)
            if (metrics::kMetricOrder[i] == m) return i;
        throw ArgumentError("unknown metric");
    }

    bool operator==(const EvaluationRecord&) const = default;
};

inline std::string make_record_id(const std::string& image, int prompt, const std::string& method, std::uint64_t seed,
                                  const std::string& purification, const std::map<std::string, std::string>& tags = {}) {
    std::string id = image + "|p" + std::to_string(prompt) + "|" + method + "|s" + std::to_string(seed) + "|" + purification;
    for (const auto& [k, v] : tags) id += "|" + k + "=" + v;
    return id;
}

inline nlohmann::ordered_json to_json(const EvaluationRecord& r) {
    nlohmann::ordered_json j;
    j["record_id"] = r.record_id;
    j["image_id"] = r.image_id;
    j["prompt_id"] = r.prompt_id;
    j["prompt_category"] = r.prompt_category;
    j["method"] = r.method;
    j["seed"] = r.seed;
    j["purification"] = r.purification;
    nlohmann::ordered_json m = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < r.values.size(); ++i) {
        const std::string key(metrics::info(metrics::kMetricOrder[i]).key);
        if (r.values[i]) m[key] = *r.values[i];
        else m[key] = nullptr;
    }
    j["metrics"] = std::move(m);
    j["flags"] = r.flags;
    j["edit_stream"] = r.edit_stream;
    j["tags"] = r.tags;
    return j;
}

inline EvaluationRecord record_from_json(const nlohmann::json& j) {
    EvaluationRecord r;
    r.record_id = j.at("record_id").get<std::string>();
    r.image_id = j.at("image_id").get<std::string>();
    r.prompt_id = j.at("prompt_id").get<int>();
    r.prompt_category = j.at("prompt_category").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.purification = j.at("purification").get<std::string>();
    const auto& m = j.at("metrics");
    for (std::size_t i = 0; i < r.values.size(); ++i) {
        const std::string key(metrics::info(metrics::kMetricOrder[i]).key);
        if (!m.contains(key)) throw ArgumentError("record " + r.record_id + " lacks metric " + key);
        if (!m.at(key).is_null()) r.values[i] = m.at(key).get<double>();
    }
    r.flags = j.at("flags").get<std::vector<std::string>>();
    r.edit_stream = j.value("edit_stream", "");
    if (j.contains("tags")) r.tags = j.at("tags").get<std::map<std::string, std::string>>();
    return r;
}

inline std::string to_jsonl(const std::vector<EvaluationRecord>& records) {
    std::string out;
    for (const auto& r : records) out += to_json(r).dump() + "\n";
    return out;
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<EvaluationRecord>& records) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot write " + path.string());
    out << to_jsonl(records);
}

inline std::vector<EvaluationRecord> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open record store " + path.string());
    std::vector<EvaluationRecord> records;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            records.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ArgumentError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return records;
}

}  // namespace facelock::harness
