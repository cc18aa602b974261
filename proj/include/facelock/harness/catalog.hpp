#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "facelock/core.hpp"

namespace facelock::harness {

enum class PromptCategory { facial_feature, accessory, background };

inline std::string to_string(PromptCategory c) {
    switch (c) {
        case PromptCategory::facial_feature: return "facial_feature";
        case PromptCategory::accessory: return "accessory";
        case PromptCategory::background: return "background";
    }
    return "unknown";
}

inline PromptCategory parse_category(std::string_view s) {
    if (s == "facial_feature") return PromptCategory::facial_feature;
    if (s == "accessory") return PromptCategory::accessory;
    if (s == "background") return PromptCategory::background;
    throw ArgumentError("unknown prompt category '" + std::string(s) + "'");
}

struct PromptEntry {
    int id = 0;  // position in the full catalog; kept by select()
    std::string text;
    PromptCategory category = PromptCategory::facial_feature;
    // Caption of the expected result, needed only for CLIP-SD.
    std::optional<std::string> description;
};

struct PromptCatalog {
    std::vector<PromptEntry> entries;

    std::size_t size() const { return entries.size(); }

    void add(std::string text, PromptCategory category, std::optional<std::string> description = std::nullopt) {
        entries.push_back({static_cast<int>(entries.size()), std::move(text), category, std::move(description)});
    }

    // The 25 editing instructions: 10 facial-feature, 8 accessory, 7 background.
    static PromptCatalog defaults() {
        using C = PromptCategory;
        PromptCatalog c;
        for (const char* t : {"Turn the person's hair pink", "Let the person turn bald", "Let the person have a tattoo",
                              "Let the person wear purple makeup", "Let the person grow a mustache",
                              "Turn the person into a zombie", "Change the skin color to Avatar blue",
                              "Add elf-like ears", "Add large vampire fangs", "Apply Goth style makeup"}) {
            c.add(t, C::facial_feature);
        }
        for (const char* t : {"Let the person wear a police suit", "Let the person wear a bowtie",
                              "Let the person wear a helmet", "Let the person wear sunglasses",
                              "Let the person wear earrings", "Let the person smoke a cigar",
                              "Place a headband in the hair", "Place a tiara on the top of the head"}) {
            c.add(t, C::accessory);
        }
        for (const char* t : {"Let it be snowy", "Change the background to a beach", "Add a city skyline background",
                              "Add a forest background", "Change the background to a desert",
                              "Set the background in a library", "Let the person stand under the moon"}) {
            c.add(t, C::background);
        }
        return c;
    }

    // Tab-separated lines: category <TAB> prompt [<TAB> description]. '#' starts a comment.
    static PromptCatalog load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ArgumentError("cannot open prompt catalog " + path.string());
        PromptCatalog c;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line.front() == '#') continue;
            std::vector<std::string> fields;
            std::size_t start = 0;
            for (std::size_t tab = line.find('\t'); tab != std::string::npos; tab = line.find('\t', start)) {
                fields.push_back(line.substr(start, tab - start));
                start = tab + 1;
            }
            fields.push_back(line.substr(start));
            if (fields.size() < 2 || fields[1].empty()) {
                throw ArgumentError(path.string() + ":" + std::to_string(lineno) + ": expected category<TAB>prompt");
            }
            std::optional<std::string> desc;
            if (fields.size() >= 3 && !fields[2].empty()) desc = fields[2];
            c.add(fields[1], parse_category(fields[0]), std::move(desc));
        }
        if (c.entries.empty()) throw ArgumentError("prompt catalog " + path.string() + " is empty");
        return c;
    }

    // Keeps the entries with the listed ids, in the given order.
    PromptCatalog select(const std::vector<int>& ids) const {
        PromptCatalog c;
        for (int id : ids) {
            auto it = std::find_if(entries.begin(), entries.end(), [id](const PromptEntry& e) { return e.id == id; });
            if (it == entries.end()) throw ArgumentError("prompt id " + std::to_string(id) + " not in catalog");
            c.entries.push_back(*it);
        }
        return c;
    }
};

}  // namespace facelock::harness
