#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "wadkit/datasets.hpp"
#include "wadkit/eval.hpp"
#include "wadkit/models.hpp"

namespace wadkit {

/// Frame probabilities and reference labels of one utterance.
struct ScoredUtterance {
    std::string id;
    std::string group;
    std::vector<double> probs;
    std::vector<int> labels;
};

struct GroupScores {
    std::string group;
    ConfusionMatrix cm;
    Metrics metrics;
    std::optional<double> auc;
};

struct ClassifierReport {
    std::string name;
    double threshold = 0.5;
    std::vector<GroupScores> groups;  // per group, then "overall"

    const GroupScores* find(const std::string& group) const {
        for (const auto& g : groups)
            if (g.group == group) return &g;
        return nullptr;
    }
};

struct Report {
    std::vector<ClassifierReport> classifiers;

    nlohmann::json to_json() const;
    std::string table() const;
};

/// Group name of a manifest entry: "<split> <snr>dB", or "<split> clean"
/// when the entry carries no SNR tag.
inline std::string group_of(const ManifestEntry& e) {
    return to_string(e.split) + " " + (e.snr_db ? format_db(*e.snr_db) + "dB" : std::string("clean"));
}

inline ClassifierReport score_classifier(const std::string& name, double threshold,
                                         const std::vector<ScoredUtterance>& utts) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<int>>> groups;
    std::vector<double> all_p;
    std::vector<int> all_y;
    for (const auto& u : utts) {
        if (u.probs.size() != u.labels.size())
            throw FormatError(u.id + ": " + std::to_string(u.probs.size()) + " predictions for " +
                              std::to_string(u.labels.size()) + " frames");
        auto& g = groups[u.group];
        g.first.insert(g.first.end(), u.probs.begin(), u.probs.end());
        g.second.insert(g.second.end(), u.labels.begin(), u.labels.end());
        all_p.insert(all_p.end(), u.probs.begin(), u.probs.end());
        all_y.insert(all_y.end(), u.labels.begin(), u.labels.end());
    }
    auto score = [&](const std::string& gname, const std::vector<double>& p, const std::vector<int>& y) {
        GroupScores s;
        s.group = gname;
        s.cm = confusion_at(p, y, threshold);
        s.metrics = metrics(s.cm);
        if (detail::has_both_classes(y)) s.auc = roc_and_threshold(p, y).curve.auc;
        return s;
    };
    // Groups sorted by split, then SNR descending, with untagged last.
    std::vector<std::string> names;
    for (const auto& [k, v] : groups) names.push_back(k);
    auto key = [](const std::string& g) {
        const auto sp = g.find(' ');
        const std::string split = g.substr(0, sp), rest = g.substr(sp + 1);
        const double snr = rest == "clean" ? 1e300 : -std::stod(rest);
        return std::make_pair(split, snr);
    };
    std::sort(names.begin(), names.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });

    ClassifierReport r;
    r.name = name;
    r.threshold = threshold;
    for (const auto& n : names) r.groups.push_back(score(n, groups[n].first, groups[n].second));
    if (!all_y.empty()) r.groups.push_back(score("overall", all_p, all_y));
    return r;
}

inline nlohmann::json Report::to_json() const {
    nlohmann::json rows = nlohmann::json::array(), classifiers_j = nlohmann::json::array();
    for (const auto& c : classifiers) {
        nlohmann::json groups = nlohmann::json::array();
        for (const auto& g : c.groups) {
            const auto f = g.cm.fractions();
            nlohmann::json gj{{"data_split", g.group},
                              {"frames", g.cm.total()},
                              {"accuracy", g.metrics.accuracy},
                              {"precision", g.metrics.precision ? nlohmann::json(*g.metrics.precision) : nlohmann::json()},
                              {"recall", g.metrics.recall ? nlohmann::json(*g.metrics.recall) : nlohmann::json()},
                              {"f1", g.metrics.f1 ? nlohmann::json(*g.metrics.f1) : nlohmann::json()},
                              {"auc", g.auc ? nlohmann::json(*g.auc) : nlohmann::json()},
                              {"confusion", {{"tn", g.cm.tn}, {"fp", g.cm.fp}, {"fn", g.cm.fn}, {"tp", g.cm.tp}}},
                              {"fractions", {{"tn", f.tn}, {"fp", f.fp}, {"fn", f.fn}, {"tp", f.tp}}}};
            groups.push_back(gj);
            rows.push_back({{"metric", "accuracy"}, {"data_split", g.group}, {"classifier", c.name}, {"value", gj["accuracy"]}});
            rows.push_back({{"metric", "f1"}, {"data_split", g.group}, {"classifier", c.name}, {"value", gj["f1"]}});
        }
        classifiers_j.push_back({{"classifier", c.name}, {"threshold", c.threshold}, {"groups", groups}});
    }
    return {{"rows", rows}, {"classifiers", classifiers_j}};
}

/// Plain-text table with one column per classifier and Acc/F1 rows per
/// group, values in percent.
inline std::string Report::table() const {
    std::vector<std::string> groups;
    for (const auto& c : classifiers)
        for (const auto& g : c.groups)
            if (std::find(groups.begin(), groups.end(), g.group) == groups.end()) groups.push_back(g.group);
    std::ostringstream out;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-22s", "");
    out << buf;
    for (const auto& c : classifiers) {
        std::snprintf(buf, sizeof buf, "%12s", c.name.c_str());
        out << buf;
    }
    out << "\n";
    for (const auto& g : groups)
        for (const char* metric : {"Acc", "F1"}) {
            std::snprintf(buf, sizeof buf, "%-22s", (g + " " + metric).c_str());
            out << buf;
            for (const auto& c : classifiers) {
                const auto* s = c.find(g);
                std::optional<double> v;
                if (s) v = std::string(metric) == "Acc" ? std::optional<double>(s->metrics.accuracy) : s->metrics.f1;
                if (v) std::snprintf(buf, sizeof buf, "%12.2f", 100.0 * *v);
                else std::snprintf(buf, sizeof buf, "%12s", "-");
                out << buf;
            }
            out << "\n";
        }
    return out.str();
}

/// External per-utterance predictions: `<dir>/<id>.csv` with header
/// `frame_index,prob`, one row per frame.
inline std::vector<double> read_prediction_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw MissingInputError("missing prediction file " + path.string());
    std::istringstream in(detail::slurp(path));
    std::string line;
    if (!std::getline(in, line) || line.rfind("frame_index,prob", 0) != 0)
        throw FormatError(path.string() + ": expected header frame_index,prob");
    std::vector<double> probs;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto c = line.find(',');
        try {
            if (c == std::string::npos) throw std::invalid_argument("no comma");
            const auto idx = std::stoull(line.substr(0, c));
            const double p = std::stod(line.substr(c + 1));
            if (idx != probs.size()) throw std::invalid_argument("frame_index out of order");
            if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("prob outside [0, 1]");
            probs.push_back(p);
        } catch (const std::logic_error& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return probs;
}

inline void write_prediction_file(const std::vector<double>& probs, const std::filesystem::path& path) {
    std::string out = "frame_index,prob\n";
    char buf[64];
    for (std::size_t i = 0; i < probs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.9g\n", i, probs[i]);
        out += buf;
    }
    detail::spit(path, out);
}

struct ExternalPredictions {
    std::string name;
    std::filesystem::path dir;
    double threshold = 0.5;
};

struct EvalOptions {
    std::vector<Split> splits{Split::test};
    std::set<std::string> positive = wad_positive_labels();
    std::vector<ExternalPredictions> external;
    std::size_t workers = 1;
};

/// Scores models (and optional external prediction sets) on the selected
/// manifest entries, grouped by split and SNR tag.
inline Report evaluate_manifest(const CorpusManifest& manifest, const std::vector<std::pair<std::string, const Model*>>& models,
                                const EvalOptions& opts = {}) {
    std::vector<const ManifestEntry*> entries;
    for (const auto& e : manifest.entries)
        if (std::find(opts.splits.begin(), opts.splits.end(), e.split) != opts.splits.end()) entries.push_back(&e);
    if (entries.empty()) throw UsageError("manifest has no entries in the requested splits");
    const auto data = load_labeled(manifest, entries, opts.positive, opts.workers);

    Report report;
    for (const auto& [name, model] : models) {
        std::vector<ScoredUtterance> utts(entries.size());
        parallel_for(entries.size(), opts.workers, [&](std::size_t i) {
            utts[i] = {entries[i]->id, group_of(*entries[i]), forward_probs(*model, data[i].features), data[i].labels};
        });
        report.classifiers.push_back(score_classifier(name, model->threshold, utts));
    }
    for (const auto& ext : opts.external) {
        std::vector<ScoredUtterance> utts;
        for (std::size_t i = 0; i < entries.size(); ++i)
            utts.push_back({entries[i]->id, group_of(*entries[i]), read_prediction_file(ext.dir / (entries[i]->id + ".csv")),
                            data[i].labels});
        report.classifiers.push_back(score_classifier(ext.name, ext.threshold, utts));
    }
    return report;
}

}  // namespace wadkit
