#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <zlib.h>

#include "json.hpp"

#include "wadkit/audio.hpp"
#include "wadkit/datasets.hpp"
#include "wadkit/features.hpp"
#include "wadkit/projection.hpp"
#include "wadkit/util.hpp"

namespace wadkit {

inline const std::set<std::string>& labeller_vocabulary() {
    static const std::set<std::string> v{"clean_whisper", "noisy_whisper", "noise", "other"};
    return v;
}

struct Snippet {
    std::size_t id = 0;
    std::string recording_id;
    double t_start_s = 0.0;
    double t_end_s = 0.0;
    std::vector<double> embedding;
};

enum class SnippetFeature { mfcc, rasta_plp };

struct SnippetConfig {
    int snippet_ms = 500;
    SnippetFeature feature = SnippetFeature::mfcc;
    std::size_t workers = 1;
};

/// Cuts a recording into consecutive, non-overlapping snippets of
/// `snippet_ms`, dropping the short tail, and embeds each one by pooling
/// frame features over the slice. Ids continue from `first_id`.
inline std::vector<Snippet> snippetize(const AudioBuffer& audio, const std::string& recording_id, const SnippetConfig& cfg,
                                       std::size_t first_id = 0) {
    if (cfg.snippet_ms < 100 || cfg.snippet_ms > 1000)
        throw UsageError("snippet length " + std::to_string(cfg.snippet_ms) + " ms outside [100, 1000]");
    if (audio.sample_rate_hz <= 0) throw UsageError("invalid sample rate");
    const auto len = static_cast<std::size_t>(std::llround(audio.sample_rate_hz * cfg.snippet_ms / 1000.0));
    const std::size_t count = audio.size() / len;
    std::vector<Snippet> out(count);
    parallel_for(count, cfg.workers, [&](std::size_t k) {
        const AudioBuffer slice{std::vector<float>(audio.samples.begin() + static_cast<std::ptrdiff_t>(k * len),
                                                   audio.samples.begin() + static_cast<std::ptrdiff_t>((k + 1) * len)),
                                audio.sample_rate_hz};
        auto& s = out[k];
        s.id = first_id + k;
        s.recording_id = recording_id;
        s.t_start_s = static_cast<double>(k * len) / audio.sample_rate_hz;
        s.t_end_s = static_cast<double>((k + 1) * len) / audio.sample_rate_hz;
        s.embedding = snippet_embed(cfg.feature == SnippetFeature::mfcc ? mfcc_features(slice) : rasta_plp_features(slice));
    });
    return out;
}

inline Eigen::MatrixXd embedding_matrix(const std::vector<Snippet>& snippets) {
    if (snippets.empty()) return {};
    Eigen::MatrixXd X(static_cast<Eigen::Index>(snippets.size()), static_cast<Eigen::Index>(snippets[0].embedding.size()));
    for (std::size_t i = 0; i < snippets.size(); ++i)
        for (std::size_t j = 0; j < snippets[i].embedding.size(); ++j)
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = snippets[i].embedding[j];
    return X;
}

// ---------------------------------------------------------------------------
// Stored (uncompressed) ZIP archive

inline std::string make_stored_zip(const std::vector<std::pair<std::string, std::string>>& files) {
    using detail::put_le;
    std::string out, central;
    for (const auto& [name, data] : files) {
        const auto crc = static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(data.data()),
                                                            static_cast<uInt>(data.size())));
        const auto offset = static_cast<std::uint32_t>(out.size());
        const auto size = static_cast<std::uint32_t>(data.size());
        const auto nlen = static_cast<std::uint16_t>(name.size());
        put_le<std::uint32_t>(out, 0x04034b50);
        put_le<std::uint16_t>(out, 20);
        put_le<std::uint16_t>(out, 0);
        put_le<std::uint16_t>(out, 0);
        put_le<std::uint16_t>(out, 0);       // time
        put_le<std::uint16_t>(out, 0x21);    // date 1980-01-01
        put_le<std::uint32_t>(out, crc);
        put_le<std::uint32_t>(out, size);
        put_le<std::uint32_t>(out, size);
        put_le<std::uint16_t>(out, nlen);
        put_le<std::uint16_t>(out, 0);
        out += name;
        out += data;

        put_le<std::uint32_t>(central, 0x02014b50);
        put_le<std::uint16_t>(central, 20);
        put_le<std::uint16_t>(central, 20);
        put_le<std::uint16_t>(central, 0);
        put_le<std::uint16_t>(central, 0);
        put_le<std::uint16_t>(central, 0);
        put_le<std::uint16_t>(central, 0x21);
        put_le<std::uint32_t>(central, crc);
        put_le<std::uint32_t>(central, size);
        put_le<std::uint32_t>(central, size);
        put_le<std::uint16_t>(central, nlen);
        put_le<std::uint16_t>(central, 0);
        put_le<std::uint16_t>(central, 0);
        put_le<std::uint16_t>(central, 0);
        put_le<std::uint16_t>(central, 0);
        put_le<std::uint32_t>(central, 0);
        put_le<std::uint32_t>(central, offset);
        central += name;
    }
    const auto cd_offset = static_cast<std::uint32_t>(out.size());
    out += central;
    put_le<std::uint32_t>(out, 0x06054b50);
    put_le<std::uint16_t>(out, 0);
    put_le<std::uint16_t>(out, 0);
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(files.size()));
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(files.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(central.size()));
    put_le<std::uint32_t>(out, cd_offset);
    put_le<std::uint16_t>(out, 0);
    return out;
}

// ---------------------------------------------------------------------------
// Session

struct Recording {
    std::string id;
    std::string path;
    AudioBuffer audio;  // 16 kHz
};

struct SessionConfig {
    std::vector<std::string> recordings;
    int snippet_ms = 500;
    std::string projection = "pca";
    std::uint64_t seed = 1;
    SnippetFeature feature = SnippetFeature::mfcc;
    double perplexity = 30.0;
    int tsne_iterations = 1000;
    std::size_t workers = 1;
};

struct LabelAssignment {
    std::vector<std::size_t> ids;
    std::string label;
};

struct ProjectionJob {
    std::string id;
    std::string method;
    std::uint64_t seed = 0;
    std::string status = "queued";  // queued, running, done, failed
    std::string error;
};

/// Labelling session. Snippets are fixed at creation; labels live in an
/// append-only history whose replay gives the current state. Every mutation
/// is appended to a JSON-lines event log when one is attached, and
/// `Session::replay` rebuilds an identical session from that log.
class Session {
public:
    Session(std::string id, SessionConfig cfg, std::filesystem::path log_path = {})
        : id_(std::move(id)), cfg_(std::move(cfg)), log_path_(std::move(log_path)) {
        if (cfg_.projection != "pca" && cfg_.projection != "tsne") throw UsageError("projection must be pca or tsne");
        if (cfg_.recordings.empty()) throw UsageError("session needs at least one recording");
        std::set<std::string> used;
        for (const auto& path : cfg_.recordings) {
            Recording r;
            r.path = path;
            std::string base = std::filesystem::path(path).stem().string();
            r.id = base;
            for (int k = 2; used.contains(r.id); ++k) r.id = base + "_" + std::to_string(k);
            used.insert(r.id);
            AudioBuffer a = load_wav(path);
            r.audio = a.sample_rate_hz == 16000 ? std::move(a) : resample(a, 16000);
            auto snips = snippetize(r.audio, r.id, {cfg_.snippet_ms, cfg_.feature, cfg_.workers}, snippets_.size());
            snippets_.insert(snippets_.end(), std::make_move_iterator(snips.begin()), std::make_move_iterator(snips.end()));
            recordings_.push_back(std::move(r));
        }
        labels_.assign(snippets_.size(), std::nullopt);
        if (snippets_.size() >= 3) coords_["pca"] = project_pca(embedding_matrix(snippets_));
        active_ = "pca";
        log({{"event", "create"},
             {"id", id_},
             {"recordings", cfg_.recordings},
             {"snippet_ms", cfg_.snippet_ms},
             {"projection", cfg_.projection},
             {"seed", cfg_.seed},
             {"feature", cfg_.feature == SnippetFeature::mfcc ? "mfcc" : "rasta_plp"},
             {"perplexity", cfg_.perplexity},
             {"tsne_iterations", cfg_.tsne_iterations}});
    }

    ~Session() { wait_for_jobs(); }

    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    /// Rebuilds a session from its event log; further events append to it.
    static std::unique_ptr<Session> replay(const std::filesystem::path& log_path, std::size_t workers = 1) {
        std::ifstream in(log_path);
        if (!in) throw MissingInputError("missing session log " + log_path.string());
        std::string line;
        std::vector<nlohmann::json> events;
        while (std::getline(in, line))
            if (!line.empty()) {
                try {
                    events.push_back(nlohmann::json::parse(line));
                } catch (const nlohmann::json::exception& e) {
                    throw FormatError(log_path.string() + ": " + e.what());
                }
            }
        if (events.empty() || events[0].value("event", "") != "create")
            throw FormatError(log_path.string() + ": log must start with a create event");
        const auto& c = events[0];
        SessionConfig cfg;
        cfg.recordings = c.at("recordings").get<std::vector<std::string>>();
        cfg.snippet_ms = c.at("snippet_ms").get<int>();
        cfg.projection = c.at("projection").get<std::string>();
        cfg.seed = c.at("seed").get<std::uint64_t>();
        cfg.feature = c.value("feature", "mfcc") == "mfcc" ? SnippetFeature::mfcc : SnippetFeature::rasta_plp;
        cfg.perplexity = c.value("perplexity", 30.0);
        cfg.tsne_iterations = c.value("tsne_iterations", 1000);
        cfg.workers = workers;
        auto s = std::make_unique<Session>(c.at("id").get<std::string>(), cfg);
        for (std::size_t i = 1; i < events.size(); ++i) {
            const auto& e = events[i];
            const auto kind = e.value("event", "");
            if (kind == "label") s->assign(e.at("ids").get<std::vector<std::size_t>>(), e.at("label").get<std::string>());
            else if (kind == "undo") s->undo();
            else if (kind == "projection") s->apply_projection(e.at("method").get<std::string>(), e.at("seed").get<std::uint64_t>());
            else throw FormatError(log_path.string() + ": unknown event '" + kind + "'");
        }
        s->log_path_ = log_path;
        return s;
    }

    const std::string& id() const { return id_; }
    const SessionConfig& config() const { return cfg_; }
    const std::vector<Snippet>& snippets() const { return snippets_; }
    const std::vector<Recording>& recordings() const { return recordings_; }

    std::size_t assign(const std::vector<std::size_t>& ids, const std::string& label) {
        if (!labeller_vocabulary().contains(label)) throw UsageError("unknown label '" + label + "'");
        if (ids.empty()) throw UsageError("no snippet ids given");
        for (auto id : ids)
            if (id >= snippets_.size()) throw UsageError("unknown snippet id " + std::to_string(id));
        std::unique_lock lock(mutex_);
        history_.push_back({ids, label});
        for (auto id : ids) labels_[id] = label;
        log({{"event", "label"}, {"ids", ids}, {"label", label}});
        return history_.size();
    }

    std::size_t undo() {
        std::unique_lock lock(mutex_);
        if (history_.empty()) throw UsageError("nothing to undo");
        history_.pop_back();
        labels_ = replay_labels(history_, snippets_.size());
        log({{"event", "undo"}});
        return history_.size();
    }

    std::size_t history_size() const {
        std::shared_lock lock(mutex_);
        return history_.size();
    }

    std::vector<LabelAssignment> history() const {
        std::shared_lock lock(mutex_);
        return history_;
    }

    std::vector<std::optional<std::string>> labels() const {
        std::shared_lock lock(mutex_);
        return labels_;
    }

    static std::vector<std::optional<std::string>> replay_labels(const std::vector<LabelAssignment>& history, std::size_t n) {
        std::vector<std::optional<std::string>> out(n);
        for (const auto& h : history)
            for (auto id : h.ids) out.at(id) = h.label;
        return out;
    }

    std::string active_projection() const {
        std::shared_lock lock(mutex_);
        return active_;
    }

    /// Coordinates of the active projection, if computed.
    std::optional<Eigen::MatrixXd> coords() const {
        std::shared_lock lock(mutex_);
        auto it = coords_.find(active_);
        if (it == coords_.end()) return std::nullopt;
        return it->second;
    }

    /// Computes a projection synchronously and makes it active.
    void apply_projection(const std::string& method, std::uint64_t seed) {
        auto c = compute_projection(method, seed);
        std::unique_lock lock(mutex_);
        coords_[method] = std::move(c);
        active_ = method;
        log({{"event", "projection"}, {"method", method}, {"seed", seed}});
    }

    /// Starts a background projection job; the session stays readable and
    /// labelable meanwhile.
    std::string start_projection(const std::string& method, std::uint64_t seed) {
        if (method != "pca" && method != "tsne") throw UsageError("projection must be pca or tsne");
        std::unique_lock lock(mutex_);
        const std::string job_id = "j" + std::to_string(jobs_.size() + 1);
        jobs_.push_back({job_id, method, seed});
        threads_.emplace_back([this, job_id, method, seed] {
            set_job(job_id, "running", "");
            try {
                apply_projection(method, seed);
                set_job(job_id, "done", "");
            } catch (const std::exception& e) {
                set_job(job_id, "failed", e.what());
            }
        });
        return job_id;
    }

    std::optional<ProjectionJob> job(const std::string& job_id) const {
        std::shared_lock lock(mutex_);
        for (const auto& j : jobs_)
            if (j.id == job_id) return j;
        return std::nullopt;
    }

    void wait_for_jobs() {
        std::vector<std::thread> ts;
        {
            std::unique_lock lock(mutex_);
            ts.swap(threads_);
        }
        for (auto& t : ts)
            if (t.joinable()) t.join();
    }

    /// 16 kHz audio of one snippet.
    AudioBuffer snippet_audio(std::size_t id) const {
        if (id >= snippets_.size()) throw MissingInputError("unknown snippet id " + std::to_string(id));
        const auto& s = snippets_[id];
        for (const auto& r : recordings_)
            if (r.id == s.recording_id) return r.audio.slice_seconds(s.t_start_s, s.t_end_s);
        throw MissingInputError("snippet recording missing");
    }

    /// Label tracks per recording; runs of consecutive snippets carrying the
    /// same label become one interval, unlabelled snippets are left out.
    std::map<std::string, LabelTrack> export_tracks() const {
        const auto labels = this->labels();
        std::map<std::string, LabelTrack> out;
        for (const auto& r : recordings_) out[r.id];
        for (std::size_t i = 0; i < snippets_.size(); ++i) {
            if (!labels[i]) continue;
            const auto& s = snippets_[i];
            auto& iv = out[s.recording_id].intervals;
            if (!iv.empty() && iv.back().label == *labels[i] && std::abs(iv.back().end_s - s.t_start_s) < 1e-9)
                iv.back().end_s = s.t_end_s;
            else
                iv.push_back({s.t_start_s, s.t_end_s, *labels[i]});
        }
        return out;
    }

    std::string export_zip() const {
        std::vector<std::pair<std::string, std::string>> files;
        for (const auto& [rec, track] : export_tracks()) files.emplace_back(rec + ".csv", encode_label_csv(track));
        return make_stored_zip(files);
    }

private:
    Eigen::MatrixXd compute_projection(const std::string& method, std::uint64_t seed) const {
        const auto X = embedding_matrix(snippets_);
        if (method == "pca") return project_pca(X);
        if (method == "tsne") {
            TsneConfig t;
            t.seed = seed;
            t.perplexity = cfg_.perplexity;
            t.iterations = cfg_.tsne_iterations;
            return project_tsne(X, t).coords;
        }
        throw UsageError("projection must be pca or tsne");
    }

    void set_job(const std::string& job_id, const std::string& status, const std::string& error) {
        std::unique_lock lock(mutex_);
        for (auto& j : jobs_)
            if (j.id == job_id) j.status = status, j.error = error;
    }

    void log(const nlohmann::json& event) {
        if (log_path_.empty()) return;
        std::lock_guard lock(log_mutex_);
        if (!log_path_.parent_path().empty()) std::filesystem::create_directories(log_path_.parent_path());
        std::ofstream out(log_path_, std::ios::app);
        out << event.dump() << "\n";
        if (!out) throw Error(Error::Category::other, "cannot append to session log " + log_path_.string());
    }

    std::string id_;
    SessionConfig cfg_;
    std::filesystem::path log_path_;
    std::vector<Recording> recordings_;
    std::vector<Snippet> snippets_;

    mutable std::shared_mutex mutex_;
    std::mutex log_mutex_;
    std::vector<LabelAssignment> history_;
    std::vector<std::optional<std::string>> labels_;
    std::map<std::string, Eigen::MatrixXd> coords_;
    std::string active_;
    std::vector<ProjectionJob> jobs_;
    std::vector<std::thread> threads_;
};

}  // namespace wadkit
