#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "wadkit/audio.hpp"
#include "wadkit/errors.hpp"
#include "wadkit/features.hpp"
#include "wadkit/models/training.hpp"
#include "wadkit/util.hpp"

namespace wadkit {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Label tracks

inline const std::set<std::string>& label_vocabulary() {
    static const std::set<std::string> v{"whisper", "nonspeech", "clean_whisper", "noisy_whisper", "noise", "other"};
    return v;
}

struct LabelInterval {
    double start_s = 0.0;
    double end_s = 0.0;
    std::string label;

    bool operator==(const LabelInterval&) const = default;
};

/// Sorted, non-overlapping labelled intervals of one recording.
struct LabelTrack {
    std::vector<LabelInterval> intervals;

    void validate() const {
        for (std::size_t i = 0; i < intervals.size(); ++i) {
            const auto& iv = intervals[i];
            if (!(iv.start_s >= 0.0 && iv.start_s < iv.end_s))
                throw FormatError("label interval " + std::to_string(i) + " must satisfy 0 <= start < end");
            if (!label_vocabulary().contains(iv.label)) throw FormatError("unknown label '" + iv.label + "'");
            if (i > 0 && iv.start_s < intervals[i - 1].end_s - 1e-9)
                throw FormatError("label intervals overlap or are unsorted at " + std::to_string(i));
        }
    }

    double total(const std::set<std::string>& labels) const {
        double s = 0.0;
        for (const auto& iv : intervals)
            if (labels.contains(iv.label)) s += iv.end_s - iv.start_s;
        return s;
    }

    bool operator==(const LabelTrack&) const = default;
};

inline std::string encode_label_csv(const LabelTrack& track) {
    std::string out = "start_s,end_s,label\n";
    for (const auto& iv : track.intervals) out += fixed6(iv.start_s) + "," + fixed6(iv.end_s) + "," + iv.label + "\n";
    return out;
}

inline void write_label_csv(const LabelTrack& track, const fs::path& path) {
    track.validate();
    detail::spit(path, encode_label_csv(track));
}

inline LabelTrack parse_label_csv(const std::string& text, const std::string& name = "labels") {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("start_s,end_s,label", 0) != 0)
        throw FormatError(name + ": expected header start_s,end_s,label");
    LabelTrack t;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto a = line.find(','), b = line.find(',', a == std::string::npos ? a : a + 1);
        if (a == std::string::npos || b == std::string::npos)
            throw FormatError(name + ":" + std::to_string(lineno) + ": expected three fields");
        try {
            t.intervals.push_back({std::stod(line.substr(0, a)), std::stod(line.substr(a + 1, b - a - 1)), line.substr(b + 1)});
        } catch (const std::logic_error&) {
            throw FormatError(name + ":" + std::to_string(lineno) + ": malformed number");
        }
    }
    try {
        t.validate();
    } catch (const FormatError& e) {
        throw FormatError(name + ": " + e.what());
    }
    return t;
}

inline LabelTrack read_label_csv(const fs::path& path) { return parse_label_csv(detail::slurp(path), path.string()); }

/// Frame i spans [i*hop, i*hop + window); it is positive when at least half
/// of that span lies inside intervals carrying a positive label.
inline std::vector<int> label_frames(const LabelTrack& track, std::size_t n_frames, double window_s, double hop_s,
                                     const std::set<std::string>& positive) {
    std::vector<int> out(n_frames, 0);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n_frames; ++i) {
        const double a = static_cast<double>(i) * hop_s, b = a + window_s;
        while (k < track.intervals.size() && track.intervals[k].end_s <= a) ++k;
        double overlap = 0.0;
        for (std::size_t j = k; j < track.intervals.size() && track.intervals[j].start_s < b; ++j) {
            const auto& iv = track.intervals[j];
            if (!positive.contains(iv.label)) continue;
            overlap += std::max(0.0, std::min(b, iv.end_s) - std::max(a, iv.start_s));
        }
        out[i] = overlap >= 0.5 * window_s - 1e-9 ? 1 : 0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Mixing

struct MixResult {
    AudioBuffer mixture;
    double gain = 1.0;
    double peak_scale = 1.0;  // applied to the whole mixture when |x| > 1
    std::size_t noise_offset = 0;
    double speech_power = 0.0;
    double noise_power = 0.0;  // of the scaled noise slice, gain^2 * P_n
};

inline double snr_db_of(double speech_power, double noise_power) {
    return 10.0 * std::log10(speech_power / noise_power);
}

/// Adds a seeded slice of `noise`, scaled so the speech-to-noise power ratio
/// equals snr_db. Speech power is the mean square over the first
/// `speech_active_len` samples (the whole buffer by default); noise power is
/// the mean square of the slice actually added.
inline MixResult mix_at_snr(const AudioBuffer& speech, const AudioBuffer& noise, double snr_db, std::uint64_t seed,
                            std::optional<std::size_t> speech_active_len = std::nullopt) {
    if (!std::isfinite(snr_db)) throw UsageError("snr_db must be finite");
    if (speech.sample_rate_hz != noise.sample_rate_hz)
        throw UsageError("speech and noise sample rates differ (" + std::to_string(speech.sample_rate_hz) + " vs " +
                         std::to_string(noise.sample_rate_hz) + ")");
    if (noise.size() < speech.size())
        throw UsageError("noise (" + std::to_string(noise.size()) + " samples) is shorter than speech (" +
                         std::to_string(speech.size()) + ")");
    const std::size_t active = std::min(speech_active_len.value_or(speech.size()), speech.size());
    MixResult r;
    r.speech_power = mean_square(std::span(speech.samples).first(active));
    if (!(r.speech_power > 0.0)) throw NumericalError("speech is silent (zero power); SNR undefined");

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> off(0, noise.size() - speech.size());
    r.noise_offset = off(rng);
    const auto slice = std::span(noise.samples).subspan(r.noise_offset, speech.size());
    const double pn = mean_square(slice);
    if (!(pn > 0.0)) throw NumericalError("noise slice is silent (zero power); SNR undefined");
    r.gain = std::sqrt(r.speech_power / (pn * std::pow(10.0, snr_db / 10.0)));
    r.noise_power = r.gain * r.gain * pn;

    std::vector<double> mix(speech.size());
    double peak = 0.0;
    for (std::size_t i = 0; i < mix.size(); ++i) {
        mix[i] = static_cast<double>(speech.samples[i]) + r.gain * static_cast<double>(slice[i]);
        peak = std::max(peak, std::abs(mix[i]));
    }
    if (peak > 1.0) r.peak_scale = 1.0 / peak;
    r.mixture.sample_rate_hz = speech.sample_rate_hz;
    r.mixture.samples.resize(mix.size());
    for (std::size_t i = 0; i < mix.size(); ++i)
        r.mixture.samples[i] = static_cast<float>(std::clamp(mix[i] * r.peak_scale, -1.0, 1.0));
    return r;
}

/// Doubles the buffer with digital silence and labels the new half nonspeech.
inline std::pair<AudioBuffer, LabelTrack> append_silence(const AudioBuffer& speech, const LabelTrack& labels) {
    AudioBuffer out = speech;
    out.samples.resize(2 * speech.size(), 0.0f);
    LabelTrack t = labels;
    if (!speech.empty()) t.intervals.push_back({speech.duration_s(), out.duration_s(), "nonspeech"});
    return {std::move(out), std::move(t)};
}

/// Repeats `noise` end to end until it holds at least `len` samples.
inline AudioBuffer tile_to(const AudioBuffer& noise, std::size_t len) {
    if (noise.empty()) throw UsageError("cannot tile an empty noise recording");
    AudioBuffer out{{}, noise.sample_rate_hz};
    out.samples.reserve(std::max(len, noise.size()));
    while (out.size() < len) out.samples.insert(out.samples.end(), noise.samples.begin(), noise.samples.end());
    if (out.empty()) out.samples = noise.samples;
    return out;
}

// ---------------------------------------------------------------------------
// Speaker splits

enum class Split { train, val, test, unused };

inline std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
        case Split::unused: return "unused";
    }
    return "?";
}

inline Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    if (s == "unused") return Split::unused;
    throw FormatError("unknown split '" + s + "'");
}

struct Speaker {
    std::string id;
    char sex = 'M';  // 'M' or 'F'
};

/// Defaults: 15 male + 12 female training speakers, 5 male + 4 female test
/// speakers, 20% of each training speaker's utterances held out for
/// validation.
struct SplitConfig {
    std::size_t train_male = 15, train_female = 12;
    std::size_t test_male = 5, test_female = 4;
    double val_fraction = 0.2;
};

/// Speaker-disjoint train/test assignment; speakers beyond the configured
/// counts are marked unused.
inline std::map<std::string, Split> split_speakers(std::vector<Speaker> table, std::uint64_t seed,
                                                   const SplitConfig& cfg = {}) {
    std::sort(table.begin(), table.end(), [](const Speaker& a, const Speaker& b) { return a.id < b.id; });
    std::map<std::string, Split> out;
    for (char sex : {'M', 'F'}) {
        std::vector<std::string> ids;
        for (const auto& s : table)
            if (s.sex == sex) ids.push_back(s.id);
        const std::size_t n_train = sex == 'M' ? cfg.train_male : cfg.train_female;
        const std::size_t n_test = sex == 'M' ? cfg.test_male : cfg.test_female;
        if (ids.size() < n_train + n_test)
            throw UsageError(std::string("need ") + std::to_string(n_train + n_test) + (sex == 'M' ? " male" : " female") +
                             " speakers, found " + std::to_string(ids.size()));
        std::mt19937_64 rng(derive_seed(seed, std::string("speakers/") + sex));
        std::shuffle(ids.begin(), ids.end(), rng);
        for (std::size_t i = 0; i < ids.size(); ++i)
            out[ids[i]] = i < n_train ? Split::train : (i < n_train + n_test ? Split::test : Split::unused);
    }
    for (const auto& s : table)
        if (!out.contains(s.id)) throw UsageError("speaker " + s.id + " has sex '" + std::string(1, s.sex) + "', expected M or F");
    return out;
}

/// Picks round(fraction * n) of each training speaker's utterances for
/// validation. `utterances` maps utterance id to speaker id.
inline std::set<std::string> assign_validation(const std::map<std::string, std::string>& utterances,
                                               const std::map<std::string, Split>& speakers, double fraction,
                                               std::uint64_t seed) {
    std::map<std::string, std::vector<std::string>> by_speaker;
    for (const auto& [utt, spk] : utterances) {
        auto it = speakers.find(spk);
        if (it != speakers.end() && it->second == Split::train) by_speaker[spk].push_back(utt);
    }
    std::set<std::string> val;
    for (auto& [spk, utts] : by_speaker) {
        std::mt19937_64 rng(derive_seed(seed, "val/" + spk));
        std::shuffle(utts.begin(), utts.end(), rng);
        const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(utts.size())));
        for (std::size_t i = 0; i < k && i < utts.size(); ++i) val.insert(utts[i]);
    }
    return val;
}

// ---------------------------------------------------------------------------
// Manifests

struct ManifestEntry {
    std::string id;
    std::string mixture_path;  // relative to the manifest directory
    std::string speaker;
    std::string sex;
    std::optional<double> snr_db;
    std::string noise_type;
    Split split = Split::train;
    std::string label_path;
    nlohmann::json extra = nlohmann::json::object();
};

inline void to_json(nlohmann::json& j, const ManifestEntry& e) {
    j = nlohmann::json{{"id", e.id},
                       {"mixture_path", e.mixture_path},
                       {"speaker", e.speaker},
                       {"sex", e.sex},
                       {"snr_db", e.snr_db ? nlohmann::json(*e.snr_db) : nlohmann::json(nullptr)},
                       {"noise_type", e.noise_type},
                       {"split", to_string(e.split)},
                       {"label_path", e.label_path}};
    for (const auto& [k, v] : e.extra.items()) j[k] = v;
}

inline void from_json(const nlohmann::json& j, ManifestEntry& e) {
    static const std::set<std::string> core{"id",         "mixture_path", "speaker", "sex",
                                            "snr_db",     "noise_type",   "split",   "label_path"};
    j.at("id").get_to(e.id);
    j.at("mixture_path").get_to(e.mixture_path);
    e.speaker = j.value("speaker", "");
    e.sex = j.value("sex", "");
    if (j.contains("snr_db") && !j["snr_db"].is_null()) e.snr_db = j["snr_db"].get<double>();
    else e.snr_db.reset();
    e.noise_type = j.value("noise_type", "");
    e.split = split_from_string(j.at("split").get<std::string>());
    j.at("label_path").get_to(e.label_path);
    e.extra = nlohmann::json::object();
    for (const auto& [k, v] : j.items())
        if (!core.contains(k)) e.extra[k] = v;
}

struct CorpusManifest {
    fs::path base;  // directory relative paths resolve against
    std::vector<ManifestEntry> entries;

    fs::path resolve(const std::string& p) const {
        const fs::path q(p);
        return q.is_absolute() ? q : base / q;
    }

    std::vector<const ManifestEntry*> select(std::initializer_list<Split> splits) const {
        std::vector<const ManifestEntry*> out;
        for (const auto& e : entries)
            if (std::find(splits.begin(), splits.end(), e.split) != splits.end()) out.push_back(&e);
        return out;
    }

    void sort() {
        std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    }
};

inline std::string encode_manifest(const CorpusManifest& m) {
    std::string out;
    for (const auto& e : m.entries) out += nlohmann::json(e).dump() + "\n";
    return out;
}

inline void write_manifest(const CorpusManifest& m, const fs::path& path) { detail::spit(path, encode_manifest(m)); }

inline CorpusManifest read_manifest(const fs::path& path) {
    CorpusManifest m;
    m.base = path.parent_path();
    std::istringstream in(detail::slurp(path));
    std::string line;
    std::size_t lineno = 0;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        try {
            auto e = nlohmann::json::parse(line).get<ManifestEntry>();
            if (!seen.insert(e.id).second) throw FormatError("duplicate id " + e.id);
            m.entries.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Corpus inputs

struct CleanUtterance {
    std::string id;
    fs::path path;
    std::string speaker;
    char sex = 'M';
};

struct NoiseRecording {
    fs::path path;
    std::string type;
};

namespace detail {

inline std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path, const std::vector<std::string>& header) {
    std::istringstream in(slurp(path));
    std::string line;
    std::vector<std::vector<std::string>> rows;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": empty index");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string expect;
    for (std::size_t i = 0; i < header.size(); ++i) expect += (i ? "," : "") + header[i];
    if (line != expect) throw FormatError(path.string() + ": expected header '" + expect + "'");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != header.size())
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(header.size()) + " fields");
        rows.push_back(std::move(f));
    }
    return rows;
}

}  // namespace detail

/// `dir/index.csv` with header `path,speaker,sex`; paths relative to dir.
/// The utterance id is `<speaker>_<file stem>`.
inline std::vector<CleanUtterance> read_clean_index(const fs::path& dir) {
    const auto index = dir / "index.csv";
    if (!fs::exists(index)) throw MissingInputError("missing " + index.string());
    std::vector<CleanUtterance> out;
    std::set<std::string> ids;
    for (const auto& r : detail::read_csv_rows(index, {"path", "speaker", "sex"})) {
        if (r[2] != "M" && r[2] != "F") throw FormatError(index.string() + ": sex must be M or F, got '" + r[2] + "'");
        CleanUtterance u{r[1] + "_" + fs::path(r[0]).stem().string(), dir / r[0], r[1], r[2][0]};
        if (!ids.insert(u.id).second) throw FormatError(index.string() + ": duplicate utterance id " + u.id);
        out.push_back(std::move(u));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return out;
}

/// `dir/index.csv` with header `path,noise_type`; paths relative to dir.
inline std::vector<NoiseRecording> read_noise_index(const fs::path& dir) {
    const auto index = dir / "index.csv";
    if (!fs::exists(index)) throw MissingInputError("missing " + index.string());
    std::vector<NoiseRecording> out;
    for (const auto& r : detail::read_csv_rows(index, {"path", "noise_type"})) out.push_back({dir / r[0], r[1]});
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return std::tie(a.type, a.path) < std::tie(b.type, b.path);
    });
    return out;
}

struct CorpusConfig {
    fs::path clean_dir, noise_dir, out_dir;
    std::vector<double> snrs{10.0, 5.0, 0.0};
    std::size_t per_combo = 50;
    std::uint64_t seed = 1;
    SplitConfig split{};
    /// Which utterances a combination draws from: "all" (each entry keeps its
    /// speaker's split), "train" (train and val speakers) or "test".
    std::string pool = "all";
    int target_rate_hz = 16000;
    std::size_t workers = 1;
};

/// Baseline WAD corpus: for every (noise type, SNR) pair, per_combo
/// utterances drawn without replacement, resampled, followed by an equal
/// length of silence, and mixed over the full length with a slice of one
/// recording of that noise type.
inline CorpusManifest build_noisy_corpus(const CorpusConfig& cfg) {
    const auto clean = read_clean_index(cfg.clean_dir);
    const auto noise = read_noise_index(cfg.noise_dir);
    if (cfg.pool != "all" && cfg.pool != "train" && cfg.pool != "test")
        throw UsageError("pool must be all, train or test");

    std::map<std::string, char> sexes;
    std::map<std::string, std::string> utt_speaker;
    for (const auto& u : clean) {
        auto [it, fresh] = sexes.emplace(u.speaker, u.sex);
        if (!fresh && it->second != u.sex) throw FormatError("speaker " + u.speaker + " listed with both sexes");
        utt_speaker[u.id] = u.speaker;
    }
    std::vector<Speaker> table;
    for (const auto& [id, sex] : sexes) table.push_back({id, sex});
    const auto spk_split = split_speakers(table, cfg.seed, cfg.split);
    const auto val = assign_validation(utt_speaker, spk_split, cfg.split.val_fraction, cfg.seed);
    auto split_of = [&](const CleanUtterance& u) {
        const Split s = spk_split.at(u.speaker);
        return s == Split::train && val.contains(u.id) ? Split::val : s;
    };

    std::vector<const CleanUtterance*> pool;
    for (const auto& u : clean) {
        const Split s = split_of(u);
        if (s == Split::unused) continue;
        if (cfg.pool == "train" && s == Split::test) continue;
        if (cfg.pool == "test" && s != Split::test) continue;
        pool.push_back(&u);
    }

    std::map<std::string, std::vector<std::size_t>> by_type;
    for (std::size_t i = 0; i < noise.size(); ++i) by_type[noise[i].type].push_back(i);

    struct Job {
        const CleanUtterance* utt;
        std::string type;
        double snr;
        std::size_t noise_index;
        std::uint64_t seed;
        std::string id;
    };
    std::vector<Job> jobs;
    if (cfg.per_combo > 0) {
        if (pool.size() < cfg.per_combo)
            throw UsageError("pool '" + cfg.pool + "' holds " + std::to_string(pool.size()) +
                             " utterances, fewer than per_combo = " + std::to_string(cfg.per_combo));
        if (noise.empty()) throw UsageError("no noise recordings listed");
        for (const auto& [type, idx] : by_type)
            for (double snr : cfg.snrs) {
                const std::string combo = type + "/" + format_db(snr);
                auto picks = pool;
                std::mt19937_64 rng(derive_seed(cfg.seed, "combo/" + combo));
                std::shuffle(picks.begin(), picks.end(), rng);
                picks.resize(cfg.per_combo);
                for (const auto* u : picks) {
                    const std::string id = type + "_" + format_db(snr) + "dB_" + u->id;
                    const auto s = derive_seed(cfg.seed, "mix/" + id);
                    jobs.push_back({u, type, snr, idx[s % idx.size()], s, id});
                }
            }
    }

    CorpusManifest manifest;
    manifest.base = cfg.out_dir;
    if (jobs.empty()) return manifest;

    fs::create_directories(cfg.out_dir / "audio");
    fs::create_directories(cfg.out_dir / "labels");
    std::vector<std::optional<AudioBuffer>> noise_audio(noise.size());
    std::mutex noise_mutex;
    auto noise_at = [&](std::size_t i) -> const AudioBuffer& {
        std::lock_guard lock(noise_mutex);
        if (!noise_audio[i]) noise_audio[i] = resample(load_wav(noise[i].path), cfg.target_rate_hz);
        return *noise_audio[i];
    };

    manifest.entries.resize(jobs.size());
    parallel_for(jobs.size(), cfg.workers, [&](std::size_t j) {
        const auto& job = jobs[j];
        const AudioBuffer speech = resample(load_wav(job.utt->path), cfg.target_rate_hz);
        if (speech.empty()) throw FormatError(job.utt->path.string() + ": empty utterance");
        auto [doubled, track] = append_silence(speech, LabelTrack{{{0.0, speech.duration_s(), "whisper"}}});
        const AudioBuffer& nz = noise_at(job.noise_index);
        const AudioBuffer bed = nz.size() >= doubled.size() ? nz : tile_to(nz, doubled.size());
        const auto mix = mix_at_snr(doubled, bed, job.snr, job.seed, speech.size());

        ManifestEntry e;
        e.id = job.id;
        e.mixture_path = "audio/" + job.id + ".wav";
        e.label_path = "labels/" + job.id + ".csv";
        e.speaker = job.utt->speaker;
        e.sex = std::string(1, job.utt->sex);
        e.snr_db = job.snr;
        e.noise_type = job.type;
        e.split = split_of(*job.utt);
        e.extra = {{"clean_path", fs::proximate(job.utt->path, cfg.out_dir).generic_string()},
                   {"noise_path", fs::proximate(noise[job.noise_index].path, cfg.out_dir).generic_string()},
                   {"noise_tiled", nz.size() < doubled.size()},
                   {"noise_offset", mix.noise_offset},
                   {"gain", mix.gain},
                   {"peak_scale", mix.peak_scale},
                   {"speech_power", mix.speech_power},
                   {"noise_power", mix.noise_power},
                   {"speech_samples", speech.size()}};
        write_wav(mix.mixture, cfg.out_dir / e.mixture_path);
        write_label_csv(track, cfg.out_dir / e.label_path);
        manifest.entries[j] = std::move(e);
    });
    manifest.sort();
    write_manifest(manifest, cfg.out_dir / "manifest.jsonl");
    return manifest;
}

// ---------------------------------------------------------------------------
// Training data from manifests

inline const std::set<std::string>& wad_positive_labels() {
    static const std::set<std::string> s{"whisper", "clean_whisper", "noisy_whisper"};
    return s;
}

inline const std::set<std::string>& cwad_positive_labels() {
    static const std::set<std::string> s{"clean_whisper"};
    return s;
}

/// RASTA-PLP features and frame labels of the given manifest entries, in
/// entry order.
inline std::vector<LabeledUtterance> load_labeled(const CorpusManifest& m, const std::vector<const ManifestEntry*>& entries,
                                                  const std::set<std::string>& positive, std::size_t workers = 1,
                                                  const PlpConfig& plp = {}) {
    std::vector<LabeledUtterance> out(entries.size());
    parallel_for(entries.size(), workers, [&](std::size_t i) {
        const auto& e = *entries[i];
        const auto path = m.resolve(e.mixture_path);
        if (!fs::exists(path)) throw MissingInputError("missing mixture " + path.string());
        AudioBuffer audio = load_wav(path);
        if (audio.sample_rate_hz != 16000) audio = resample(audio, 16000);
        RastaPlpExtractor ex(16000, plp);
        LabeledUtterance u;
        u.features = ex(audio);
        const auto track = read_label_csv(m.resolve(e.label_path));
        u.labels = label_frames(track, u.features.rows, u.features.frame_len_s, u.features.frame_hop_s, positive);
        out[i] = std::move(u);
    });
    return out;
}

}  // namespace wadkit
