#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wadkit/audio.hpp"
#include "wadkit/datasets.hpp"
#include "wadkit/features.hpp"
#include "wadkit/models.hpp"
#include "wadkit/util.hpp"

namespace wadkit {

struct Segment {
    double start_s = 0.0;
    double end_s = 0.0;
    std::string kind;
    double mean_prob = 0.0;

    double duration() const { return end_s - start_s; }
    bool operator==(const Segment&) const = default;
};

using SegmentSet = std::vector<Segment>;

struct DetectorConfig {
    std::size_t median_window = 5;
    double exit_ratio = 0.8;        // leave speech below exit_ratio * threshold
    double min_segment_s = 0.2;
    double merge_gap_s = 0.1;
    double harvest_margin_s = 0.5;
    double min_harvest_s = 1.0;
};

/// Median filter with edge replication.
inline std::vector<double> smooth_probs(const std::vector<double>& p, std::size_t window = 5) {
    if (window == 0 || window % 2 == 0) throw UsageError("median window must be odd");
    const auto n = static_cast<long>(p.size());
    const long h = static_cast<long>(window / 2);
    std::vector<double> out(p.size()), buf(window);
    for (long i = 0; i < n; ++i) {
        for (long k = -h; k <= h; ++k) buf[static_cast<std::size_t>(k + h)] = p[static_cast<std::size_t>(std::clamp(i + k, 0L, n - 1))];
        std::nth_element(buf.begin(), buf.begin() + h, buf.end());
        out[static_cast<std::size_t>(i)] = buf[static_cast<std::size_t>(h)];
    }
    return out;
}

/// Frame timing used to place probabilities on the time axis: frame i owns
/// [i*hop, (i+1)*hop), the last frame extends to the recording end.
struct FrameClock {
    double hop_s = 0.02;
    double window_s = 0.04;
    double duration_s = 0.0;
    std::size_t frames = 0;

    double start(std::size_t i) const { return std::min(duration_s, static_cast<double>(i) * hop_s); }
    double end(std::size_t i) const {
        return i + 1 >= frames ? duration_s : std::min(duration_s, static_cast<double>(i + 1) * hop_s);
    }
    /// Frames whose slot lies inside [a, b).
    std::pair<std::size_t, std::size_t> frames_within(double a, double b) const {
        std::size_t lo = frames, hi = 0;
        for (std::size_t i = 0; i < frames; ++i)
            if (start(i) >= a - 1e-9 && end(i) <= b + 1e-9) {
                lo = std::min(lo, i);
                hi = i + 1;
            }
        return {lo, std::max(lo, hi)};
    }
};

namespace detail {

inline double mean_over(const std::vector<double>& p, std::size_t a, std::size_t b) {
    if (b <= a) return 0.0;
    double s = 0.0;
    for (std::size_t i = a; i < b; ++i) s += p[i];
    return s / static_cast<double>(b - a);
}

/// Complement of sorted, non-overlapping `segs` within [0, duration).
inline SegmentSet complement(const SegmentSet& segs, double duration, const std::string& kind) {
    SegmentSet out;
    double t = 0.0;
    for (const auto& s : segs) {
        if (s.start_s > t) out.push_back({t, s.start_s, kind, 0.0});
        t = std::max(t, s.end_s);
    }
    if (duration > t) out.push_back({t, duration, kind, 0.0});
    return out;
}

inline void fill_means(SegmentSet& segs, const std::vector<double>& p, const FrameClock& clock) {
    for (auto& s : segs) {
        const auto [a, b] = clock.frames_within(s.start_s, s.end_s);
        s.mean_prob = mean_over(p, a, b);
    }
}

}  // namespace detail

/// Hysteresis segmentation: speech starts at prob >= threshold and ends when
/// prob drops below exit_ratio * threshold; gaps shorter than merge_gap_s are
/// closed, then segments shorter than min_segment_s dropped. Returns the
/// speech segments (kind `speech_kind`) followed by the complementary noise
/// segments.
inline SegmentSet probs_to_segments(const std::vector<double>& probs, double threshold, const FrameClock& clock,
                                    const DetectorConfig& cfg = {}, const std::string& speech_kind = "whisper") {
    if (!(threshold > 0.0 && threshold < 1.0)) throw UsageError("threshold must lie in (0, 1)");
    if (probs.size() != clock.frames) throw UsageError("probability count does not match frame clock");
    SegmentSet speech;
    bool in = false;
    std::size_t begin = 0;
    for (std::size_t i = 0; i <= probs.size(); ++i) {
        const bool end_of_input = i == probs.size();
        if (!in && !end_of_input && probs[i] >= threshold) {
            in = true;
            begin = i;
        } else if (in && (end_of_input || probs[i] < cfg.exit_ratio * threshold)) {
            in = false;
            speech.push_back({clock.start(begin), clock.end(i - 1), speech_kind, 0.0});
        }
    }
    SegmentSet merged;
    for (const auto& s : speech) {
        if (!merged.empty() && s.start_s - merged.back().end_s < cfg.merge_gap_s - 1e-9) merged.back().end_s = s.end_s;
        else merged.push_back(s);
    }
    SegmentSet kept;
    for (const auto& s : merged)
        if (s.duration() >= cfg.min_segment_s - 1e-9) kept.push_back(s);
    auto noise = detail::complement(kept, clock.duration_s, "noise");
    detail::fill_means(kept, probs, clock);
    detail::fill_means(noise, probs, clock);
    kept.insert(kept.end(), noise.begin(), noise.end());
    return kept;
}

inline SegmentSet of_kind(const SegmentSet& s, const std::string& kind) {
    SegmentSet out;
    for (const auto& x : s)
        if (x.kind == kind) out.push_back(x);
    return out;
}

/// Noise intervals that stay clear of every speech decision: the complement
/// of the detected speech segments and of every frame window scoring at or
/// above threshold, eroded by margin_s at both ends, keeping pieces of at
/// least min_harvest_s.
inline SegmentSet harvest_from_probs(const std::vector<double>& raw, const std::vector<double>& smoothed, double threshold,
                                     const FrameClock& clock, const DetectorConfig& cfg = {}) {
    auto segs = probs_to_segments(smoothed, threshold, clock, cfg);
    SegmentSet blocked = of_kind(segs, "whisper");
    for (std::size_t i = 0; i < raw.size(); ++i)
        if (raw[i] >= threshold)
            blocked.push_back({clock.start(i), std::min(clock.duration_s, clock.start(i) + clock.window_s), "whisper", 0.0});
    std::sort(blocked.begin(), blocked.end(), [](const auto& a, const auto& b) { return a.start_s < b.start_s; });
    SegmentSet out;
    for (auto s : detail::complement(blocked, clock.duration_s, "noise")) {
        s.start_s += cfg.harvest_margin_s;
        s.end_s -= cfg.harvest_margin_s;
        if (s.duration() >= cfg.min_harvest_s - 1e-9) out.push_back(s);
    }
    detail::fill_means(out, raw, clock);
    return out;
}

struct Detection {
    std::vector<double> raw;
    std::vector<double> smoothed;
    FrameClock clock;
    SegmentSet segments;
};

/// Runs a model over a recording (resampled to 16 kHz) and segments the
/// smoothed probabilities.
inline Detection detect(const AudioBuffer& recording, const Model& model, const DetectorConfig& cfg = {},
                        const std::string& speech_kind = "whisper") {
    const AudioBuffer audio = recording.sample_rate_hz == 16000 ? recording : resample(recording, 16000);
    Detection d;
    const auto features = rasta_plp_features(audio);
    d.raw = forward_probs(model, features);
    d.smoothed = smooth_probs(d.raw, cfg.median_window);
    d.clock = {features.frame_hop_s, features.frame_len_s, audio.duration_s(), d.raw.size()};
    d.segments = probs_to_segments(d.smoothed, model.threshold, d.clock, cfg, speech_kind);
    return d;
}

inline std::string encode_segments_csv(const SegmentSet& segs) {
    std::string out = "start_s,end_s,kind,mean_prob\n";
    for (const auto& s : segs) out += fixed6(s.start_s) + "," + fixed6(s.end_s) + "," + s.kind + "," + fixed6(s.mean_prob) + "\n";
    return out;
}

inline void write_segments_csv(const SegmentSet& segs, const std::filesystem::path& path) {
    detail::spit(path, encode_segments_csv(segs));
}

inline std::string segment_wav_name(const std::string& recording_id, const Segment& s) {
    return recording_id + "_" + std::to_string(std::llround(s.start_s * 1000.0)) + "_" +
           std::to_string(std::llround(s.end_s * 1000.0)) + ".wav";
}

/// Writes each segment as a 16 kHz mono WAV; returns the file paths.
inline std::vector<std::filesystem::path> write_segment_wavs(const AudioBuffer& audio, const SegmentSet& segs,
                                                             const std::string& recording_id,
                                                             const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const AudioBuffer a16 = audio.sample_rate_hz == 16000 ? audio : resample(audio, 16000);
    std::vector<std::filesystem::path> out;
    for (const auto& s : segs) {
        const auto path = dir / segment_wav_name(recording_id, s);
        write_wav(a16.slice_seconds(s.start_s, s.end_s), path);
        out.push_back(path);
    }
    return out;
}

struct HarvestResult {
    Detection detection;
    SegmentSet noise;
    std::vector<std::filesystem::path> files;
};

/// Step 2: extracts stretches the WAD model considers free of whisper.
/// Files go to `out_dir` when it is non-empty.
inline HarvestResult harvest_noise(const AudioBuffer& recording, const Model& wad, const std::string& recording_id,
                                   const std::filesystem::path& out_dir = {}, const DetectorConfig& cfg = {}) {
    HarvestResult r;
    r.detection = detect(recording, wad, cfg);
    r.noise = harvest_from_probs(r.detection.raw, r.detection.smoothed, wad.threshold, r.detection.clock, cfg);
    if (!out_dir.empty()) {
        r.files = write_segment_wavs(recording, r.noise, recording_id, out_dir);
        write_segments_csv(r.noise, out_dir / (recording_id + "_noise.csv"));
    }
    return r;
}

struct ExtractResult {
    Detection detection;
    SegmentSet clean;
    double total_s = 0.0;
    std::vector<std::filesystem::path> files;
};

/// Step 5 output: clean-whisper segments of a recording under the CWAD.
inline ExtractResult extract_clean_whisper(const AudioBuffer& recording, const Model& cwad, const std::string& recording_id,
                                           const std::filesystem::path& out_dir = {}, const DetectorConfig& cfg = {}) {
    ExtractResult r;
    r.detection = detect(recording, cwad, cfg, "clean_whisper");
    r.clean = of_kind(r.detection.segments, "clean_whisper");
    for (const auto& s : r.clean) r.total_s += s.duration();
    if (!out_dir.empty()) {
        r.files = write_segment_wavs(recording, r.clean, recording_id, out_dir);
        write_segments_csv(r.clean, out_dir / (recording_id + "_clean.csv"));
    }
    return r;
}

// ---------------------------------------------------------------------------
// Augmentation and fine-tuning

struct NamedAudio {
    std::string id;
    AudioBuffer audio;
    std::string type;  // noise type tag; unused for clean segments
};

struct AugmentConfig {
    std::filesystem::path out_dir;
    std::vector<double> snrs{10.0, 5.0, 0.0};
    std::uint64_t seed = 1;
    double train_fraction = 0.6, val_fraction = 0.2;
    std::size_t workers = 1;
};

struct AugmentResult {
    CorpusManifest manifest;
    std::vector<std::string> warnings;
};

/// Step 4: every clean segment is kept as a clean copy and mixed with one
/// recording of each noise type at each SNR. As in the baseline corpus each
/// item is followed by an equal length of silence before mixing, so noisy
/// items end in pure trigger noise. Labels: clean copy = clean_whisper then
/// nonspeech; mixture = noisy_whisper then noise. Splits are drawn per
/// clean segment.
inline AugmentResult build_augmented_corpus(const std::vector<NamedAudio>& clean, const std::vector<NamedAudio>& noises,
                                            const AugmentConfig& cfg) {
    if (clean.empty()) throw UsageError("no clean whisper segments given");
    AugmentResult res;
    if (noises.empty()) res.warnings.push_back("no harvested noise given; manifest holds clean copies only");

    std::vector<std::string> ids;
    for (const auto& c : clean) ids.push_back(c.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw UsageError("duplicate clean segment ids");
    std::mt19937_64 rng(derive_seed(cfg.seed, "augment/split"));
    std::shuffle(ids.begin(), ids.end(), rng);
    std::map<std::string, Split> split;
    const auto n = static_cast<double>(ids.size());
    const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * n));
    const auto n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * n));
    for (std::size_t i = 0; i < ids.size(); ++i)
        split[ids[i]] = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);

    std::map<std::string, std::vector<std::size_t>> by_type;
    for (std::size_t i = 0; i < noises.size(); ++i) by_type[noises[i].type].push_back(i);

    struct Job {
        std::size_t clean;
        std::optional<std::size_t> noise;
        double snr = 0.0;
        std::string id;
        std::uint64_t seed = 0;
    };
    std::vector<Job> jobs;
    for (std::size_t c = 0; c < clean.size(); ++c) {
        jobs.push_back({c, std::nullopt, 0.0, "clean_" + clean[c].id, 0});
        for (const auto& [type, idx] : by_type)
            for (double snr : cfg.snrs) {
                const std::string id = "mix_" + type + "_" + format_db(snr) + "dB_" + clean[c].id;
                const auto s = derive_seed(cfg.seed, id);
                jobs.push_back({c, idx[s % idx.size()], snr, id, s});
            }
    }

    std::filesystem::create_directories(cfg.out_dir / "audio");
    std::filesystem::create_directories(cfg.out_dir / "labels");
    res.manifest.base = cfg.out_dir;
    res.manifest.entries.resize(jobs.size());
    parallel_for(jobs.size(), cfg.workers, [&](std::size_t j) {
        const auto& job = jobs[j];
        const auto& src = clean[job.clean];
        const AudioBuffer speech = src.audio.sample_rate_hz == 16000 ? src.audio : resample(src.audio, 16000);
        if (speech.empty()) throw UsageError("clean segment " + src.id + " is empty");
        ManifestEntry e;
        e.id = job.id;
        e.mixture_path = "audio/" + job.id + ".wav";
        e.label_path = "labels/" + job.id + ".csv";
        e.speaker = src.id;
        e.split = split.at(src.id);
        AudioBuffer out;
        LabelTrack track;
        if (!job.noise) {
            auto [doubled, t] = append_silence(speech, LabelTrack{{{0.0, speech.duration_s(), "clean_whisper"}}});
            out = std::move(doubled);
            track = std::move(t);
            e.noise_type = "none";
        } else {
            const auto& nz = noises[*job.noise];
            const AudioBuffer n16 = nz.audio.sample_rate_hz == 16000 ? nz.audio : resample(nz.audio, 16000);
            auto [doubled, t] = append_silence(speech, LabelTrack{{{0.0, speech.duration_s(), "noisy_whisper"}}});
            t.intervals.back().label = "noise";
            const AudioBuffer bed = n16.size() >= doubled.size() ? n16 : tile_to(n16, doubled.size());
            const auto mix = mix_at_snr(doubled, bed, job.snr, job.seed, speech.size());
            out = mix.mixture;
            track = std::move(t);
            e.snr_db = job.snr;
            e.noise_type = nz.type;
            e.extra = {{"noise_id", nz.id},
                       {"noise_tiled", n16.size() < doubled.size()},
                       {"noise_offset", mix.noise_offset},
                       {"gain", mix.gain},
                       {"peak_scale", mix.peak_scale},
                       {"speech_power", mix.speech_power},
                       {"noise_power", mix.noise_power},
                       {"speech_samples", speech.size()}};
        }
        write_wav(out, cfg.out_dir / e.mixture_path);
        write_label_csv(track, cfg.out_dir / e.label_path);
        res.manifest.entries[j] = std::move(e);
    });
    res.manifest.sort();
    write_manifest(res.manifest, cfg.out_dir / "manifest.jsonl");
    return res;
}

struct FineTuneConfig {
    std::size_t epochs = 10;
    double learning_rate = 1e-4;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> seq_stride;
    std::size_t workers = 1;
    TrainingLog* log = nullptr;
};

/// Step 5: continues training the WAD LSTM on clean-vs-noisy labels with
/// class weighting, keeping its normalisation; the threshold is chosen again
/// on the manifest's validation split.
inline Model fine_tune_cwad(const Model& base, const CorpusManifest& augmented, const FineTuneConfig& cfg = {}) {
    if (base.spec.kind != ModelKind::lstm) throw UsageError("fine-tuning expects an LSTM base model");
    const auto train = load_labeled(augmented, augmented.select({Split::train}), cwad_positive_labels(), cfg.workers);
    const auto val = load_labeled(augmented, augmented.select({Split::val}), cwad_positive_labels(), cfg.workers);
    if (train.empty()) throw UsageError("augmented manifest has no training entries");
    ModelSpec spec = base.spec;
    spec.learning_rate = cfg.learning_rate;
    spec.epochs = cfg.epochs;
    spec.class_weighting = true;
    spec.task = "cwad";
    if (cfg.seed) spec.seed = *cfg.seed;
    if (cfg.seq_stride) spec.seq_stride = *cfg.seq_stride;
    TrainOptions opts;
    opts.initial = &base;
    opts.log = cfg.log;
    return train_model(spec, train, val, opts);
}

}  // namespace wadkit
