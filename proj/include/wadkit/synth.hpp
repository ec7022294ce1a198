#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "wadkit/audio.hpp"
#include "wadkit/datasets.hpp"
#include "wadkit/util.hpp"

// Synthetic stand-ins for whispered speech and ASMR triggers, used for smoke
// runs and the end-to-end checks. Whisper is noise shaped by drifting formant
// resonators under a syllabic envelope; triggers are stationary hiss,
// tapping and crinkling.
namespace wadkit::synth {

inline constexpr int kRate = 16000;

struct Voice {
    double formant_scale = 1.0;
    double syllable_rate = 1.0;  // multiplies syllable durations
    double level = 0.05;         // RMS over voiced regions
    double bandwidth = 1.0;
};

inline Voice voice_for(const std::string& speaker, char sex, std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, "voice/" + speaker));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Voice v;
    v.formant_scale = (sex == 'F' ? 1.17 : 1.0) * (0.93 + 0.14 * u(rng));
    v.syllable_rate = 0.85 + 0.3 * u(rng);
    v.level = 0.03 + 0.05 * u(rng);
    v.bandwidth = 0.85 + 0.3 * u(rng);
    return v;
}

namespace detail {

struct Resonator {
    double a1 = 0, a2 = 0, b0 = 0, y1 = 0, y2 = 0;
    void set(double f, double bw) {
        const double r = std::exp(-M_PI * bw / kRate);
        a1 = 2 * r * std::cos(2 * M_PI * f / kRate);
        a2 = -r * r;
        b0 = 1 - r;
    }
    double operator()(double x) {
        const double y = b0 * x + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y;
        return y;
    }
};

// Whisper vowels: F1 raised relative to voiced speech.
inline const std::array<std::array<double, 3>, 7>& vowels() {
    static const std::array<std::array<double, 3>, 7> v{{{850, 1220, 2600},
                                                         {420, 2250, 3000},
                                                         {450, 900, 2300},
                                                         {650, 1850, 2550},
                                                         {700, 950, 2450},
                                                         {780, 1700, 2450},
                                                         {600, 1350, 2500}}};
    return v;
}

inline void normalise_rms(std::vector<double>& x, double target, std::size_t from = 0, std::size_t to = SIZE_MAX) {
    to = std::min(to, x.size());
    double e = 0;
    for (std::size_t i = from; i < to; ++i) e += x[i] * x[i];
    if (to <= from || e <= 0) return;
    const double g = target / std::sqrt(e / static_cast<double>(to - from));
    for (auto& v : x) v *= g;
}

inline AudioBuffer to_buffer(const std::vector<double>& x) {
    AudioBuffer b{std::vector<float>(x.size()), kRate};
    for (std::size_t i = 0; i < x.size(); ++i) b.samples[i] = static_cast<float>(std::clamp(x[i], -1.0, 1.0));
    return b;
}

/// Pink-ish noise from Kellet's three-pole filter.
inline std::vector<double> pink(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0, 1);
    std::vector<double> out(n);
    double b0 = 0, b1 = 0, b2 = 0;
    for (auto& v : out) {
        const double w = nd(rng);
        b0 = 0.99765 * b0 + w * 0.0990460;
        b1 = 0.96300 * b1 + w * 0.2965164;
        b2 = 0.57000 * b2 + w * 1.0526913;
        v = b0 + b1 + b2 + w * 0.1848;
    }
    return out;
}

}  // namespace detail

/// Low-level recording floor (mic hiss).
inline std::vector<double> floor_noise(std::size_t n, std::mt19937_64& rng, double rms = 3e-4) {
    auto x = detail::pink(n, rng);
    detail::normalise_rms(x, rms);
    return x;
}

/// Syllable-structured whisper of about `seconds`, with the voice active
/// over [lead, seconds - trail). Returns samples before the floor is added.
inline std::vector<double> whisper_samples(double seconds, const Voice& voice, std::uint64_t seed, double lead_s = 0.0,
                                           double trail_s = 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> nd(0.0, 1.0);
    const auto n = static_cast<std::size_t>(seconds * kRate);
    std::vector<double> env(n, 0.0), fric(n, 0.0);
    std::vector<std::array<double, 3>> target(n, detail::vowels()[0]);

    // Syllable plan.
    double t = lead_s;
    const double stop = seconds - trail_s;
    std::array<double, 3> prev = detail::vowels()[rng() % detail::vowels().size()];
    while (t < stop - 0.12) {
        const int syllables = 1 + static_cast<int>(rng() % 3);
        for (int k = 0; k < syllables && t < stop - 0.12; ++k) {
            const double dur = std::min(stop - t, voice.syllable_rate * (0.14 + 0.2 * u(rng)));
            const auto a = static_cast<std::size_t>(t * kRate), b = std::min(n, static_cast<std::size_t>((t + dur) * kRate));
            const auto next = detail::vowels()[rng() % detail::vowels().size()];
            const double onset = u(rng) < 0.6 ? 0.025 + 0.035 * u(rng) : 0.0;
            const auto fb = std::min(b, a + static_cast<std::size_t>(onset * kRate));
            for (std::size_t i = a; i < fb; ++i) fric[i] = 0.7 * std::sin(M_PI * (i - a) / std::max<double>(1.0, fb - a));
            const double att = 0.03, dec = 0.06, peak = 0.6 + 0.4 * u(rng);
            for (std::size_t i = fb; i < b; ++i) {
                const double tt = static_cast<double>(i - fb) / kRate, left = static_cast<double>(b - i) / kRate;
                env[i] = peak * std::min({1.0, tt / att, left / dec});
                const double glide = std::min(1.0, static_cast<double>(i - fb) / (0.4 * std::max<double>(1.0, b - fb)));
                for (int f = 0; f < 3; ++f) target[i][f] = prev[f] + glide * (next[f] - prev[f]);
            }
            prev = next;
            t += dur + 0.01 + 0.03 * u(rng);
        }
        t += 0.06 + 0.14 * u(rng);
    }

    std::array<detail::Resonator, 4> res;
    std::vector<double> out(n, 0.0);
    double hp_x = 0, hp_y = 0, fx1 = 0, fy = 0;
    const std::array<double, 4> gain{1.0, 0.8, 0.45, 0.3};
    const std::array<double, 4> bw{180, 220, 280, 350};
    for (std::size_t i = 0; i < n; ++i) {
        if (i % 80 == 0)
            for (int f = 0; f < 4; ++f) {
                const double freq = f < 3 ? target[i][f] : 3500.0;
                res[f].set(std::min(0.45 * kRate, freq * voice.formant_scale), bw[f] * voice.bandwidth);
            }
        const double e = nd(rng);
        double v = 0;
        for (int f = 0; f < 4; ++f) v += gain[f] * res[f](e);
        // Fricative: differentiated noise, strong above 3 kHz.
        const double w = nd(rng);
        const double hf = w - fx1;
        fx1 = w;
        fy = 0.5 * fy + 0.5 * hf;
        double s = env[i] * v * 6.0 + fric[i] * fy * 0.5;
        // First-order high-pass around 250 Hz: whisper carries little low-frequency energy.
        const double y = 0.905 * (hp_y + s - hp_x);
        hp_x = s;
        hp_y = y;
        out[i] = y;
    }
    const auto a = static_cast<std::size_t>(lead_s * kRate);
    const auto b = static_cast<std::size_t>(std::max(lead_s, seconds - trail_s) * kRate);
    detail::normalise_rms(out, voice.level, a, b);
    return out;
}

inline const std::vector<std::string>& trigger_types() {
    static const std::vector<std::string> t{"crinkle", "stationary", "tapping"};
    return t;
}

/// Trigger noise of one type, RMS normalised to `level`.
inline std::vector<double> trigger_samples(const std::string& type, double seconds, std::uint64_t seed, double level = 0.05) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> nd(0.0, 1.0);
    const auto n = static_cast<std::size_t>(seconds * kRate);
    std::vector<double> x(n, 0.0);
    if (type == "stationary") {
        x = detail::pink(n, rng);
        double brown = 0, drift = 0;
        for (std::size_t i = 0; i < n; ++i) {
            brown = 0.995 * brown + 0.05 * nd(rng);
            if (i % 1600 == 0) drift = 0.85 + 0.3 * u(rng);
            x[i] = drift * (x[i] + brown) + 0.2 * std::sin(2 * M_PI * 100.0 * i / kRate);
        }
    } else if (type == "tapping") {
        double t = 0;
        bool burst = false;
        while (t < seconds) {
            if (u(rng) < 0.08) burst = !burst;
            const double gap = burst ? 0.07 + 0.03 * u(rng) : -std::log(1 - u(rng)) / 3.0 + 0.02;
            t += gap;
            const auto at = static_cast<std::size_t>(t * kRate);
            const double f = 600 + 2900 * u(rng), tau = 0.005 + 0.025 * u(rng), amp = 0.3 + 0.7 * u(rng);
            const auto len = static_cast<std::size_t>(5 * tau * kRate);
            for (std::size_t k = 0; k < len && at + k < n; ++k) {
                const double tt = static_cast<double>(k) / kRate;
                x[at + k] += amp * std::exp(-tt / tau) * std::sin(2 * M_PI * f * tt) + (k < 8 ? amp * nd(rng) : 0.0);
            }
        }
        auto fl = floor_noise(n, rng, 0.01);
        for (std::size_t i = 0; i < n; ++i) x[i] += fl[i];
    } else if (type == "crinkle") {
        double rate = 100, x1 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i % 800 == 0) rate = std::max(0.0, rate + 120 * nd(rng)), rate = std::min(rate, 500.0);
            if (u(rng) < rate / kRate) {
                const auto len = static_cast<std::size_t>(16 + rng() % 48);
                const double amp = std::exp(0.6 * nd(rng));
                for (std::size_t k = 0; k < len && i + k < n; ++k) x[i + k] += amp * nd(rng) * (1.0 - static_cast<double>(k) / len);
            }
        }
        for (auto& v : x) {  // emphasise the high band
            const double d = v - x1;
            x1 = v;
            v = d;
        }
        auto fl = floor_noise(n, rng, 0.02);
        for (std::size_t i = 0; i < n; ++i) x[i] += fl[i];
    } else {
        throw UsageError("unknown trigger type '" + type + "'");
    }
    detail::normalise_rms(x, level);
    return x;
}

struct CorpusSpec {
    std::filesystem::path out_dir;
    std::size_t utterances_per_speaker = 4;
    double min_utterance_s = 2.0, max_utterance_s = 4.0;
    double noise_s = 60.0;
    std::uint64_t seed = 1;
};

/// Speaker table shaped like CHAINS: 20 male and 16 female speakers.
inline std::vector<Speaker> speaker_table() {
    std::vector<Speaker> t;
    for (int i = 1; i <= 20; ++i) t.push_back({"m" + std::string(i < 10 ? "0" : "") + std::to_string(i), 'M'});
    for (int i = 1; i <= 16; ++i) t.push_back({"f" + std::string(i < 10 ? "0" : "") + std::to_string(i), 'F'});
    return t;
}

/// Writes `<out>/clean` (whisper utterances + index.csv) and `<out>/noise`
/// (one recording per trigger type + index.csv), the layout
/// build_noisy_corpus reads. Returns total seconds of audio written.
inline double write_wad_corpus(const CorpusSpec& spec, std::size_t workers = 1) {
    const auto clean = spec.out_dir / "clean", noise = spec.out_dir / "noise";
    std::filesystem::create_directories(clean);
    std::filesystem::create_directories(noise);
    const auto speakers = speaker_table();
    struct Item {
        std::string name;
        const Speaker* speaker;
        std::size_t k;
    };
    std::vector<Item> items;
    for (const auto& s : speakers)
        for (std::size_t k = 0; k < spec.utterances_per_speaker; ++k)
            items.push_back({s.id + "_" + std::to_string(k) + ".wav", &s, k});
    std::vector<double> secs(items.size());
    parallel_for(items.size(), workers, [&](std::size_t i) {
        const auto& it = items[i];
        const auto seed = derive_seed(spec.seed, "utt/" + it.name);
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double dur = spec.min_utterance_s + (spec.max_utterance_s - spec.min_utterance_s) * u(rng);
        auto x = whisper_samples(dur, voice_for(it.speaker->id, it.speaker->sex, spec.seed), seed, 0.05 + 0.1 * u(rng),
                                 0.05 + 0.1 * u(rng));
        auto fl = floor_noise(x.size(), rng);
        for (std::size_t j = 0; j < x.size(); ++j) x[j] += fl[j];
        write_wav(detail::to_buffer(x), clean / it.name);
        secs[i] = dur;
    });
    std::string idx = "path,speaker,sex\n";
    for (const auto& it : items) idx += it.name + "," + it.speaker->id + "," + it.speaker->sex + "\n";
    wadkit::detail::spit(clean / "index.csv", idx);

    std::string nidx = "path,noise_type\n";
    double total = 0;
    for (const auto& type : trigger_types()) {
        write_wav(detail::to_buffer(trigger_samples(type, spec.noise_s, derive_seed(spec.seed, "noise/" + type))),
                  noise / (type + ".wav"));
        nidx += type + ".wav," + type + "\n";
        total += spec.noise_s;
    }
    wadkit::detail::spit(noise / "index.csv", nidx);
    for (double s : secs) total += s;
    return total;
}

struct RecordingSpec {
    double seconds = 120.0;
    std::uint64_t seed = 1;
    char sex = 'F';
    double noisy_fraction = 0.35;      // of whisper phrases overlaid with a trigger
    double trigger_only_fraction = 0.3;  // of events that are triggers alone
    std::vector<double> overlay_snrs{10.0, 5.0, 0.0};
};

struct SyntheticRecording {
    AudioBuffer audio;
    LabelTrack truth;  // clean_whisper, noisy_whisper, noise
};

/// ASMR-like long recording: one voice alternating clean whisper phrases,
/// whisper phrases under triggers, trigger-only stretches and quiet gaps.
inline SyntheticRecording asmr_recording(const RecordingSpec& spec) {
    std::mt19937_64 rng(derive_seed(spec.seed, "asmr"));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto n = static_cast<std::size_t>(spec.seconds * kRate);
    std::vector<double> x = floor_noise(n, rng);
    const Voice voice = voice_for("asmr" + std::to_string(spec.seed), spec.sex, spec.seed);
    SyntheticRecording r;
    auto add = [&](double a, double b, const std::string& label) {
        auto& iv = r.truth.intervals;
        if (!iv.empty() && iv.back().label == label && std::abs(iv.back().end_s - a) < 1e-12) iv.back().end_s = b;
        else iv.push_back({a, b, label});
    };
    double t = 0;
    int event = 0;
    while (t < spec.seconds) {
        const double gap = std::min(spec.seconds - t, 0.3 + 0.9 * u(rng));
        add(t, t + gap, "noise");
        t += gap;
        if (t >= spec.seconds - 1.0) break;
        const double dur = std::min(spec.seconds - t, 2.0 + 3.0 * u(rng));
        const auto a = static_cast<std::size_t>(t * kRate);
        const auto len = static_cast<std::size_t>(dur * kRate);
        const auto& type = trigger_types()[rng() % trigger_types().size()];
        const auto seed = derive_seed(spec.seed, "event/" + std::to_string(event++));
        const double roll = u(rng);
        if (roll < spec.trigger_only_fraction) {
            const auto trig = trigger_samples(type, dur, seed, voice.level * (0.6 + 0.8 * u(rng)));
            for (std::size_t i = 0; i < len && a + i < n; ++i) x[a + i] += trig[i];
            add(t, t + dur, "noise");
        } else {
            const auto w = whisper_samples(dur, voice, seed);
            const bool noisy = u(rng) < spec.noisy_fraction / (1.0 - spec.trigger_only_fraction);
            for (std::size_t i = 0; i < len && a + i < n; ++i) x[a + i] += w[i];
            if (noisy) {
                const double snr = spec.overlay_snrs[rng() % spec.overlay_snrs.size()];
                const auto trig = trigger_samples(type, dur, seed + 1, voice.level * std::pow(10.0, -snr / 20.0));
                for (std::size_t i = 0; i < len && a + i < n; ++i) x[a + i] += trig[i];
            }
            add(t, t + dur, noisy ? "noisy_whisper" : "clean_whisper");
        }
        t += dur;
    }
    if (t < spec.seconds) add(t, spec.seconds, "noise");
    r.audio = detail::to_buffer(x);
    r.truth.intervals.back().end_s = r.audio.duration_s();
    return r;
}

}  // namespace wadkit::synth
