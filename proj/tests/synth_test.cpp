#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "wadkit/synth.hpp"
#include "test_util.hpp"

using namespace wadkit;
using testutil::TempDir;

namespace {

double rms(const std::vector<double>& x, std::size_t a, std::size_t b) {
    double e = 0;
    for (std::size_t i = a; i < b; ++i) e += x[i] * x[i];
    return std::sqrt(e / static_cast<double>(b - a));
}

}  // namespace

TEST(Synth, SpeakerTableBalance) {
    const auto t = synth::speaker_table();
    ASSERT_EQ(t.size(), 36u);
    std::set<std::string> ids;
    int m = 0;
    for (const auto& s : t) {
        ids.insert(s.id);
        m += s.sex == 'M';
    }
    EXPECT_EQ(ids.size(), 36u);
    EXPECT_EQ(m, 20);
}

TEST(Synth, WhisperIsDeterministicAndLevelled) {
    const auto v = synth::voice_for("m01", 'M', 4);
    const auto a = synth::whisper_samples(2.0, v, 9, 0.1, 0.1);
    EXPECT_EQ(a, synth::whisper_samples(2.0, v, 9, 0.1, 0.1));
    EXPECT_NE(a, synth::whisper_samples(2.0, v, 10, 0.1, 0.1));
    ASSERT_EQ(a.size(), static_cast<std::size_t>(2.0 * synth::kRate));
    // Silent lead and trail, energy in between.
    const auto lead = static_cast<std::size_t>(0.1 * synth::kRate);
    EXPECT_LT(rms(a, 0, lead), 1e-9);
    EXPECT_LT(rms(a, a.size() - lead, a.size()), 1e-9);
    EXPECT_GT(rms(a, lead, a.size() - lead), 0.01);
    for (double x : a) EXPECT_LT(std::abs(x), 1.0);
}

TEST(Synth, TriggerTypes) {
    for (const auto& type : synth::trigger_types()) {
        const auto x = synth::trigger_samples(type, 1.5, 3);
        ASSERT_EQ(x.size(), static_cast<std::size_t>(1.5 * synth::kRate)) << type;
        EXPECT_GT(rms(x, 0, x.size()), 1e-3) << type;
    }
    EXPECT_THROW(synth::trigger_samples("whistle", 1.0, 1), UsageError);
}

TEST(Synth, CorpusLayoutReadableByCorpusBuilder) {
    TempDir tmp;
    synth::CorpusSpec spec;
    spec.out_dir = tmp.path() / "src";
    spec.utterances_per_speaker = 1;
    spec.noise_s = 5.0;
    spec.seed = 2;
    const double total = synth::write_wad_corpus(spec);
    const auto clean = read_clean_index(spec.out_dir / "clean");
    const auto noise = read_noise_index(spec.out_dir / "noise");
    ASSERT_EQ(clean.size(), 36u);
    ASSERT_EQ(noise.size(), synth::trigger_types().size());
    double seconds = 0;
    for (const auto& c : clean) {
        const auto a = load_wav(c.path);
        EXPECT_EQ(a.sample_rate_hz, synth::kRate);
        seconds += a.duration_s();
    }
    for (const auto& n : noise) seconds += load_wav(n.path).duration_s();
    EXPECT_NEAR(seconds, total, 0.5);

    // Same seed, same bytes.
    synth::CorpusSpec again = spec;
    again.out_dir = tmp.path() / "again";
    synth::write_wad_corpus(again);
    EXPECT_EQ(detail::slurp(spec.out_dir / "clean" / "f03_0.wav"), detail::slurp(again.out_dir / "clean" / "f03_0.wav"));
    EXPECT_EQ(detail::slurp(spec.out_dir / "noise" / "tapping.wav"), detail::slurp(again.out_dir / "noise" / "tapping.wav"));
}

TEST(Synth, AsmrTruthCoversRecording) {
    synth::RecordingSpec spec;
    spec.seconds = 60;
    spec.seed = 7;
    const auto r = synth::asmr_recording(spec);
    EXPECT_EQ(r.audio.sample_rate_hz, synth::kRate);
    EXPECT_NEAR(r.audio.duration_s(), 60.0, 1e-3);
    const auto& iv = r.truth.intervals;
    ASSERT_FALSE(iv.empty());
    EXPECT_DOUBLE_EQ(iv.front().start_s, 0.0);
    EXPECT_DOUBLE_EQ(iv.back().end_s, r.audio.duration_s());
    std::map<std::string, double> per;
    for (std::size_t i = 0; i < iv.size(); ++i) {
        EXPECT_GT(iv[i].end_s, iv[i].start_s);
        if (i > 0) {
            EXPECT_DOUBLE_EQ(iv[i].start_s, iv[i - 1].end_s);
            EXPECT_NE(iv[i].label, iv[i - 1].label);
        }
        per[iv[i].label] += iv[i].end_s - iv[i].start_s;
    }
    EXPECT_EQ(per.size(), 3u);
    EXPECT_GT(per["clean_whisper"], 5.0);
    EXPECT_GT(per["noisy_whisper"], 5.0);
    for (float x : r.audio.samples) EXPECT_LE(std::abs(x), 1.0f);
    EXPECT_EQ(synth::asmr_recording(spec).audio.samples, r.audio.samples);
}
