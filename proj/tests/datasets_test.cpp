#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "wadkit/datasets.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace wadkit;
using namespace fixtures;

namespace {

double recomputed_snr(const AudioBuffer& speech, std::size_t active, const AudioBuffer& noise, std::size_t offset,
                      double gain) {
    return oracles::recomputed_snr(speech.samples, active, noise.samples, offset, gain);
}

}  // namespace

TEST(Mix, EqualPowerGains) {
    AudioBuffer s{{0.5f, -0.5f, 0.5f, -0.5f}, 16000};
    AudioBuffer n{{-0.5f, 0.5f, 0.5f, -0.5f}, 16000};
    EXPECT_NEAR(mix_at_snr(s, n, 0.0, 1).gain, 1.0, 1e-15);
    EXPECT_NEAR(mix_at_snr(s, n, 10.0, 1).gain, std::pow(10.0, -0.5), 1e-15);
    EXPECT_NEAR(mix_at_snr(s, n, 10.0, 1).gain, 0.31623, 1e-5);
}

TEST(Mix, RecomputedSnrMatchesTarget) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        const auto s = gaussian(4000 + rng() % 4000, 0.05 + 0.2 * (rng() % 100) / 100.0, rng());
        const auto n = gaussian(9000 + rng() % 5000, 0.01 + 0.3 * (rng() % 100) / 100.0, rng());
        const double snr = static_cast<double>(static_cast<int>(rng() % 41) - 20) / 2.0;
        const auto r = mix_at_snr(s, n, snr, rng());
        EXPECT_NEAR(recomputed_snr(s, s.size(), n, r.noise_offset, r.gain), snr, 1e-6);
        EXPECT_NEAR(snr_db_of(r.speech_power, r.noise_power), snr, 1e-9);
        EXPECT_LE(r.noise_offset + s.size(), n.size());
        for (float v : r.mixture.samples) EXPECT_LE(std::abs(v), 1.0f);
    }
}

TEST(Mix, ActivePrefixDefinesSpeechPower) {
    const auto s = gaussian(1000, 0.2, 1);
    auto [doubled, track] = append_silence(s, {});
    const auto n = gaussian(5000, 0.1, 2);
    const auto r = mix_at_snr(doubled, n, 5.0, 3, s.size());
    EXPECT_NEAR(recomputed_snr(doubled, s.size(), n, r.noise_offset, r.gain), 5.0, 1e-6);
}

TEST(Mix, PeakNormalisationIsRecorded) {
    const auto s = gaussian(2000, 0.6, 4);
    const auto n = gaussian(2000, 0.6, 5);
    const auto r = mix_at_snr(s, n, -5.0, 6);
    EXPECT_LT(r.peak_scale, 1.0);
    double peak = 0;
    for (float v : r.mixture.samples) peak = std::max(peak, static_cast<double>(std::abs(v)));
    EXPECT_NEAR(peak, 1.0, 1e-6);
    // Scaling the whole mixture leaves the ratio intact.
    EXPECT_NEAR(recomputed_snr(s, s.size(), n, r.noise_offset, r.gain), -5.0, 1e-6);
}

TEST(Mix, SameSeedSameOffset) {
    const auto s = gaussian(100, 0.1, 1), n = gaussian(10000, 0.1, 2);
    EXPECT_EQ(mix_at_snr(s, n, 0, 42).noise_offset, mix_at_snr(s, n, 0, 42).noise_offset);
    EXPECT_EQ(mix_at_snr(s, n, 0, 42).mixture.samples, mix_at_snr(s, n, 0, 42).mixture.samples);
}

TEST(Mix, Errors) {
    const auto s = gaussian(100, 0.1, 1), n = gaussian(200, 0.1, 2);
    AudioBuffer silent{std::vector<float>(100, 0.0f), 16000};
    AudioBuffer quiet_noise{std::vector<float>(200, 0.0f), 16000};
    EXPECT_THROW(mix_at_snr(silent, n, 0, 1), NumericalError);
    EXPECT_THROW(mix_at_snr(s, quiet_noise, 0, 1), NumericalError);
    EXPECT_THROW(mix_at_snr(n, s, 0, 1), UsageError);
    EXPECT_THROW(mix_at_snr(s, gaussian(200, 0.1, 2, 8000), 0, 1), UsageError);
    EXPECT_THROW(mix_at_snr(s, n, std::nan(""), 1), UsageError);
}

TEST(AppendSilence, DoublesLengthAndLabels) {
    const auto s = gaussian(16000, 0.1, 1);
    auto [out, track] = append_silence(s, LabelTrack{{{0.0, 1.0, "whisper"}}});
    ASSERT_EQ(out.size(), 32000u);
    for (std::size_t i = 16000; i < 32000; ++i) ASSERT_EQ(out.samples[i], 0.0f);
    ASSERT_EQ(track.intervals.size(), 2u);
    EXPECT_EQ(track.intervals[1], (LabelInterval{1.0, 2.0, "nonspeech"}));

    const auto frames = frame_signal(out, 40, 20);
    EXPECT_EQ(frames.size(), 99u);
    const auto y = label_frames(track, frames.size(), 0.04, 0.02, wad_positive_labels());
    const auto pos = std::count(y.begin(), y.end(), 1);
    EXPECT_EQ(pos, 50);  // frames 0..49 overlap [0, 1) by at least 20 ms
    EXPECT_LE(std::abs(static_cast<double>(pos) - 0.5 * 99.0), 1.0);

    auto [empty, t2] = append_silence(AudioBuffer{{}, 16000}, {});
    EXPECT_TRUE(empty.empty());
    EXPECT_TRUE(t2.intervals.empty());
}

TEST(LabelFrames, TieGoesPositive) {
    LabelTrack t{{{0.0, 1.0, "whisper"}}};
    const auto y = label_frames(t, 50, 0.04, 0.02, wad_positive_labels());
    EXPECT_EQ(y[49], 1);  // frame [0.98, 1.02)
    EXPECT_EQ(label_frames(LabelTrack{}, 10, 0.04, 0.02, wad_positive_labels()), std::vector<int>(10, 0));
    LabelTrack full{{{0.0, 5.0, "clean_whisper"}}};
    EXPECT_EQ(label_frames(full, 100, 0.04, 0.02, cwad_positive_labels()), std::vector<int>(100, 1));
    EXPECT_EQ(label_frames(full, 10, 0.04, 0.02, {"noise"}), std::vector<int>(10, 0));
}

TEST(LabelCsv, RoundTripAndValidation) {
    testutil::TempDir dir;
    LabelTrack t{{{0.0, 0.5, "clean_whisper"}, {0.5, 1.25, "noise"}, {2.0, 3.123456, "other"}}};
    write_label_csv(t, dir.path() / "a.csv");
    EXPECT_EQ(detail::slurp(dir.path() / "a.csv"),
              "start_s,end_s,label\n0.000000,0.500000,clean_whisper\n0.500000,1.250000,noise\n2.000000,3.123456,other\n");
    EXPECT_EQ(read_label_csv(dir.path() / "a.csv"), t);
    EXPECT_THROW(parse_label_csv("a,b,c\n"), FormatError);
    EXPECT_THROW(parse_label_csv("start_s,end_s,label\n0,1,whisper\n0.5,2,noise\n"), FormatError);
    EXPECT_THROW(parse_label_csv("start_s,end_s,label\n1,1,whisper\n"), FormatError);
    EXPECT_THROW(parse_label_csv("start_s,end_s,label\n0,1,speech\n"), FormatError);
}

TEST(Splits, ChainsShapedTable) {
    const auto a = split_speakers(chains_table(), 3);
    std::size_t train = 0, test = 0, train_m = 0, test_f = 0;
    for (const auto& [id, s] : a) {
        train += s == Split::train;
        test += s == Split::test;
        train_m += s == Split::train && id[0] == 'm';
        test_f += s == Split::test && id[0] == 'f';
    }
    EXPECT_EQ(train, 27u);
    EXPECT_EQ(test, 9u);
    EXPECT_EQ(train_m, 15u);
    EXPECT_EQ(test_f, 4u);
    EXPECT_EQ(a, split_speakers(chains_table(), 3));
    EXPECT_NE(a, split_speakers(chains_table(), 4));
}

TEST(Splits, InsufficientSpeakers) {
    auto t = chains_table();
    t.resize(30);  // 20 male, 10 female
    EXPECT_THROW(split_speakers(t, 1), UsageError);
}

TEST(Splits, ValidationFractionPerSpeaker) {
    const auto spk = split_speakers(chains_table(), 1);
    std::map<std::string, std::string> utts;
    for (const auto& s : chains_table())
        for (int u = 0; u < 37; ++u) utts[s.id + "_" + std::to_string(u)] = s.id;
    const auto val = assign_validation(utts, spk, 0.2, 1);
    std::map<std::string, int> per;
    for (const auto& u : val) per[utts.at(u)]++;
    EXPECT_EQ(per.size(), 27u);
    for (const auto& [s, n] : per) {
        EXPECT_EQ(spk.at(s), Split::train);
        EXPECT_TRUE(n == 7 || n == 8);
    }
    EXPECT_EQ(val, assign_validation(utts, spk, 0.2, 1));
}

TEST(Corpus, BuildsFullGridWithExactSnr) {
    testutil::TempDir dir;
    make_inputs(dir.path());
    CorpusConfig cfg;
    cfg.clean_dir = dir.path() / "clean";
    cfg.noise_dir = dir.path() / "noise";
    cfg.out_dir = dir.path() / "out1";
    cfg.seed = 5;
    cfg.workers = 2;
    const auto m = build_noisy_corpus(cfg);
    ASSERT_EQ(m.entries.size(), 750u);
    EXPECT_TRUE(std::is_sorted(m.entries.begin(), m.entries.end(),
                               [](const auto& a, const auto& b) { return a.id < b.id; }));

    std::map<std::pair<std::string, double>, int> combos;
    std::set<std::string> train_spk, test_spk;
    for (const auto& e : m.entries) {
        combos[{e.noise_type, *e.snr_db}]++;
        (e.split == Split::test ? test_spk : train_spk).insert(e.speaker);
        ASSERT_TRUE(fs::exists(m.resolve(e.mixture_path)));
        ASSERT_TRUE(fs::exists(m.resolve(e.label_path)));
    }
    EXPECT_EQ(combos.size(), 15u);
    for (const auto& [k, n] : combos) EXPECT_EQ(n, 50);
    for (const auto& s : test_spk) EXPECT_FALSE(train_spk.contains(s));

    // Recompute every SNR from the source files.
    std::map<std::string, AudioBuffer> noise_cache;
    for (const auto& e : m.entries) {
        const auto speech = resample(load_wav(m.resolve(e.extra["clean_path"].get<std::string>())), 16000);
        const auto np = e.extra["noise_path"].get<std::string>();
        if (!noise_cache.contains(np)) noise_cache[np] = load_wav(m.resolve(np));
        AudioBuffer noise = noise_cache[np];
        auto [doubled, track] = append_silence(speech, {});
        if (e.extra["noise_tiled"].get<bool>()) noise = tile_to(noise, doubled.size());
        const double snr = recomputed_snr(doubled, speech.size(), noise, e.extra["noise_offset"].get<std::size_t>(),
                                          e.extra["gain"].get<double>());
        EXPECT_NEAR(snr, *e.snr_db, 1e-6) << e.id;
    }

    const auto back = read_manifest(cfg.out_dir / "manifest.jsonl");
    EXPECT_EQ(encode_manifest(back), encode_manifest(m));

    cfg.out_dir = dir.path() / "out2";
    cfg.workers = 1;
    build_noisy_corpus(cfg);
    EXPECT_EQ(detail::slurp(dir.path() / "out1" / "manifest.jsonl"), detail::slurp(dir.path() / "out2" / "manifest.jsonl"));
    for (const auto& e : m.entries) {
        ASSERT_EQ(detail::slurp(dir.path() / "out1" / e.label_path), detail::slurp(dir.path() / "out2" / e.label_path));
        ASSERT_EQ(detail::slurp(dir.path() / "out1" / e.mixture_path),
                  detail::slurp(dir.path() / "out2" / e.mixture_path));
    }
}

TEST(Corpus, EmptyAndOversizedRequests) {
    testutil::TempDir dir;
    make_inputs(dir.path());
    CorpusConfig cfg;
    cfg.clean_dir = dir.path() / "clean";
    cfg.noise_dir = dir.path() / "noise";
    cfg.out_dir = dir.path() / "out";
    cfg.per_combo = 0;
    EXPECT_TRUE(build_noisy_corpus(cfg).entries.empty());
    EXPECT_FALSE(fs::exists(cfg.out_dir));
    cfg.per_combo = 73;
    EXPECT_THROW(build_noisy_corpus(cfg), UsageError);
    cfg.pool = "test";
    cfg.per_combo = 19;  // 9 test speakers x 2 utterances
    EXPECT_THROW(build_noisy_corpus(cfg), UsageError);
    cfg.per_combo = 18;
    for (const auto& e : build_noisy_corpus(cfg).entries) EXPECT_EQ(e.split, Split::test);
    cfg.clean_dir = dir.path() / "nowhere";
    EXPECT_THROW(build_noisy_corpus(cfg), MissingInputError);
}

TEST(Corpus, LabeledFramesAreHalfPositive) {
    testutil::TempDir dir;
    make_inputs(dir.path());
    CorpusConfig cfg;
    cfg.clean_dir = dir.path() / "clean";
    cfg.noise_dir = dir.path() / "noise";
    cfg.out_dir = dir.path() / "out";
    cfg.per_combo = 2;
    cfg.snrs = {5.0};
    const auto m = build_noisy_corpus(cfg);
    std::vector<const ManifestEntry*> all;
    for (const auto& e : m.entries) all.push_back(&e);
    const auto data = load_labeled(m, all, wad_positive_labels());
    ASSERT_EQ(data.size(), 10u);
    for (const auto& u : data) {
        EXPECT_EQ(u.features.cols, 57u);
        const double pos = static_cast<double>(std::count(u.labels.begin(), u.labels.end(), 1));
        EXPECT_LE(std::abs(pos - 0.5 * static_cast<double>(u.labels.size())), 1.0);
    }
}
