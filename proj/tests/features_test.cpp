#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "wadkit/features.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace wadkit;
using oracles::autocorr;

namespace {

AudioBuffer noise(std::size_t n, double amp, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, amp);
    AudioBuffer b{std::vector<float>(n), 16000};
    for (auto& s : b.samples) s = static_cast<float>(std::clamp(g(rng), -1.0, 1.0));
    return b;
}


}  // namespace

TEST(CriticalBand, TwentyOneBandsAt16k) {
    BarkFilterbank bank(1024, 16000);
    EXPECT_EQ(bank.n_bands(), 21u);
    EXPECT_DOUBLE_EQ(bank.centers_bark().back(), hz_to_bark(8000.0));
}

TEST(CriticalBand, ZeroFrameGivesZeroEnergy) {
    AudioBuffer z{std::vector<float>(640), 16000};
    auto cb = critical_band_spectrum(frame_signal(z));
    for (double e : cb.band_energies) EXPECT_EQ(e, 0.0);
}

TEST(CriticalBand, WhiteNoiseTracksBandwidth) {
    // Flat expected power spectrum: band energy is proportional to the sum of
    // the band's masking weights.
    auto x = noise(640 * 1000, 0.1, 3);
    FrameSequence frames(x.samples, 640, 640, 16000);
    auto cb = critical_band_spectrum(frames);
    BarkFilterbank bank(1024, 16000);
    std::vector<double> ratio(cb.n_bands);
    for (std::size_t b = 0; b < cb.n_bands; ++b) {
        double avg = 0.0;
        for (std::size_t t = 0; t < cb.n_frames; ++t) avg += cb.frame(t)[b];
        avg /= static_cast<double>(cb.n_frames);
        double width = 0.0;
        for (double w : bank.weights(b)) width += w;
        ratio[b] = avg / width;
    }
    double mean = 0.0;
    for (double r : ratio) mean += r;
    mean /= static_cast<double>(ratio.size());
    for (double r : ratio) EXPECT_NEAR(r / mean, 1.0, 0.10);
}

TEST(CriticalBand, SineLandsInNearestBarkBand) {
    AudioBuffer s{std::vector<float>(640), 16000};
    for (std::size_t i = 0; i < s.size(); ++i) s.samples[i] = static_cast<float>(0.5 * std::sin(2 * M_PI * 1000.0 * i / 16000));
    auto cb = critical_band_spectrum(frame_signal(s));
    const double target = 6.0 * std::asinh(1000.0 / 600.0);
    EXPECT_NEAR(target, 7.70, 0.01);
    BarkFilterbank bank(1024, 16000);
    std::size_t nearest = 0;
    for (std::size_t b = 0; b < bank.n_bands(); ++b)
        if (std::abs(bank.centers_bark()[b] - target) < std::abs(bank.centers_bark()[nearest] - target)) nearest = b;
    auto e = cb.frame(0);
    EXPECT_EQ(static_cast<std::size_t>(std::max_element(e.begin(), e.end()) - e.begin()), nearest);
}

TEST(Rasta, RejectsDC) {
    std::vector<double> c(200, -3.7);
    auto y = rasta_filter(c);
    EXPECT_LE(std::abs(y[199]), 1e-3);
}

TEST(Rasta, ImpulseMatchesDifferenceEquation) {
    for (std::size_t at : {0u, 10u}) {
        std::vector<double> x(60, 0.0);
        x[at] = 1.0;
        auto y = rasta_filter(x);
        // y[n] = 0.1 (2x[n] + x[n-1] - x[n-3] - 2x[n-4]) + 0.98 y[n-1] from n = 4, y[3] = 0.
        std::vector<double> ref(x.size(), 0.0);
        double prev = 0.0;
        for (std::size_t n = 4; n < x.size(); ++n) {
            prev = 0.2 * x[n] + 0.1 * x[n - 1] + 0.0 * x[n - 2] + -0.1 * x[n - 3] + -0.2 * x[n - 4] + 0.98 * prev;
            ref[n] = prev;
        }
        for (std::size_t n = 0; n < 4; ++n) ref[n] = ref[4];
        for (std::size_t n = 0; n < x.size(); ++n) EXPECT_EQ(y[n], ref[n]) << "n=" << n;
    }
    // After warm-up the response is the textbook impulse response of H(z).
    std::vector<double> x(40, 0.0);
    x[10] = 1.0;
    auto y = rasta_filter(x);
    EXPECT_DOUBLE_EQ(y[10], 0.2);
    EXPECT_DOUBLE_EQ(y[11], 0.1 + 0.98 * 0.2);
    EXPECT_DOUBLE_EQ(y[12], 0.98 * y[11]);
    EXPECT_DOUBLE_EQ(y[13], -0.1 + 0.98 * y[12]);
    EXPECT_DOUBLE_EQ(y[14], -0.2 + 0.98 * y[13]);
}

TEST(Rasta, LengthOneIsIdentity) {
    std::vector<double> x{2.5};
    EXPECT_EQ(rasta_filter(x), x);
}

TEST(Levinson, IdentityAutocorrelation) {
    std::vector<double> r{1.0, 0.0, 0.0};
    auto res = levinson_durbin(r);
    EXPECT_EQ(res.coeffs, (std::vector<double>{0.0, 0.0}));
    EXPECT_EQ(res.error, 1.0);
}

TEST(Levinson, RecoversAr2) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    std::vector<double> x(100000, 0.0);
    for (std::size_t n = 2; n < x.size(); ++n) x[n] = 0.75 * x[n - 1] - 0.5 * x[n - 2] + g(rng);
    auto res = levinson_durbin(autocorr(x, 2));
    EXPECT_NEAR(res.coeffs[0], 0.75, 0.02);
    EXPECT_NEAR(res.coeffs[1], -0.5, 0.02);
    EXPECT_GT(res.error, 0.0);
}

TEST(Levinson, WhiteNoiseGivesSmallCoefficients) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g;
    std::vector<double> x(100000);
    for (auto& v : x) v = g(rng);
    auto res = levinson_durbin(autocorr(x, 19));
    for (double a : res.coeffs) EXPECT_LE(std::abs(a), 0.05);
}

TEST(Levinson, MatchesToeplitzSolve) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t p = 1 + rng() % 24;
        std::vector<double> x(20 * (p + 1));
        for (auto& v : x) v = g(rng);
        auto r = autocorr(x, p);
        Eigen::MatrixXd R(p, p);
        Eigen::VectorXd rhs(p);
        for (std::size_t i = 0; i < p; ++i) {
            rhs(i) = r[i + 1];
            for (std::size_t j = 0; j < p; ++j) R(i, j) = r[i > j ? i - j : j - i];
        }
        Eigen::VectorXd direct = R.partialPivLu().solve(rhs);
        auto res = levinson_durbin(r);
        Eigen::Map<const Eigen::VectorXd> ld(res.coeffs.data(), static_cast<Eigen::Index>(p));
        EXPECT_LE((ld - direct).norm() / direct.norm(), 1e-8);
    }
}

TEST(Levinson, ReportsErrors) {
    std::vector<double> bad0{0.0, 0.1};
    EXPECT_THROW(levinson_durbin(bad0), NumericalError);
    std::vector<double> singular{1.0, 1.0};
    EXPECT_THROW(levinson_durbin(singular), NumericalError);
}

TEST(Delta, ConstantRowsGiveZeros) {
    FeatureMatrix m(10, 3);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 3; ++j) m(i, j) = 1.5 + j;
    auto d = delta_append(m);
    ASSERT_EQ(d.cols, 9u);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 3; j < 9; ++j) EXPECT_EQ(d(i, j), 0.0);
}

TEST(Delta, RampHasUnitSlope) {
    FeatureMatrix m(12, 1);
    for (std::size_t t = 0; t < 12; ++t) m(t, 0) = static_cast<double>(t);
    auto d = delta_append(m);
    for (std::size_t t = 2; t + 2 < 12; ++t) EXPECT_DOUBLE_EQ(d(t, 1), 1.0);
    for (std::size_t t = 4; t + 4 < 12; ++t) EXPECT_DOUBLE_EQ(d(t, 2), 0.0);
}

TEST(Delta, SingleFrame) {
    FeatureMatrix m(1, 2);
    m(0, 0) = 3;
    m(0, 1) = -1;
    auto d = delta_append(m);
    for (std::size_t j = 2; j < 6; ++j) EXPECT_EQ(d(0, j), 0.0);
}

TEST(RastaPlp, ShapeContract) {
    auto f = rasta_plp_features(noise(16000, 0.1, 1));
    EXPECT_EQ(f.rows, 49u);
    EXPECT_EQ(f.cols, 57u);
    EXPECT_EQ(f.kind, FeatureKind::rasta_plp_57);
    EXPECT_DOUBLE_EQ(f.frame_hop_s, 0.02);
}

TEST(RastaPlp, SilenceIsAllZero) {
    auto f = rasta_plp_features(AudioBuffer{std::vector<float>(16000), 16000});
    for (double v : f.data) EXPECT_EQ(v, 0.0);
}

TEST(RastaPlp, RepeatedFrameHasVanishingDeltas) {
    // Period equal to the hop makes every analysis frame identical.
    auto period = noise(320, 0.2, 9);
    AudioBuffer x{std::vector<float>(16000), 16000};
    for (std::size_t i = 0; i < x.size(); ++i) x.samples[i] = period.samples[i % 320];
    auto f = rasta_plp_features(x);
    for (std::size_t t = 8; t + 8 < f.rows; ++t)
        for (std::size_t j = 19; j < 57; ++j) EXPECT_LE(std::abs(f(t, j)), 1e-6);
}

TEST(RastaPlp, RejectsShortInput) {
    EXPECT_THROW(rasta_plp_features(AudioBuffer{std::vector<float>(639), 16000}), UsageError);
}

TEST(RastaPlp, FiniteOnExtremeInputs) {
    AudioBuffer square{std::vector<float>(16000), 16000};
    for (std::size_t i = 0; i < square.size(); ++i) square.samples[i] = (i / 40) % 2 ? 1.0f : -1.0f;
    AudioBuffer gated = noise(16000, 0.3, 12);
    for (std::size_t i = 4000; i < 9000; ++i) gated.samples[i] = 0.0f;
    for (const auto& b : {square, gated, noise(16000, 1.0, 13), noise(16000, 1e-5, 14)}) {
        auto f = rasta_plp_features(b);
        for (double v : f.data) ASSERT_TRUE(std::isfinite(v));
    }
}

TEST(Mfcc, ShapeAndSilence) {
    auto f = mfcc_features(noise(16000, 0.1, 2));
    EXPECT_EQ(f.rows, 49u);
    EXPECT_EQ(f.cols, 20u);
    auto z = mfcc_features(AudioBuffer{std::vector<float>(16000), 16000});
    auto e = snippet_embed(z);
    for (std::size_t j = 20; j < 40; ++j) EXPECT_NEAR(e[j], 0.0, 1e-12);
}

TEST(Mfcc, GainOnlyMovesC0) {
    auto x = noise(16000, 0.2, 4);
    AudioBuffer y = x;
    for (auto& s : y.samples) s *= 2.0f;
    auto fx = mfcc_features(x), fy = mfcc_features(y);
    for (std::size_t i = 0; i < fx.data.size(); ++i) EXPECT_NEAR(fx.data[i], fy.data[i], 1e-6);
}

TEST(SnippetEmbed, ClosedForms) {
    FeatureMatrix one(1, 2);
    one(0, 0) = 4;
    one(0, 1) = -2;
    EXPECT_EQ(snippet_embed(one), (std::vector<double>{4, -2, 0, 0}));
    FeatureMatrix two(2, 1);
    two(0, 0) = 0;
    two(1, 0) = 2;
    EXPECT_EQ(snippet_embed(two), (std::vector<double>{1, 1}));
    FeatureMatrix same(2, 1);
    same(0, 0) = same(1, 0) = 3;
    EXPECT_EQ(snippet_embed(same)[1], 0.0);
}

TEST(FeatureFile, RoundTrip) {
    testutil::TempDir dir;
    auto f = rasta_plp_features(noise(8000, 0.1, 21));
    write_features(f, dir.path() / "x.feat");
    auto g = read_features(dir.path() / "x.feat");
    EXPECT_EQ(g.rows, f.rows);
    EXPECT_EQ(g.cols, 57u);
    EXPECT_EQ(g.kind, FeatureKind::rasta_plp_57);
    for (std::size_t i = 0; i < f.data.size(); ++i) EXPECT_EQ(g.data[i], static_cast<float>(f.data[i]));
}
