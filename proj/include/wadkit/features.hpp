#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "wadkit/audio.hpp"
#include "wadkit/errors.hpp"
#include "wadkit/fft.hpp"

namespace wadkit {

enum class FeatureKind : std::uint8_t { rasta_plp_57 = 1, mfcc_pooled = 2, raw = 0 };

/// Row-major per-frame feature vectors plus frame timing.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;
    double frame_hop_s = 0.02;
    double frame_len_s = 0.04;
    FeatureKind kind = FeatureKind::raw;

    FeatureMatrix() = default;
    FeatureMatrix(std::size_t r, std::size_t c, FeatureKind k = FeatureKind::raw)
        : rows(r), cols(c), data(r * c, 0.0), kind(k) {}

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

inline constexpr double kLogFloor = 1e-10;

inline double hz_to_bark(double hz) { return 6.0 * std::asinh(hz / 600.0); }
inline double bark_to_hz(double bark) { return 600.0 * std::sinh(bark / 6.0); }
inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Per-frame critical-band energies, frames x n_bands, row-major.
struct CriticalBandSpectrum {
    std::size_t n_frames = 0;
    std::size_t n_bands = 0;
    std::vector<double> band_energies;
    std::vector<double> center_hz;

    std::span<const double> frame(std::size_t i) const { return {band_energies.data() + i * n_bands, n_bands}; }
};

/// Bark-spaced trapezoidal critical-band masking curves over an FFT grid.
/// Band centres run from 0 to Bark(Nyquist) inclusive with
/// n_bands = ceil(Bark(Nyquist)) + 1.
class BarkFilterbank {
public:
    BarkFilterbank(std::size_t nfft, int rate) : nfft_(nfft) {
        const double nyq_bark = hz_to_bark(rate / 2.0);
        n_bands_ = static_cast<std::size_t>(std::ceil(nyq_bark)) + 1;
        const double step = nyq_bark / static_cast<double>(n_bands_ - 1);
        const std::size_t bins = nfft / 2 + 1;
        weights_.assign(n_bands_ * bins, 0.0);
        centers_bark_.resize(n_bands_);
        centers_hz_.resize(n_bands_);
        for (std::size_t b = 0; b < n_bands_; ++b) {
            const double mid = static_cast<double>(b) * step;
            centers_bark_[b] = mid;
            centers_hz_[b] = bark_to_hz(mid);
            for (std::size_t k = 0; k < bins; ++k) {
                const double bin_bark = hz_to_bark(static_cast<double>(k) * rate / static_cast<double>(nfft));
                const double lo = bin_bark - mid - 0.5;
                const double hi = bin_bark - mid + 0.5;
                weights_[b * bins + k] = std::pow(10.0, std::min(0.0, std::min(hi, -2.5 * lo)));
            }
        }
    }

    std::size_t n_bands() const noexcept { return n_bands_; }
    std::size_t bins() const noexcept { return nfft_ / 2 + 1; }
    std::span<const double> weights(std::size_t band) const { return {weights_.data() + band * bins(), bins()}; }
    const std::vector<double>& centers_bark() const noexcept { return centers_bark_; }
    const std::vector<double>& centers_hz() const noexcept { return centers_hz_; }

    void apply(std::span<const double> power, std::span<double> bands) const {
        const std::size_t nb = bins();
        for (std::size_t b = 0; b < n_bands_; ++b) {
            const double* w = weights_.data() + b * nb;
            double acc = 0.0;
            for (std::size_t k = 0; k < nb; ++k) acc += w[k] * power[k];
            bands[b] = acc;
        }
    }

private:
    std::size_t nfft_;
    std::size_t n_bands_ = 0;
    std::vector<double> weights_;
    std::vector<double> centers_bark_;
    std::vector<double> centers_hz_;
};

/// Hamming window -> power spectrum (FFT size next power of two >= window)
/// -> Bark critical-band integration.
inline CriticalBandSpectrum critical_band_spectrum(const FrameSequence& frames) {
    if (frames.empty()) throw UsageError("critical_band_spectrum needs at least one frame");
    const std::size_t win = frames.window_len_samples();
    PowerSpectrum fft(next_pow2(win));
    BarkFilterbank bank(fft.nfft(), frames.origin_rate_hz());
    const auto window = hamming_window(win);
    std::vector<double> power(fft.bins());

    CriticalBandSpectrum out;
    out.n_frames = frames.size();
    out.n_bands = bank.n_bands();
    out.center_hz = bank.centers_hz();
    out.band_energies.resize(out.n_frames * out.n_bands);
    for (std::size_t i = 0; i < out.n_frames; ++i) {
        fft.compute(frames[i], window, power);
        bank.apply(power, std::span<double>(out.band_energies).subspan(i * out.n_bands, out.n_bands));
    }
    return out;
}

/// RASTA band-pass H(z) = 0.1 (2 + z^-1 - z^-3 - 2 z^-4) / (1 - 0.98 z^-1)
/// applied to one log-energy trajectory. The numerator is primed on the first
/// four inputs, output starts at frame 5 and frames 1-4 copy it. Trajectories
/// shorter than five frames are returned unchanged.
inline std::vector<double> rasta_filter(std::span<const double> x) {
    constexpr std::array<double, 5> b{0.2, 0.1, 0.0, -0.1, -0.2};
    constexpr double pole = 0.98;
    std::vector<double> y(x.begin(), x.end());
    if (x.size() < 5) return y;
    double prev = 0.0;
    for (std::size_t n = 4; n < x.size(); ++n) {
        double acc = 0.0;
        for (std::size_t k = 0; k < b.size(); ++k) acc += b[k] * x[n - k];
        prev = acc + pole * prev;
        y[n] = prev;
    }
    for (std::size_t n = 0; n < 4; ++n) y[n] = y[4];
    return y;
}

struct LpcResult {
    std::vector<double> coeffs;  // a_1..a_p, prediction x^[n] = sum_k a_k x[n-k]
    double error = 0.0;
};

/// Levinson-Durbin recursion on r_0..r_p. Throws NumericalError when
/// r_0 <= 0 or a reflection coefficient reaches |k| >= 1.
inline LpcResult levinson_durbin(std::span<const double> r) {
    if (r.size() < 2) throw UsageError("levinson_durbin needs order >= 1");
    if (!(r[0] > 0.0)) throw NumericalError("levinson_durbin: r0 must be positive");
    const std::size_t p = r.size() - 1;
    std::vector<double> a(p + 1, 0.0), prev(p + 1, 0.0);
    double err = r[0];
    for (std::size_t i = 1; i <= p; ++i) {
        double acc = r[i];
        for (std::size_t j = 1; j < i; ++j) acc -= a[j] * r[i - j];
        const double k = acc / err;
        if (!std::isfinite(k) || std::abs(k) >= 1.0)
            throw NumericalError("levinson_durbin: singular recursion at order " + std::to_string(i) +
                                 " (|k| = " + std::to_string(std::abs(k)) + ")");
        prev = a;
        a[i] = k;
        for (std::size_t j = 1; j < i; ++j) a[j] = prev[j] - k * prev[i - j];
        err *= (1.0 - k * k);
    }
    return {std::vector<double>(a.begin() + 1, a.end()), err};
}

/// Appends first- and second-order regression deltas over +-2 frames with
/// boundary replication: d[t] = sum_k k (x[t+k] - x[t-k]) / 10.
inline FeatureMatrix delta_append(const FeatureMatrix& in) {
    const std::size_t d = in.cols;
    const std::size_t T = in.rows;
    FeatureMatrix out(T, 3 * d, in.kind);
    out.frame_hop_s = in.frame_hop_s;
    out.frame_len_s = in.frame_len_s;

    auto regress = [T](auto&& get, std::size_t t) {
        auto at = [&](long i) { return get(static_cast<std::size_t>(std::clamp<long>(i, 0, static_cast<long>(T) - 1))); };
        const long tt = static_cast<long>(t);
        return (1.0 * (at(tt + 1) - at(tt - 1)) + 2.0 * (at(tt + 2) - at(tt - 2))) / 10.0;
    };
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < d; ++j) out(t, j) = in(t, j);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t t = 0; t < T; ++t) out(t, d + j) = regress([&](std::size_t i) { return in(i, j); }, t);
        for (std::size_t t = 0; t < T; ++t)
            out(t, 2 * d + j) = regress([&](std::size_t i) { return out(i, d + j); }, t);
    }
    return out;
}

struct PlpConfig {
    FramingConfig framing{};
    std::size_t order = 19;
    double compression = 0.33;
};

/// RASTA-PLP front end. Holds the FFT plan and filterbank so repeated calls
/// on the same thread are cheap.
class RastaPlpExtractor {
public:
    explicit RastaPlpExtractor(int rate = 16000, PlpConfig cfg = {})
        : cfg_(cfg),
          rate_(rate),
          window_(hamming_window(cfg.framing.window_samples(rate))),
          fft_(next_pow2(cfg.framing.window_samples(rate))),
          bank_(fft_.nfft(), rate) {
        const std::size_t nb = bank_.n_bands();
        if (nb - 1 < cfg_.order)
            throw UsageError("sample rate " + std::to_string(rate) + " gives too few critical bands for LPC order " +
                             std::to_string(cfg_.order));
        eql_.resize(nb);
        for (std::size_t b = 0; b < nb; ++b) {
            const double fsq = bank_.centers_hz()[b] * bank_.centers_hz()[b];
            const double ftmp = fsq + 1.6e5;
            eql_[b] = (fsq / ftmp) * (fsq / ftmp) * ((fsq + 1.44e6) / (fsq + 9.61e6));
        }
        const std::size_t N = 2 * (nb - 1);
        idft_.resize((cfg_.order + 1) * N);
        for (std::size_t k = 0; k <= cfg_.order; ++k)
            for (std::size_t n = 0; n < N; ++n)
                idft_[k * N + n] = std::cos(2.0 * M_PI * static_cast<double>(n * k % N) / static_cast<double>(N)) /
                                   static_cast<double>(N);
    }

    std::size_t n_bands() const noexcept { return bank_.n_bands(); }

    /// Static LPC coefficients, one row per frame (order columns).
    FeatureMatrix static_features(const AudioBuffer& buf) {
        if (buf.sample_rate_hz != rate_) throw UsageError("extractor built for a different sample rate");
        FrameSequence frames(buf.samples, cfg_.framing.window_samples(rate_), cfg_.framing.hop_samples(rate_), rate_);
        if (frames.empty()) throw UsageError("buffer shorter than one analysis window");
        const std::size_t T = frames.size();
        const std::size_t nb = bank_.n_bands();

        std::vector<double> power(fft_.bins());
        std::vector<double> logs(T * nb);
        std::vector<char> silent(T, 1);
        std::vector<double> bands(nb);
        for (std::size_t t = 0; t < T; ++t) {
            fft_.compute(frames[t], window_, power);
            bank_.apply(power, bands);
            for (std::size_t b = 0; b < nb; ++b) {
                if (bands[b] > kLogFloor) silent[t] = 0;
                logs[t * nb + b] = std::log(std::max(bands[b], kLogFloor));
            }
        }

        std::vector<double> traj(T);
        for (std::size_t b = 0; b < nb; ++b) {
            for (std::size_t t = 0; t < T; ++t) traj[t] = logs[t * nb + b];
            auto f = rasta_filter(traj);
            for (std::size_t t = 0; t < T; ++t) logs[t * nb + b] = f[t];
        }

        FeatureMatrix out(T, cfg_.order, FeatureKind::rasta_plp_57);
        out.frame_hop_s = frames.hop_s();
        out.frame_len_s = frames.window_s();
        const std::size_t N = 2 * (nb - 1);
        std::vector<double> spec(N), r(cfg_.order + 1);
        for (std::size_t t = 0; t < T; ++t) {
            if (silent[t]) continue;
            std::vector<double> z(nb);
            for (std::size_t b = 0; b < nb; ++b)
                z[b] = std::pow(eql_[b] * std::exp(logs[t * nb + b]), cfg_.compression);
            z.front() = z[1];
            z.back() = z[nb - 2];
            for (std::size_t n = 0; n < nb; ++n) spec[n] = z[n];
            for (std::size_t n = nb; n < N; ++n) spec[n] = z[N - n];
            for (std::size_t k = 0; k <= cfg_.order; ++k) {
                double acc = 0.0;
                const double* c = idft_.data() + k * N;
                for (std::size_t n = 0; n < N; ++n) acc += c[n] * spec[n];
                r[k] = acc;
            }
            auto lpc = levinson_durbin(r);
            std::copy(lpc.coeffs.begin(), lpc.coeffs.end(), out.row(t).begin());
        }
        return out;
    }

    FeatureMatrix operator()(const AudioBuffer& buf) {
        auto full = delta_append(static_features(buf));
        full.kind = FeatureKind::rasta_plp_57;
        return full;
    }

private:
    PlpConfig cfg_;
    int rate_;
    std::vector<double> window_;
    PowerSpectrum fft_;
    BarkFilterbank bank_;
    std::vector<double> eql_;
    std::vector<double> idft_;
};

/// 19 RASTA-PLP LPC coefficients plus deltas and delta-deltas (57 columns).
inline FeatureMatrix rasta_plp_features(const AudioBuffer& buf, const PlpConfig& cfg = {}) {
    RastaPlpExtractor ex(buf.sample_rate_hz, cfg);
    return ex(buf);
}

struct MfccConfig {
    FramingConfig framing{};
    std::size_t n_mels = 26;
    std::size_t n_ceps = 20;
};

/// Triangular HTK-mel filterbank from 0 Hz to Nyquist, log, orthonormal
/// DCT-II; emits cepstra 1..n_ceps (c0 dropped).
class MfccExtractor {
public:
    explicit MfccExtractor(int rate = 16000, MfccConfig cfg = {})
        : cfg_(cfg),
          rate_(rate),
          window_(hamming_window(cfg.framing.window_samples(rate))),
          fft_(next_pow2(cfg.framing.window_samples(rate))) {
        if (cfg_.n_ceps >= cfg_.n_mels) throw UsageError("n_ceps must be below n_mels");
        const std::size_t bins = fft_.bins();
        const double mel_hi = hz_to_mel(rate / 2.0);
        std::vector<double> edges(cfg_.n_mels + 2);
        for (std::size_t i = 0; i < edges.size(); ++i)
            edges[i] = mel_to_hz(mel_hi * static_cast<double>(i) / static_cast<double>(cfg_.n_mels + 1));
        mel_.assign(cfg_.n_mels * bins, 0.0);
        for (std::size_t m = 0; m < cfg_.n_mels; ++m) {
            for (std::size_t k = 0; k < bins; ++k) {
                const double f = static_cast<double>(k) * rate / static_cast<double>(fft_.nfft());
                double w = 0.0;
                if (f > edges[m] && f <= edges[m + 1]) w = (f - edges[m]) / (edges[m + 1] - edges[m]);
                else if (f > edges[m + 1] && f < edges[m + 2]) w = (edges[m + 2] - f) / (edges[m + 2] - edges[m + 1]);
                mel_[m * bins + k] = w;
            }
        }
        dct_.resize(cfg_.n_ceps * cfg_.n_mels);
        const double scale = std::sqrt(2.0 / static_cast<double>(cfg_.n_mels));
        for (std::size_t c = 0; c < cfg_.n_ceps; ++c)
            for (std::size_t n = 0; n < cfg_.n_mels; ++n)
                dct_[c * cfg_.n_mels + n] =
                    scale * std::cos(M_PI * static_cast<double>(c + 1) * (static_cast<double>(n) + 0.5) /
                                     static_cast<double>(cfg_.n_mels));
    }

    FeatureMatrix operator()(std::span<const float> samples) {
        FrameSequence frames(samples, cfg_.framing.window_samples(rate_), cfg_.framing.hop_samples(rate_), rate_);
        if (frames.empty()) throw UsageError("buffer shorter than one analysis window");
        const std::size_t bins = fft_.bins();
        FeatureMatrix out(frames.size(), cfg_.n_ceps, FeatureKind::raw);
        out.frame_hop_s = frames.hop_s();
        out.frame_len_s = frames.window_s();
        std::vector<double> power(bins), logmel(cfg_.n_mels);
        for (std::size_t t = 0; t < frames.size(); ++t) {
            fft_.compute(frames[t], window_, power);
            for (std::size_t m = 0; m < cfg_.n_mels; ++m) {
                double acc = 0.0;
                const double* w = mel_.data() + m * bins;
                for (std::size_t k = 0; k < bins; ++k) acc += w[k] * power[k];
                logmel[m] = std::log(std::max(acc, kLogFloor));
            }
            for (std::size_t c = 0; c < cfg_.n_ceps; ++c) {
                double acc = 0.0;
                const double* d = dct_.data() + c * cfg_.n_mels;
                for (std::size_t m = 0; m < cfg_.n_mels; ++m) acc += d[m] * logmel[m];
                out(t, c) = acc;
            }
        }
        return out;
    }

    FeatureMatrix operator()(const AudioBuffer& buf) {
        if (buf.sample_rate_hz != rate_) throw UsageError("extractor built for a different sample rate");
        return (*this)(std::span<const float>(buf.samples));
    }

private:
    MfccConfig cfg_;
    int rate_;
    std::vector<double> window_;
    PowerSpectrum fft_;
    std::vector<double> mel_;
    std::vector<double> dct_;
};

inline FeatureMatrix mfcc_features(const AudioBuffer& buf, const MfccConfig& cfg = {}) {
    MfccExtractor ex(buf.sample_rate_hz, cfg);
    return ex(buf);
}

/// Per-column mean followed by per-column population standard deviation.
inline std::vector<double> snippet_embed(const FeatureMatrix& f) {
    if (f.rows == 0) throw UsageError("snippet_embed needs at least one frame");
    std::vector<double> out(2 * f.cols, 0.0);
    for (std::size_t j = 0; j < f.cols; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < f.rows; ++i) mean += f(i, j);
        mean /= static_cast<double>(f.rows);
        double var = 0.0;
        for (std::size_t i = 0; i < f.rows; ++i) var += (f(i, j) - mean) * (f(i, j) - mean);
        out[j] = mean;
        out[f.cols + j] = std::sqrt(var / static_cast<double>(f.rows));
    }
    return out;
}

// Feature file: "FEAT" | u32 version | u8 kind | u64 rows | u32 cols |
// f64 frame_hop_s | rows*cols little-endian f32, row-major.
inline constexpr std::uint32_t kFeatureFileVersion = 1;

namespace detail {
template <typename T>
void put_le(std::string& out, T v) {
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    out.append(raw, sizeof(T));
}
template <typename T>
T get_le(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw FormatError("truncated file");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}
inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInputError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}
inline void spit(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Error::Category::other, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}
}  // namespace detail

inline void write_features(const FeatureMatrix& f, const std::filesystem::path& path) {
    std::string out = "FEAT";
    detail::put_le<std::uint32_t>(out, kFeatureFileVersion);
    detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(f.kind));
    detail::put_le<std::uint64_t>(out, f.rows);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(f.cols));
    detail::put_le<double>(out, f.frame_hop_s);
    for (double v : f.data) detail::put_le<float>(out, static_cast<float>(v));
    detail::spit(path, out);
}

inline FeatureMatrix read_features(const std::filesystem::path& path) {
    const std::string in = detail::slurp(path);
    if (in.size() < 4 || in.compare(0, 4, "FEAT") != 0) throw FormatError(path.string() + ": not a feature file");
    std::size_t pos = 4;
    if (detail::get_le<std::uint32_t>(in, pos) != kFeatureFileVersion)
        throw FormatError(path.string() + ": unsupported feature file version");
    FeatureMatrix f;
    f.kind = static_cast<FeatureKind>(detail::get_le<std::uint8_t>(in, pos));
    f.rows = detail::get_le<std::uint64_t>(in, pos);
    f.cols = detail::get_le<std::uint32_t>(in, pos);
    f.frame_hop_s = detail::get_le<double>(in, pos);
    if (in.size() - pos != f.rows * f.cols * sizeof(float)) throw FormatError(path.string() + ": truncated payload");
    f.data.resize(f.rows * f.cols);
    for (auto& v : f.data) v = detail::get_le<float>(in, pos);
    return f;
}

}  // namespace wadkit
