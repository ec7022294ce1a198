#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "wadkit/errors.hpp"

namespace wadkit {

/// Mono signal with its sample rate. Samples are finite and lie in [-1, 1]
/// once they have been through `load_wav`.
struct AudioBuffer {
    std::vector<float> samples;
    int sample_rate_hz = 16000;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
    double duration_s() const noexcept {
        return static_cast<double>(samples.size()) / sample_rate_hz;
    }

    AudioBuffer slice(std::size_t begin, std::size_t end) const {
        end = std::min(end, samples.size());
        begin = std::min(begin, end);
        return {std::vector<float>(samples.begin() + static_cast<std::ptrdiff_t>(begin),
                                   samples.begin() + static_cast<std::ptrdiff_t>(end)),
                sample_rate_hz};
    }

    AudioBuffer slice_seconds(double t0, double t1) const {
        return slice(static_cast<std::size_t>(std::llround(std::max(0.0, t0) * sample_rate_hz)),
                     static_cast<std::size_t>(std::llround(std::max(0.0, t1) * sample_rate_hz)));
    }
};

inline double mean_square(std::span<const float> x) {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (float v : x) acc += static_cast<double>(v) * v;
    return acc / static_cast<double>(x.size());
}

class WavError : public Error {
public:
    enum class Code { missing_file, malformed_header, unsupported_encoding, unwritable };

    WavError(Code code, const std::string& what)
        : Error(code == Code::missing_file ? Category::missing_input : Category::format, what),
          code_(code) {}

    Code code() const noexcept { return code_; }

private:
    Code code_;
};

namespace detail {

inline std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}
inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace detail

/// Decodes RIFF/WAVE bytes (PCM16 or IEEE float32, any channel count) into a
/// mono buffer. Channels are averaged with equal weight.
inline AudioBuffer decode_wav(std::span<const unsigned char> bytes, const std::string& name = "<memory>") {
    using detail::read_u16;
    using detail::read_u32;
    auto malformed = [&](const std::string& why) {
        return WavError(WavError::Code::malformed_header, name + ": " + why);
    };
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw malformed("not a RIFF/WAVE file");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    const unsigned char* data = nullptr;
    std::size_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* chunk = bytes.data() + pos;
        std::uint32_t len = read_u32(chunk + 4);
        std::size_t body = pos + 8;
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (len < 16 || body + len > bytes.size()) throw malformed("truncated fmt chunk");
            format = read_u16(chunk + 8);
            channels = read_u16(chunk + 10);
            rate = read_u32(chunk + 12);
            bits = read_u16(chunk + 22);
            if (format == 0xFFFE) {
                if (len < 40) throw malformed("truncated WAVE_FORMAT_EXTENSIBLE header");
                format = read_u16(chunk + 8 + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = bytes.data() + body;
            // Streaming writers leave 0 or 0xFFFFFFFF here; take what is present.
            data_len = std::min<std::size_t>(len, bytes.size() - body);
            break;
        }
        pos = body + len + (len & 1u);
    }
    if (!have_fmt) throw malformed("missing fmt chunk");
    if (!data) throw malformed("missing data chunk");
    if (channels == 0 || rate == 0) throw malformed("zero channels or sample rate");

    const bool pcm16 = format == 1 && bits == 16;
    const bool float32 = format == 3 && bits == 32;
    if (!pcm16 && !float32)
        throw WavError(WavError::Code::unsupported_encoding,
                       name + ": unsupported encoding (format tag " + std::to_string(format) + ", " +
                           std::to_string(bits) + " bits)");

    const std::size_t bytes_per_sample = bits / 8;
    const std::size_t frame_bytes = bytes_per_sample * channels;
    const std::size_t n = data_len / frame_bytes;

    AudioBuffer out;
    out.sample_rate_hz = static_cast<int>(rate);
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            const unsigned char* p = data + i * frame_bytes + c * bytes_per_sample;
            if (pcm16) {
                acc += static_cast<std::int16_t>(read_u16(p)) / 32768.0;
            } else {
                std::uint32_t u = read_u32(p);
                float f;
                std::memcpy(&f, &u, sizeof f);
                acc += std::isfinite(f) ? std::clamp(f, -1.0f, 1.0f) : 0.0f;
            }
        }
        out.samples[i] = static_cast<float>(acc / channels);
    }
    return out;
}

inline AudioBuffer load_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw WavError(WavError::Code::missing_file, "cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_wav(bytes, path.string());
}

/// 16-bit PCM mono encoding. Out-of-range samples are clipped; the number of
/// clipped samples is added to `*clipped` when given.
inline std::string encode_wav(const AudioBuffer& buf, std::size_t* clipped = nullptr) {
    using detail::put_u16;
    using detail::put_u32;
    const auto data_bytes = static_cast<std::uint32_t>(buf.samples.size() * 2);
    std::string out;
    out.reserve(44 + data_bytes);
    out += "RIFF";
    put_u32(out, 36 + data_bytes);
    out += "WAVEfmt ";
    put_u32(out, 16);
    put_u16(out, 1);
    put_u16(out, 1);
    put_u32(out, static_cast<std::uint32_t>(buf.sample_rate_hz));
    put_u32(out, static_cast<std::uint32_t>(buf.sample_rate_hz) * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    out += "data";
    put_u32(out, data_bytes);
    std::size_t clips = 0;
    for (float s : buf.samples) {
        double v = std::isfinite(s) ? s : 0.0;
        if (v > 1.0 || v < -1.0) {
            ++clips;
            v = std::clamp(v, -1.0, 1.0);
        }
        long q = std::lround(v * 32768.0);
        q = std::clamp(q, -32768L, 32767L);
        put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
    if (clipped) *clipped += clips;
    return out;
}

/// Writes 16-bit PCM mono; returns the clip count.
inline std::size_t write_wav(const AudioBuffer& buf, const std::filesystem::path& path) {
    std::size_t clipped = 0;
    std::string bytes = encode_wav(buf, &clipped);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw WavError(WavError::Code::unwritable, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw WavError(WavError::Code::unwritable, "short write to " + path.string());
    return clipped;
}

/// Band-limited polyphase resampler: Kaiser-windowed sinc (beta 8.6), 64
/// taps per phase, cutoff at 0.95 of the lower Nyquist frequency. Each phase
/// is normalised to unit DC gain.
class Resampler {
public:
    static constexpr int kTaps = 64;
    static constexpr double kBeta = 8.6;
    static constexpr double kRolloff = 0.95;

    Resampler(int source_hz, int target_hz) : source_(source_hz), target_(target_hz) {
        if (source_hz <= 0 || target_hz <= 0) throw UsageError("sample rates must be positive");
        const long g = std::gcd(source_hz, target_hz);
        up_ = target_hz / g;
        down_ = source_hz / g;
        cutoff_ = kRolloff * std::min(1.0, static_cast<double>(up_) / down_);
        if (up_ <= 4096) {
            table_.resize(static_cast<std::size_t>(up_) * kTaps);
            for (long p = 0; p < up_; ++p) fill_phase(static_cast<double>(p) / up_, &table_[p * kTaps]);
        }
    }

    AudioBuffer operator()(const AudioBuffer& in) const {
        if (source_ == target_) return in;
        const auto n_in = static_cast<long>(in.samples.size());
        const auto n_out = static_cast<long>(std::llround(static_cast<double>(n_in) * up_ / down_));
        AudioBuffer out{std::vector<float>(static_cast<std::size_t>(n_out)), target_};
        std::vector<double> scratch(kTaps);
        for (long n = 0; n < n_out; ++n) {
            const long long num = static_cast<long long>(n) * down_;
            const long base = static_cast<long>(num / up_);
            const long phase = static_cast<long>(num % up_);
            const double* taps;
            if (table_.empty()) {
                fill_phase(static_cast<double>(phase) / up_, scratch.data());
                taps = scratch.data();
            } else {
                taps = &table_[phase * kTaps];
            }
            double acc = 0.0;
            for (int j = 0; j < kTaps; ++j) {
                const long k = base - (kTaps / 2 - 1) + j;
                if (k >= 0 && k < n_in) acc += taps[j] * in.samples[static_cast<std::size_t>(k)];
            }
            out.samples[static_cast<std::size_t>(n)] = static_cast<float>(acc);
        }
        return out;
    }

private:
    void fill_phase(double frac, double* taps) const {
        const double half = kTaps / 2.0;
        const double norm = std::cyl_bessel_i(0.0, kBeta);
        double sum = 0.0;
        for (int j = 0; j < kTaps; ++j) {
            const double tau = static_cast<double>(j - (kTaps / 2 - 1)) - frac;
            const double x = cutoff_ * tau;
            const double sinc = x == 0.0 ? 1.0 : std::sin(M_PI * x) / (M_PI * x);
            const double r = tau / half;
            const double w = std::abs(r) >= 1.0 ? 0.0 : std::cyl_bessel_i(0.0, kBeta * std::sqrt(1.0 - r * r)) / norm;
            taps[j] = sinc * w;
            sum += taps[j];
        }
        for (int j = 0; j < kTaps; ++j) taps[j] /= sum;
    }

    int source_, target_;
    long up_ = 1, down_ = 1;
    double cutoff_ = 1.0;
    std::vector<double> table_;
};

inline AudioBuffer resample(const AudioBuffer& buf, int target_rate_hz) {
    if (target_rate_hz <= 0) throw UsageError("target rate must be positive");
    if (buf.sample_rate_hz == target_rate_hz) return buf;
    return Resampler(buf.sample_rate_hz, target_rate_hz)(buf);
}

/// Non-owning framed view of a signal. Frame i covers samples
/// [i*hop, i*hop + window); a tail shorter than a window is dropped.
class FrameSequence {
public:
    FrameSequence() = default;
    FrameSequence(std::span<const float> samples, std::size_t window, std::size_t hop, int rate)
        : samples_(samples), window_(window), hop_(hop), rate_(rate) {}

    static std::size_t count_for(std::size_t len, std::size_t window, std::size_t hop) {
        if (window == 0 || hop == 0 || len < window) return 0;
        return (len - window) / hop + 1;
    }

    std::size_t size() const noexcept { return count_for(samples_.size(), window_, hop_); }
    bool empty() const noexcept { return size() == 0; }
    std::span<const float> operator[](std::size_t i) const { return samples_.subspan(i * hop_, window_); }

    std::size_t window_len_samples() const noexcept { return window_; }
    std::size_t hop_samples() const noexcept { return hop_; }
    int origin_rate_hz() const noexcept { return rate_; }
    double hop_s() const noexcept { return static_cast<double>(hop_) / rate_; }
    double window_s() const noexcept { return static_cast<double>(window_) / rate_; }

private:
    std::span<const float> samples_;
    std::size_t window_ = 0;
    std::size_t hop_ = 0;
    int rate_ = 16000;
};

struct FramingConfig {
    double window_ms = 40.0;
    double hop_ms = 20.0;

    std::size_t window_samples(int rate) const {
        return static_cast<std::size_t>(std::llround(window_ms * 1e-3 * rate));
    }
    std::size_t hop_samples(int rate) const {
        return static_cast<std::size_t>(std::llround(hop_ms * 1e-3 * rate));
    }
};

/// The returned view borrows `buf.samples`.
inline FrameSequence frame_signal(const AudioBuffer& buf, double window_ms = 40.0, double hop_ms = 20.0) {
    if (!(hop_ms > 0.0) || window_ms < hop_ms) throw UsageError("framing requires window_ms >= hop_ms > 0");
    FramingConfig cfg{window_ms, hop_ms};
    return FrameSequence(buf.samples, cfg.window_samples(buf.sample_rate_hz), cfg.hop_samples(buf.sample_rate_hz),
                         buf.sample_rate_hz);
}

}  // namespace wadkit
