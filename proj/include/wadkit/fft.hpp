#pragma once

#include <fftw3.h>

#include <cmath>
#include <cstddef>
#include <mutex>
#include <span>
#include <vector>

namespace wadkit {

namespace detail {
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace detail

/// Real-input power spectrum |X_k|^2, k = 0..nfft/2, backed by an FFTW r2c
/// plan. One instance per thread; FFTW's planner itself is serialised.
class PowerSpectrum {
public:
    explicit PowerSpectrum(std::size_t nfft) : nfft_(nfft) {
        in_ = static_cast<double*>(fftw_malloc(sizeof(double) * nfft_));
        out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (nfft_ / 2 + 1)));
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(nfft_), in_, out_, FFTW_ESTIMATE);
    }
    ~PowerSpectrum() {
        {
            std::lock_guard lock(detail::fftw_planner_mutex());
            fftw_destroy_plan(plan_);
        }
        fftw_free(in_);
        fftw_free(out_);
    }
    PowerSpectrum(const PowerSpectrum&) = delete;
    PowerSpectrum& operator=(const PowerSpectrum&) = delete;

    std::size_t nfft() const noexcept { return nfft_; }
    std::size_t bins() const noexcept { return nfft_ / 2 + 1; }

    /// `frame` is multiplied by `window` (same length, <= nfft) and zero padded.
    void compute(std::span<const float> frame, std::span<const double> window, std::span<double> power) {
        std::size_t n = frame.size();
        for (std::size_t i = 0; i < n; ++i) in_[i] = frame[i] * window[i];
        for (std::size_t i = n; i < nfft_; ++i) in_[i] = 0.0;
        fftw_execute(plan_);
        for (std::size_t k = 0; k < bins(); ++k) power[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
    }

private:
    std::size_t nfft_;
    double* in_ = nullptr;
    fftw_complex* out_ = nullptr;
    fftw_plan plan_ = nullptr;
};

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

inline std::vector<double> hamming_window(std::size_t n) {
    std::vector<double> w(n);
    if (n == 1) {
        w[0] = 1.0;
        return w;
    }
    for (std::size_t i = 0; i < n; ++i) w[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (n - 1));
    return w;
}

}  // namespace wadkit
