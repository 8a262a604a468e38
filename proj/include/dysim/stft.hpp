#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "dysim/fft.hpp"
#include "dysim/wave.hpp"

namespace dysim {

enum class WindowKind { hann, hamming, blackman };

// Periodic windows; periodic form keeps overlap-add sums flat.
inline std::vector<double> make_window(WindowKind kind, std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
        switch (kind) {
            case WindowKind::hann: w[i] = 0.5 - 0.5 * std::cos(u); break;
            case WindowKind::hamming: w[i] = 0.54 - 0.46 * std::cos(u); break;
            case WindowKind::blackman: w[i] = 0.42 - 0.5 * std::cos(u) + 0.08 * std::cos(2.0 * u); break;
        }
    }
    return w;
}

struct Spectrogram {
    std::vector<std::complex<double>> bins;  // F x B, row-major
    std::size_t num_frames = 0;
    std::size_t num_bins = 0;  // fft_size/2 + 1
    std::size_t fft_size = 0;
    double frame_shift = 0.005;  // seconds
    WindowKind window = WindowKind::hann;

    std::complex<double>& at(std::size_t f, std::size_t b) { return bins[f * num_bins + b]; }
    const std::complex<double>& at(std::size_t f, std::size_t b) const { return bins[f * num_bins + b]; }
};

inline std::size_t hop_samples(double frame_shift, int sample_rate) {
    const long h = std::lround(frame_shift * sample_rate);
    if (h < 1) throw InvariantViolation("frame shift below one sample");
    return static_cast<std::size_t>(h);
}

// Frame f is centered at f*frame_shift; edges are zero-padded.
inline Spectrogram stft(const Waveform& w, std::size_t fft_size, double frame_shift,
                        WindowKind window = WindowKind::hann) {
    if (w.samples.empty()) throw EmptySignal("stft of empty signal");
    if (fft_size == 0 || (fft_size & (fft_size - 1)) != 0)
        throw InvariantViolation("fft_size must be a power of two");
    const std::size_t hop = hop_samples(frame_shift, w.sample_rate);
    const std::size_t n = w.samples.size();
    const std::size_t num_frames = 1 + (n - 1) / hop;
    const std::size_t half = fft_size / 2;
    const std::vector<double> win = make_window(window, fft_size);

    Spectrogram s;
    s.num_frames = num_frames;
    s.num_bins = fft_size / 2 + 1;
    s.fft_size = fft_size;
    s.frame_shift = frame_shift;
    s.window = window;
    s.bins.resize(num_frames * s.num_bins);

    std::vector<double> frame(fft_size);
    for (std::size_t f = 0; f < num_frames; ++f) {
        const long center = static_cast<long>(f * hop);
        for (std::size_t i = 0; i < fft_size; ++i) {
            const long idx = center - static_cast<long>(half) + static_cast<long>(i);
            const double v = (idx >= 0 && idx < static_cast<long>(n)) ? w.samples[idx] : 0.0;
            frame[i] = v * win[i];
        }
        auto spec = rfft(frame, fft_size);
        for (std::size_t b = 0; b < s.num_bins; ++b) s.at(f, b) = spec[b];
    }
    return s;
}

// Weighted overlap-add inverse; exact wherever the squared-window sum is
// nonzero, which needs >= 50% overlap for the supported windows.
inline Waveform istft(const Spectrogram& s, int sample_rate) {
    if (s.fft_size == 0 || (s.fft_size & (s.fft_size - 1)) != 0 || s.frame_shift <= 0.0 ||
        s.num_bins != s.fft_size / 2 + 1 || s.bins.size() != s.num_frames * s.num_bins)
        throw InconsistentMetadata("spectrogram metadata inconsistent");
    Waveform out;
    out.sample_rate = sample_rate;
    if (s.num_frames == 0) return out;

    const std::size_t hop = hop_samples(s.frame_shift, sample_rate);
    const std::size_t half = s.fft_size / 2;
    const std::size_t out_len = s.num_frames * hop;
    const std::vector<double> win = make_window(s.window, s.fft_size);

    std::vector<double> num(out_len, 0.0), den(out_len, 0.0);
    std::vector<std::complex<double>> half_spec(s.num_bins);
    for (std::size_t f = 0; f < s.num_frames; ++f) {
        for (std::size_t b = 0; b < s.num_bins; ++b) half_spec[b] = s.at(f, b);
        std::vector<double> frame = irfft(half_spec, s.fft_size);
        const long center = static_cast<long>(f * hop);
        for (std::size_t i = 0; i < s.fft_size; ++i) {
            const long idx = center - static_cast<long>(half) + static_cast<long>(i);
            if (idx < 0 || idx >= static_cast<long>(out_len)) continue;
            num[idx] += frame[i] * win[i];
            den[idx] += win[i] * win[i];
        }
    }
    out.samples.resize(out_len);
    for (std::size_t i = 0; i < out_len; ++i)
        out.samples[i] = den[i] > 1e-12 ? num[i] / den[i] : 0.0;
    return out;
}

}  // namespace dysim
