#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "dysim/wave.hpp"

namespace dysim {

// Levinson-Durbin on the autocorrelation sequence; returns a[1..order]
// with the convention A(z) = 1 + a1 z^-1 + ... + ap z^-p.
inline std::vector<double> lpc_coefficients(const std::vector<double>& frame, std::size_t order) {
    std::vector<double> r(order + 1, 0.0);
    for (std::size_t lag = 0; lag <= order; ++lag)
        for (std::size_t j = 0; j + lag < frame.size(); ++j) r[lag] += frame[j] * frame[j + lag];
    std::vector<double> a(order + 1, 0.0), tmp(order + 1, 0.0);
    double err = r[0];
    if (err <= 0.0) return a;
    for (std::size_t i = 1; i <= order; ++i) {
        double acc = r[i];
        for (std::size_t j = 1; j < i; ++j) acc += a[j] * r[i - j];
        const double k = -acc / err;
        tmp = a;
        a[i] = k;
        for (std::size_t j = 1; j < i; ++j) a[j] = tmp[j] + k * tmp[i - j];
        err *= 1.0 - k * k;
        if (err <= 0.0) break;
    }
    return a;
}

// Durand-Kerner iteration; deterministic start, fixed iteration budget.
inline std::vector<std::complex<double>> polynomial_roots(const std::vector<double>& coeffs) {
    // coeffs[0] + coeffs[1] x + ... + coeffs[n] x^n
    std::size_t deg = coeffs.size() - 1;
    while (deg > 0 && coeffs[deg] == 0.0) --deg;
    if (deg == 0) return {};
    std::vector<std::complex<double>> c(deg + 1);
    for (std::size_t i = 0; i <= deg; ++i) c[i] = {coeffs[i] / coeffs[deg], 0.0};

    std::vector<std::complex<double>> roots(deg);
    const std::complex<double> seed{0.4, 0.9};
    roots[0] = {1.0, 0.0};
    for (std::size_t i = 0; i < deg; ++i) roots[i] = std::pow(seed, static_cast<double>(i + 1));

    for (int iter = 0; iter < 200; ++iter) {
        double moved = 0.0;
        for (std::size_t i = 0; i < deg; ++i) {
            std::complex<double> num = c[deg];
            for (std::size_t j = deg; j-- > 0;) num = num * roots[i] + c[j];
            std::complex<double> den{1.0, 0.0};
            for (std::size_t j = 0; j < deg; ++j)
                if (j != i) den *= roots[i] - roots[j];
            if (std::abs(den) < 1e-30) continue;
            const std::complex<double> delta = num / den;
            roots[i] -= delta;
            moved = std::max(moved, std::abs(delta));
        }
        if (moved < 1e-12) break;
    }
    return roots;
}

struct FormantConfig {
    std::size_t order = 18;
    double frame_len = 0.025;
    double frame_shift = 0.010;
    double max_bandwidth = 400.0;  // Hz
    double min_freq = 90.0;
    double preemphasis = 0.97;
};

// F1-F3 per frame from LPC roots; frames with no usable roots carry the
// previous frame's values.
inline std::vector<std::vector<double>> formant_tracks(const Waveform& w,
                                                       const FormantConfig& cfg = {}) {
    if (w.samples.empty()) throw EmptySignal("formant_tracks of empty signal");
    const int sr = w.sample_rate;
    const std::size_t win = static_cast<std::size_t>(std::lround(cfg.frame_len * sr));
    const std::size_t hop = static_cast<std::size_t>(std::lround(cfg.frame_shift * sr));
    const std::size_t nf = w.samples.size() >= win ? 1 + (w.samples.size() - win) / hop : 1;

    std::vector<std::vector<double>> tracks(3, std::vector<double>(nf, 0.0));
    std::vector<double> frame(win);
    double prev[3] = {500.0, 1500.0, 2500.0};  // neutral defaults until first voiced frame
    for (std::size_t f = 0; f < nf; ++f) {
        const std::size_t start = f * hop;
        for (std::size_t j = 0; j < win; ++j) {
            const std::size_t idx = start + j;
            const double x = idx < w.samples.size() ? w.samples[idx] : 0.0;
            const double px = (idx >= 1 && idx - 1 < w.samples.size()) ? w.samples[idx - 1] : 0.0;
            const double window = 0.5 - 0.5 * std::cos(2.0 * kPi * j / win);
            frame[j] = (x - cfg.preemphasis * px) * window;
        }
        const std::vector<double> a = lpc_coefficients(frame, cfg.order);

        std::vector<double> poly(cfg.order + 1);
        for (std::size_t i = 0; i <= cfg.order; ++i) poly[i] = i == 0 ? 1.0 : a[i];
        // roots of A(1/x) reversed: use coefficients as polynomial in z^-1
        std::vector<double> rev(poly.rbegin(), poly.rend());
        const auto roots = polynomial_roots(rev);

        std::vector<double> freqs;
        for (const auto& root : roots) {
            if (root.imag() <= 0.0) continue;  // keep one of each conjugate pair
            const double mag = std::abs(root);
            if (mag <= 0.0 || mag >= 1.0) continue;
            const double freq = std::atan2(root.imag(), root.real()) * sr / (2.0 * kPi);
            const double bw = -std::log(mag) * sr / kPi;
            if (freq < cfg.min_freq || freq > 0.95 * sr / 2.0) continue;
            if (bw > cfg.max_bandwidth) continue;
            freqs.push_back(freq);
        }
        std::sort(freqs.begin(), freqs.end());
        for (std::size_t k = 0; k < 3; ++k) {
            tracks[k][f] = k < freqs.size() ? freqs[k] : prev[k];
            prev[k] = tracks[k][f];
        }
    }
    return tracks;
}

}  // namespace dysim
