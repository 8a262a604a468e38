#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dysim/wave.hpp"

namespace dysim {

struct F0Track {
    std::vector<double> hz;  // per frame; 0 = unvoiced
    double frame_shift = 0.005;

    std::size_t num_frames() const { return hz.size(); }
    double at_sample(std::size_t n, int sample_rate) const {
        if (hz.empty()) return 0.0;
        const std::size_t hop = static_cast<std::size_t>(std::lround(frame_shift * sample_rate));
        std::size_t f = hop ? n / hop : 0;
        if (f >= hz.size()) f = hz.size() - 1;
        return hz[f];
    }
};

inline std::size_t frame_count(std::size_t n_samples, std::size_t hop) {
    return n_samples == 0 ? 0 : 1 + (n_samples - 1) / hop;
}

struct YinConfig {
    double frame_shift = 0.005;
    double window = 0.025;      // integration window, seconds
    double threshold = 0.15;    // on the cumulative-mean-normalized difference
    double silence_rms = 1e-5;  // frames below this are unvoiced outright
};

// YIN-style estimator: cumulative-mean-normalized difference function with
// an absolute threshold and parabolic lag interpolation.
inline F0Track estimate_f0(const Waveform& w, double f0_floor, double f0_ceil,
                           const YinConfig& cfg = {}) {
    if (w.samples.empty()) throw EmptySignal("estimate_f0 of empty signal");
    if (!(f0_floor >= 50.0 && f0_floor < f0_ceil && f0_ceil <= 500.0))
        throw InvariantViolation("f0 search range must satisfy 50 <= floor < ceil <= 500");

    const int sr = w.sample_rate;
    const std::size_t hop = static_cast<std::size_t>(std::lround(cfg.frame_shift * sr));
    const std::size_t win = static_cast<std::size_t>(std::lround(cfg.window * sr));
    const std::size_t tau_min = std::max<std::size_t>(2, static_cast<std::size_t>(sr / f0_ceil));
    const std::size_t tau_max = static_cast<std::size_t>(std::ceil(sr / f0_floor));
    const std::size_t nf = frame_count(w.samples.size(), hop);

    F0Track track;
    track.frame_shift = cfg.frame_shift;
    track.hz.assign(nf, 0.0);

    std::vector<double> seg(win + tau_max + 1);
    std::vector<double> diff(tau_max + 1), cmndf(tau_max + 1);
    const long n = static_cast<long>(w.samples.size());

    for (std::size_t f = 0; f < nf; ++f) {
        const long center = static_cast<long>(f * hop);
        const long start = center - static_cast<long>(win) / 2;
        double energy = 0.0;
        for (std::size_t j = 0; j < seg.size(); ++j) {
            const long idx = start + static_cast<long>(j);
            seg[j] = (idx >= 0 && idx < n) ? w.samples[idx] : 0.0;
            if (j < win) energy += seg[j] * seg[j];
        }
        if (std::sqrt(energy / static_cast<double>(win)) < cfg.silence_rms) continue;

        diff[0] = 0.0;
        for (std::size_t tau = 1; tau <= tau_max; ++tau) {
            double acc = 0.0;
            for (std::size_t j = 0; j < win; ++j) {
                const double d = seg[j] - seg[j + tau];
                acc += d * d;
            }
            diff[tau] = acc;
        }
        cmndf[0] = 1.0;
        double cum = 0.0;
        for (std::size_t tau = 1; tau <= tau_max; ++tau) {
            cum += diff[tau];
            cmndf[tau] = cum > 0.0 ? diff[tau] * static_cast<double>(tau) / cum : 1.0;
        }

        std::size_t best = 0;
        for (std::size_t tau = tau_min; tau <= tau_max; ++tau) {
            if (cmndf[tau] < cfg.threshold) {
                while (tau + 1 <= tau_max && cmndf[tau + 1] < cmndf[tau]) ++tau;
                best = tau;
                break;
            }
        }
        if (best == 0) {
            double lo = cmndf[tau_min];
            best = tau_min;
            for (std::size_t tau = tau_min; tau <= tau_max; ++tau)
                if (cmndf[tau] < lo) {
                    lo = cmndf[tau];
                    best = tau;
                }
            if (lo >= cfg.threshold) continue;  // unvoiced
        }

        double tau_hat = static_cast<double>(best);
        if (best > tau_min && best < tau_max) {
            const double a = cmndf[best - 1], b = cmndf[best], c = cmndf[best + 1];
            const double denom = a - 2.0 * b + c;
            if (std::abs(denom) > 1e-12) {
                double shift = 0.5 * (a - c) / denom;
                shift = std::clamp(shift, -1.0, 1.0);
                tau_hat += shift;
            }
        }
        const double f0 = std::clamp(static_cast<double>(sr) / tau_hat, f0_floor, f0_ceil);
        track.hz[f] = f0;
    }
    return track;
}

}  // namespace dysim
