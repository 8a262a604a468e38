#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dysim/f0.hpp"
#include "dysim/wave.hpp"

namespace dysim {

struct EpochTrack {
    std::vector<std::size_t> marks;  // strictly increasing sample indices
    std::vector<bool> voiced;        // per mark
};

inline constexpr double kUnvoicedGrid = 0.010;  // seconds between unvoiced marks

namespace detail {

// Linear-phase FIR lowpass (windowed sinc, Blackman), delay-compensated.
inline std::vector<double> lowpass(const std::vector<double>& x, int sample_rate, double cutoff_hz,
                                   int half_taps = 50) {
    const int taps = 2 * half_taps + 1;
    std::vector<double> h(taps);
    const double fc = cutoff_hz / sample_rate;
    double sum = 0.0;
    for (int i = 0; i < taps; ++i) {
        const double t = i - half_taps;
        const double arg = 2.0 * kPi * fc * t;
        const double sinc = std::abs(arg) < 1e-12 ? 1.0 : std::sin(arg) / arg;
        const double u = static_cast<double>(i) / (taps - 1);
        const double win = 0.42 - 0.5 * std::cos(2.0 * kPi * u) + 0.08 * std::cos(4.0 * kPi * u);
        h[i] = 2.0 * fc * sinc * win;
        sum += h[i];
    }
    for (auto& v : h) v /= sum;

    std::vector<double> y(x.size(), 0.0);
    const long n = static_cast<long>(x.size());
    for (long i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = 0; k < taps; ++k) {
            const long j = i + k - half_taps;
            if (j >= 0 && j < n) acc += h[k] * x[j];
        }
        y[i] = acc;
    }
    return y;
}

}  // namespace detail

// Epoch marks: local minima of the 800 Hz low-passed signal nearest each
// expected period in voiced regions; a fixed 10 ms grid elsewhere. Falls
// back to the expected position when no minimum lands within 20% of it.
inline EpochTrack detect_epochs(const Waveform& w, const F0Track& f0) {
    if (w.samples.empty()) throw EmptySignal("detect_epochs of empty signal");
    const int sr = w.sample_rate;
    const std::size_t n = w.samples.size();
    const std::vector<double> lp = detail::lowpass(w.samples, sr, 800.0);

    // negative-to-positive zero crossings of the smoothed derivative
    std::vector<std::size_t> cands;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double d0 = lp[i] - lp[i - 1];
        const double d1 = lp[i + 1] - lp[i];
        if (d0 <= 0.0 && d1 > 0.0) cands.push_back(i);
    }

    const double grid = kUnvoicedGrid * sr;
    EpochTrack out;
    double t = 0.0;
    std::size_t guard = 0;
    while (t < static_cast<double>(n) && guard++ < 4 * n) {
        const std::size_t probe = std::min(static_cast<std::size_t>(std::max(0.0, t)), n - 1);
        const double hz = f0.at_sample(probe, sr);
        std::size_t mark;
        bool voiced = hz > 0.0;
        double step;
        if (voiced) {
            const double period = sr / hz;
            const double tol = 0.2 * period;
            // nearest candidate minimum within tolerance of the expected spot
            auto it = std::lower_bound(cands.begin(), cands.end(),
                                       static_cast<std::size_t>(std::max(0.0, t - tol)));
            double best_d = tol + 1.0;
            std::size_t best = 0;
            for (; it != cands.end() && static_cast<double>(*it) <= t + tol; ++it) {
                const double d = std::abs(static_cast<double>(*it) - t);
                if (d < best_d) {
                    best_d = d;
                    best = *it;
                }
            }
            mark = best_d <= tol ? best : static_cast<std::size_t>(std::llround(std::max(0.0, t)));
            step = period;
        } else {
            mark = static_cast<std::size_t>(std::llround(std::max(0.0, t)));
            step = grid;
        }
        if (mark >= n) break;
        if (!out.marks.empty() && mark <= out.marks.back()) {
            mark = out.marks.back() + 1;
            if (mark >= n) break;
        }
        out.marks.push_back(mark);
        out.voiced.push_back(voiced);
        t = static_cast<double>(mark) + step;
    }
    if (out.marks.empty()) {
        out.marks.push_back(0);
        out.voiced.push_back(false);
    }
    return out;
}

}  // namespace dysim
