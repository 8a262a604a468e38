#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dysim/epoch.hpp"
#include "dysim/wave.hpp"

namespace dysim {

// TD-PSOLA time-scale modification. Grains are two-period raised-cosine
// windows centered on epochs; the output epoch grid inverts the cumulative
// time warp and each output epoch copies the nearest source grain, so local
// period (pitch) is preserved while duration scales by `factor`.
inline Waveform psola_stretch(const Waveform& w, const EpochTrack& epochs, double factor) {
    if (!(factor >= 0.25 && factor <= 4.0))
        throw FactorOutOfRange("stretch factor must be in [0.25, 4.0]");
    if (w.samples.empty()) throw EmptySignal("psola_stretch of empty signal");

    const std::size_t n = w.samples.size();
    const std::size_t m = epochs.marks.size();
    const double grid = kUnvoicedGrid * w.sample_rate;

    // local periods per mark, clamped to sane pitch range
    auto clamp_period = [](double p) { return std::clamp(p, 8.0, 640.0); };
    std::vector<double> left(m), right(m);
    for (std::size_t i = 0; i < m; ++i) {
        double l = i > 0 ? static_cast<double>(epochs.marks[i] - epochs.marks[i - 1]) : grid;
        double r = i + 1 < m ? static_cast<double>(epochs.marks[i + 1] - epochs.marks[i]) : grid;
        if (i == 0 && m > 1) l = r;
        if (i + 1 == m && m > 1) r = l;
        left[i] = clamp_period(l);
        right[i] = clamp_period(r);
    }

    const std::size_t out_len = static_cast<std::size_t>(std::max<long long>(
        1, std::llround(factor * static_cast<double>(n))));
    std::vector<double> num(out_len, 0.0), den(out_len, 0.0);

    double t = factor * static_cast<double>(epochs.marks.front());
    bool prev_voiced = false;
    std::size_t guard = 0;
    const std::size_t max_grains = 4 * out_len / 8 + 64;
    while (t < static_cast<double>(out_len) + 640.0 && guard++ < max_grains) {
        const double u = t / factor;
        // nearest source mark to the warped position
        auto it = std::lower_bound(epochs.marks.begin(), epochs.marks.end(),
                                   static_cast<std::size_t>(std::max(0.0, u)));
        std::size_t k = static_cast<std::size_t>(it - epochs.marks.begin());
        if (k == m) {
            k = m - 1;
        } else if (k > 0) {
            const double d0 = std::abs(static_cast<double>(epochs.marks[k - 1]) - u);
            const double d1 = std::abs(static_cast<double>(epochs.marks[k]) - u);
            if (d0 <= d1) k = k - 1;
        }

        // phase-lock onto the epoch grid at voiced onsets; grains then stay
        // centered on warped mark positions instead of drifting
        if (epochs.voiced[k] && !prev_voiced) t = factor * static_cast<double>(epochs.marks[k]);
        prev_voiced = epochs.voiced[k];

        const long pl = static_cast<long>(std::lround(left[k]));
        const long pr = static_cast<long>(std::lround(right[k]));
        const long mark = static_cast<long>(epochs.marks[k]);
        const long center = std::llround(t);
        for (long j = -pl; j <= pr; ++j) {
            const long src = mark + j;
            const long dst = center + j;
            if (src < 0 || src >= static_cast<long>(n)) continue;
            if (dst < 0 || dst >= static_cast<long>(out_len)) continue;
            const double phase = j < 0 ? static_cast<double>(j) / pl : static_cast<double>(j) / pr;
            const double win = 0.5 * (1.0 + std::cos(kPi * phase));
            num[dst] += win * w.samples[src];
            den[dst] += win;
        }
        t += epochs.voiced[k] ? right[k] : grid;
    }

    Waveform out;
    out.sample_rate = w.sample_rate;
    out.samples.resize(out_len);
    for (std::size_t i = 0; i < out_len; ++i)
        out.samples[i] = num[i] / std::max(den[i], 0.3);
    return out;
}

// Stretch `source` to a target duration in seconds.
inline Waveform match_duration(const Waveform& source, double target_len, const EpochTrack& epochs) {
    if (target_len <= 0.0) throw FactorOutOfRange("target length must be positive");
    if (source.samples.empty()) throw EmptySignal("match_duration of empty signal");
    const double factor = target_len / source.duration();
    return psola_stretch(source, epochs, factor);
}

}  // namespace dysim
