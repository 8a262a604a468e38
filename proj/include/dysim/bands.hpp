#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "dysim/common.hpp"

namespace dysim {

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Half-open bin ranges [begin, end) per band, mel-spaced edges over
// [0, f_max]. Every band is widened if needed so it owns at least one bin.
struct BandLayout {
    std::vector<std::size_t> begin;
    std::vector<std::size_t> end;

    std::size_t count() const { return begin.size(); }
};

inline BandLayout mel_band_layout(std::size_t n_bands, std::size_t fft_size, int sample_rate,
                                  double f_max) {
    const std::size_t n_bins = fft_size / 2 + 1;
    const double bin_hz = static_cast<double>(sample_rate) / fft_size;
    const double mel_hi = hz_to_mel(f_max);

    BandLayout layout;
    layout.begin.resize(n_bands);
    layout.end.resize(n_bands);
    std::size_t prev = 0;
    for (std::size_t d = 0; d < n_bands; ++d) {
        const double edge_hz = mel_to_hz(mel_hi * static_cast<double>(d + 1) / n_bands);
        std::size_t e = static_cast<std::size_t>(std::ceil(edge_hz / bin_hz));
        if (e <= prev) e = prev + 1;  // keep at least one bin per band
        if (e > n_bins) e = n_bins;
        layout.begin[d] = prev;
        layout.end[d] = e;
        prev = e;
    }
    layout.end[n_bands - 1] = n_bins;
    return layout;
}

}  // namespace dysim
