#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "dysim/bands.hpp"
#include "dysim/fft.hpp"
#include "dysim/lpc.hpp"
#include "dysim/stft.hpp"
#include "dysim/wave.hpp"

namespace dysim {

inline constexpr const char* kEvalSchemaVersion = "eval-v1";  // corr block: corr-v1
inline constexpr double kLtasFloorDb = -80.0;

struct EvalConfig {
    std::size_t mfcc_coeffs = 13;
    std::size_t mfcc_filters = 26;
    std::size_t ltas_bands = 64;
    std::vector<std::size_t> corr_lags = {1, 3, 5, 10};
    std::size_t ems_bands = 7;  // octaves centered 125..8000 Hz
};

// ---- MFCC -----------------------------------------------------------------

// 26 triangular mel filters over 0-8 kHz, log energies, DCT-II (orthonormal).
// Frames start at f*hop so shifting the input by one hop shifts frames by one.
inline std::vector<std::vector<double>> mfcc(const Waveform& w, std::size_t n_coeffs = 13,
                                             std::size_t n_filters = 26) {
    if (w.samples.empty()) throw EmptySignal("mfcc of empty signal");
    const int sr = w.sample_rate;
    const std::size_t win = static_cast<std::size_t>(std::lround(0.025 * sr));
    const std::size_t hop = static_cast<std::size_t>(std::lround(0.010 * sr));
    std::size_t fft_size = 1;
    while (fft_size < win) fft_size <<= 1;
    const std::size_t nb = fft_size / 2 + 1;
    const std::size_t nf = w.samples.size() >= win ? 1 + (w.samples.size() - win) / hop : 1;

    // triangular filters with mel-spaced centers
    const double mel_hi = hz_to_mel(sr / 2.0);
    std::vector<double> centers(n_filters + 2);
    for (std::size_t m = 0; m < n_filters + 2; ++m)
        centers[m] = mel_to_hz(mel_hi * static_cast<double>(m) / (n_filters + 1));

    std::vector<std::vector<double>> out(nf, std::vector<double>(n_coeffs, 0.0));
    std::vector<double> frame(fft_size, 0.0), energies(n_filters);
    const std::vector<double> window = make_window(WindowKind::hann, win);
    for (std::size_t f = 0; f < nf; ++f) {
        std::fill(frame.begin(), frame.end(), 0.0);
        for (std::size_t j = 0; j < win; ++j) {
            const std::size_t idx = f * hop + j;
            frame[j] = idx < w.samples.size() ? w.samples[idx] * window[j] : 0.0;
        }
        const auto spec = rfft(frame, fft_size);
        for (std::size_t m = 0; m < n_filters; ++m) {
            const double lo = centers[m], mid = centers[m + 1], hi = centers[m + 2];
            double acc = 0.0;
            for (std::size_t k = 0; k < nb; ++k) {
                const double hz = static_cast<double>(k) * sr / fft_size;
                double g = 0.0;
                if (hz > lo && hz < mid)
                    g = (hz - lo) / (mid - lo);
                else if (hz >= mid && hz < hi)
                    g = (hi - hz) / (hi - mid);
                acc += g * std::norm(spec[k]);
            }
            energies[m] = std::log(std::max(acc, 1e-10));
        }
        for (std::size_t i = 0; i < n_coeffs; ++i) {
            double acc = 0.0;
            for (std::size_t m = 0; m < n_filters; ++m)
                acc += energies[m] * std::cos(kPi * static_cast<double>(i) *
                                              (static_cast<double>(m) + 0.5) / n_filters);
            const double norm = i == 0 ? std::sqrt(1.0 / n_filters) : std::sqrt(2.0 / n_filters);
            out[f][i] = norm * acc;
        }
    }
    return out;
}

// ---- LTAS -----------------------------------------------------------------

// Mean band-pooled power spectrum in dB, 64 uniform bands, floored at -80 dB.
inline std::vector<double> ltas(const Waveform& w, std::size_t n_bands = 64) {
    if (w.samples.empty()) throw EmptySignal("ltas of empty signal");
    const int sr = w.sample_rate;
    const std::size_t fft_size = 1024;
    const std::size_t nb = fft_size / 2 + 1;
    const std::size_t hop = static_cast<std::size_t>(std::lround(0.010 * sr));
    const std::size_t win = static_cast<std::size_t>(std::lround(0.025 * sr));
    const std::size_t nf = w.samples.size() >= win ? 1 + (w.samples.size() - win) / hop : 1;
    const std::vector<double> window = make_window(WindowKind::hann, win);
    double wsum = 0.0;
    for (double v : window) wsum += v;
    const double norm = (wsum / 2.0) * (wsum / 2.0);

    std::vector<double> mean_power(nb, 0.0), frame(fft_size, 0.0);
    for (std::size_t f = 0; f < nf; ++f) {
        std::fill(frame.begin(), frame.end(), 0.0);
        for (std::size_t j = 0; j < win; ++j) {
            const std::size_t idx = f * hop + j;
            frame[j] = idx < w.samples.size() ? w.samples[idx] * window[j] : 0.0;
        }
        const auto spec = rfft(frame, fft_size);
        for (std::size_t k = 0; k < nb; ++k) mean_power[k] += std::norm(spec[k]) / norm;
    }
    for (auto& v : mean_power) v /= static_cast<double>(nf);

    std::vector<double> bands(n_bands, 0.0);
    const std::size_t per = nb / n_bands;
    for (std::size_t b = 0; b < n_bands; ++b) {
        double acc = 0.0;
        std::size_t cnt = 0;
        for (std::size_t k = b * per; k < std::min(nb, (b + 1) * per); ++k) {
            acc += mean_power[k];
            ++cnt;
        }
        bands[b] = std::max(10.0 * std::log10(std::max(acc / cnt, 1e-30)), kLtasFloorDb);
    }
    return bands;
}

// ---- correlation structure -------------------------------------------------

// Pearson correlation between each ordered pair of tracks at each lag;
// zero-variance tracks contribute 0 by convention.
inline std::vector<double> corr_structure(const std::vector<std::vector<double>>& tracks,
                                          const std::vector<std::size_t>& lags = {1, 3, 5, 10}) {
    if (tracks.empty()) throw TooShort("no tracks");
    const std::size_t len = tracks[0].size();
    std::size_t max_lag = 0;
    for (std::size_t lag : lags) max_lag = std::max(max_lag, lag);
    if (len < 2 * std::max<std::size_t>(max_lag, 1)) throw TooShort("tracks shorter than twice the max lag");

    std::vector<double> out;
    out.reserve(tracks.size() * tracks.size() * lags.size());
    for (const auto& a : tracks) {
        for (const auto& b : tracks) {
            for (std::size_t lag : lags) {
                const std::size_t n = len - lag;
                double ma = 0.0, mb = 0.0;
                for (std::size_t t = 0; t < n; ++t) {
                    ma += a[t];
                    mb += b[t + lag];
                }
                ma /= n;
                mb /= n;
                double sab = 0.0, saa = 0.0, sbb = 0.0;
                for (std::size_t t = 0; t < n; ++t) {
                    const double da = a[t] - ma;
                    const double db = b[t + lag] - mb;
                    sab += da * db;
                    saa += da * da;
                    sbb += db * db;
                }
                out.push_back(saa > 1e-18 && sbb > 1e-18 ? sab / std::sqrt(saa * sbb) : 0.0);
            }
        }
    }
    return out;
}

// ---- envelope modulation spectrum -------------------------------------------

struct EmsBand {
    double peak_hz = 0.0;
    double peak_mag = 0.0;
    double ratio_3_6 = 0.0;  // energy in 3-6 Hz over energy in 0.5-20 Hz
};

// Octave bands centered 125*2^d Hz; per band: rectified envelope, 20 Hz
// low-pass, 100 Hz envelope rate, power spectrum over 0-20 Hz.
inline std::vector<EmsBand> ems(const Waveform& w, std::size_t n_bands = 7) {
    if (w.duration() < 1.0) throw TooShort("ems needs at least 1 s of signal");
    const int sr = w.sample_rate;
    std::size_t full_n = 1;
    while (full_n < w.samples.size()) full_n <<= 1;
    const auto spec = rfft(w.samples, full_n);
    const double bin_hz = static_cast<double>(sr) / full_n;

    const std::size_t env_rate = 100;
    const std::size_t dec = sr / env_rate;
    std::vector<EmsBand> out(n_bands);
    for (std::size_t d = 0; d < n_bands; ++d) {
        const double center = 125.0 * std::pow(2.0, static_cast<double>(d));
        const double lo = center / std::sqrt(2.0);
        const double hi = std::min(center * std::sqrt(2.0), 0.999 * sr / 2.0);
        std::vector<std::complex<double>> masked(full_n / 2 + 1, {0.0, 0.0});
        for (std::size_t k = 0; k < masked.size(); ++k) {
            const double hz = k * bin_hz;
            if (hz >= lo && hz <= hi) masked[k] = spec[k];
        }
        std::vector<double> band = irfft(masked, full_n);
        band.resize(w.samples.size());
        for (auto& v : band) v = std::abs(v);

        // 20 Hz low-pass on the rectified band
        std::size_t env_n = 1;
        while (env_n < band.size()) env_n <<= 1;
        auto env_spec = rfft(band, env_n);
        const double env_bin = static_cast<double>(sr) / env_n;
        for (std::size_t k = 0; k < env_spec.size(); ++k)
            if (k * env_bin > 20.0) env_spec[k] = {0.0, 0.0};
        const std::vector<double> smooth = irfft(env_spec, env_n);

        std::vector<double> env;
        for (std::size_t i = 0; i < w.samples.size(); i += dec) env.push_back(smooth[i]);
        double mean = 0.0;
        for (double v : env) mean += v;
        mean /= static_cast<double>(env.size());
        for (auto& v : env) v -= mean;

        std::size_t mod_n = 4;
        while (mod_n < 4 * env.size()) mod_n <<= 1;  // zero-pad for a fine grid
        const auto mod_spec = rfft(env, mod_n);
        const double mod_bin = static_cast<double>(env_rate) / mod_n;

        double total = 0.0, in_band = 0.0, best = 0.0;
        std::size_t best_k = 0;
        for (std::size_t k = 1; k < mod_spec.size(); ++k) {
            const double hz = k * mod_bin;
            if (hz > 20.0) break;
            const double p = std::norm(mod_spec[k]);
            if (hz >= 0.5) total += p;
            if (hz >= 3.0 && hz <= 6.0) in_band += p;
            if (hz >= 0.5 && p > best) {
                best = p;
                best_k = k;
            }
        }
        const double dc = mean * mean * static_cast<double>(env.size()) *
                          static_cast<double>(env.size());
        if (total <= 1e-12 * std::max(dc, 1e-12)) continue;  // flat envelope: all zeros
        double peak = static_cast<double>(best_k);
        if (best_k > 0 && best_k + 1 < mod_spec.size()) {
            const double a = std::norm(mod_spec[best_k - 1]);
            const double c = std::norm(mod_spec[best_k + 1]);
            const double denom = a - 2.0 * best + c;
            if (denom < -1e-30) peak += std::clamp(0.5 * (a - c) / denom, -1.0, 1.0);
        }
        out[d].peak_hz = peak * mod_bin;
        out[d].peak_mag = std::sqrt(best) / (mean * static_cast<double>(env.size()) + 1e-30);
        out[d].ratio_3_6 = in_band / total;
    }
    return out;
}

// ---- assembled evaluation vector -------------------------------------------

struct EvalFeatureVector {
    std::vector<double> values;
    bool include_rhythm = false;
    std::string schema = kEvalSchemaVersion;
};

inline std::size_t eval_vector_dim(bool include_rhythm, const EvalConfig& cfg = {}) {
    const std::size_t tracks = cfg.mfcc_coeffs + 3;
    std::size_t dim = cfg.ltas_bands + cfg.mfcc_coeffs * 4 + tracks * tracks * cfg.corr_lags.size();
    if (include_rhythm) dim += cfg.ems_bands * 3;
    return dim;
}

// Fixed block order: LTAS, MFCC statistics, correlation structure, then the
// EMS rhythm block when enabled. The rhythm flag only appends; prefixes match.
inline EvalFeatureVector assemble_eval_vector(const Waveform& w, bool include_rhythm,
                                              const EvalConfig& cfg = {}) {
    EvalFeatureVector out;
    out.include_rhythm = include_rhythm;
    auto& v = out.values;
    v.reserve(eval_vector_dim(include_rhythm, cfg));

    const std::vector<double> bands = ltas(w, cfg.ltas_bands);
    v.insert(v.end(), bands.begin(), bands.end());

    const auto coeffs = mfcc(w, cfg.mfcc_coeffs, cfg.mfcc_filters);
    const std::size_t nf = coeffs.size();
    for (std::size_t i = 0; i < cfg.mfcc_coeffs; ++i) {
        double mean = 0.0;
        for (const auto& row : coeffs) mean += row[i];
        mean /= static_cast<double>(nf);
        double m2 = 0.0, m3 = 0.0, m4 = 0.0;
        for (const auto& row : coeffs) {
            const double d = row[i] - mean;
            m2 += d * d;
            m3 += d * d * d;
            m4 += d * d * d * d;
        }
        m2 /= nf;
        m3 /= nf;
        m4 /= nf;
        const double sd = std::sqrt(m2);
        v.push_back(mean);
        v.push_back(sd);
        v.push_back(m2 > 1e-18 ? m3 / (sd * sd * sd) : 0.0);
        v.push_back(m2 > 1e-18 ? m4 / (m2 * m2) - 3.0 : 0.0);
    }

    std::vector<std::vector<double>> tracks;
    for (std::size_t i = 0; i < cfg.mfcc_coeffs; ++i) {
        std::vector<double> t(nf);
        for (std::size_t f = 0; f < nf; ++f) t[f] = coeffs[f][i];
        tracks.push_back(std::move(t));
    }
    auto formants = formant_tracks(w);
    for (auto& t : formants) {
        t.resize(nf, t.empty() ? 0.0 : t.back());
        tracks.push_back(std::move(t));
    }
    const std::vector<double> corr = corr_structure(tracks, cfg.corr_lags);
    v.insert(v.end(), corr.begin(), corr.end());

    if (include_rhythm) {
        const auto bands_ems = ems(w, cfg.ems_bands);
        for (const auto& b : bands_ems) {
            v.push_back(b.peak_hz);
            v.push_back(b.peak_mag);
            v.push_back(b.ratio_3_6);
        }
    }
    return out;
}

// ---- CSV serialization -------------------------------------------------------

inline void save_eval_vectors(const std::vector<EvalFeatureVector>& vecs, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path);
    const bool rhythm = !vecs.empty() && vecs.front().include_rhythm;
    const std::size_t dim = vecs.empty() ? 0 : vecs.front().values.size();
    os << "schema,dim,include_rhythm\n";
    os << kEvalSchemaVersion << "," << dim << "," << (rhythm ? 1 : 0) << "\n";
    char buf[64];
    for (const auto& vec : vecs) {
        if (vec.values.size() != dim) throw SchemaMismatch("row dimension mismatch");
        for (std::size_t i = 0; i < vec.values.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", vec.values[i]);
            os << (i ? "," : "") << buf;
        }
        os << "\n";
    }
}

inline std::vector<EvalFeatureVector> load_eval_vectors(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw NotFound("no such file: " + path);
    std::string line;
    if (!std::getline(is, line)) throw ParseError("empty eval vector file");
    if (!std::getline(is, line)) throw ParseError("missing schema row");
    const auto comma = line.find(',');
    if (line.substr(0, comma) != kEvalSchemaVersion)
        throw SchemaMismatch("unknown eval vector schema: " + line);
    const bool rhythm = line.back() == '1';
    std::vector<EvalFeatureVector> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        EvalFeatureVector vec;
        vec.include_rhythm = rhythm;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            const std::size_t next = line.find(',', pos);
            const std::string tok =
                line.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
            vec.values.push_back(std::stod(tok));
            if (next == std::string::npos) break;
            pos = next + 1;
        }
        out.push_back(std::move(vec));
    }
    return out;
}

}  // namespace dysim
