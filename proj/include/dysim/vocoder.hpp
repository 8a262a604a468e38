#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "dysim/bands.hpp"
#include "dysim/f0.hpp"
#include "dysim/fft.hpp"
#include "dysim/stft.hpp"
#include "dysim/wave.hpp"

namespace dysim {

struct VocoderConfig {
    std::size_t fft_size = 1024;
    double frame_shift = 0.005;
    double analysis_window = 0.025;  // seconds
    double f0_floor = 50.0;
    double f0_ceil = 500.0;
    std::size_t ap_bands = 24;
    double lifter_voiced = 0.0035;   // max quefrency, seconds
    double lifter_unvoiced = 0.002;  // seconds
};

inline constexpr double kEnvelopeFloor = 1e-20;

struct VocoderFrames {
    std::vector<double> f0;  // per frame, Hz; 0 = unvoiced
    std::vector<double> sp;  // F x B linear magnitude-squared envelope
    std::vector<double> ap;  // F x B aperiodicity ratio in [0,1]
    std::size_t num_frames = 0;
    std::size_t num_bins = 0;
    std::size_t fft_size = 1024;
    double frame_shift = 0.005;
    int sample_rate = 16000;

    double& sp_at(std::size_t f, std::size_t b) { return sp[f * num_bins + b]; }
    double sp_at(std::size_t f, std::size_t b) const { return sp[f * num_bins + b]; }
    double& ap_at(std::size_t f, std::size_t b) { return ap[f * num_bins + b]; }
    double ap_at(std::size_t f, std::size_t b) const { return ap[f * num_bins + b]; }

    void check() const {
        if (sp.size() != num_frames * num_bins || ap.size() != sp.size() || f0.size() != num_frames)
            throw InvariantViolation("vocoder frame shapes inconsistent");
        if (num_bins != fft_size / 2 + 1) throw InvariantViolation("bin count != fft_size/2+1");
        for (double v : sp)
            if (!(v >= 0.0) || !std::isfinite(v)) throw InvariantViolation("sp must be finite and >= 0");
        for (double v : f0)
            if (!(v >= 0.0)) throw InvariantViolation("f0 must be >= 0");
    }
};

namespace detail {

// Cepstral smoothing of a log spectrum: keep quefrencies below `cut`.
inline std::vector<double> lifter_log_spectrum(const std::vector<double>& logp, std::size_t fft_size,
                                               std::size_t cut) {
    const std::size_t nb = fft_size / 2 + 1;
    std::vector<std::complex<double>> full(fft_size);
    for (std::size_t k = 0; k < nb; ++k) full[k] = {logp[k], 0.0};
    for (std::size_t k = nb; k < fft_size; ++k) full[k] = {logp[fft_size - k], 0.0};
    const Fft& plan = Fft::plan(fft_size);
    plan.inverse(full);  // real cepstrum
    for (std::size_t q = 0; q < fft_size; ++q) {
        const std::size_t dist = std::min(q, fft_size - q);
        double g = 1.0;
        if (dist > cut)
            g = 0.0;
        else if (dist == cut)
            g = 0.5;
        full[q] *= g;
    }
    plan.forward(full);
    std::vector<double> out(nb);
    for (std::size_t k = 0; k < nb; ++k) out[k] = full[k].real();
    return out;
}

// Minimum-phase spectrum H(k) with |H| = exp(half_log), via cepstral folding.
inline std::vector<std::complex<double>> minimum_phase(const std::vector<double>& half_log,
                                                       std::size_t fft_size) {
    const std::size_t nb = fft_size / 2 + 1;
    std::vector<std::complex<double>> buf(fft_size);
    for (std::size_t k = 0; k < nb; ++k) buf[k] = {half_log[k], 0.0};
    for (std::size_t k = nb; k < fft_size; ++k) buf[k] = {half_log[fft_size - k], 0.0};
    const Fft& plan = Fft::plan(fft_size);
    plan.inverse(buf);
    // fold: double positive quefrencies, zero negative ones
    for (std::size_t q = 1; q < fft_size / 2; ++q) {
        buf[q] *= 2.0;
        buf[fft_size - q] = 0.0;
    }
    plan.forward(buf);
    for (auto& v : buf) v = std::exp(v);
    return buf;
}

}  // namespace detail

// STRAIGHT-style analysis: F0 + smooth spectral envelope + per-band
// aperiodicity painted over the bins of each band.
inline VocoderFrames analyze(const Waveform& w, const VocoderConfig& cfg = {}) {
    if (w.samples.empty()) throw EmptySignal("analyze of empty signal");
    const int sr = w.sample_rate;
    const std::size_t hop = hop_samples(cfg.frame_shift, sr);
    const std::size_t nf = frame_count(w.samples.size(), hop);
    const std::size_t fft_size = cfg.fft_size;
    const std::size_t nb = fft_size / 2 + 1;
    const std::size_t win_len = static_cast<std::size_t>(std::lround(cfg.analysis_window * sr));

    YinConfig yin;
    yin.frame_shift = cfg.frame_shift;
    const F0Track f0 = estimate_f0(w, cfg.f0_floor, cfg.f0_ceil, yin);

    const std::vector<double> win = make_window(WindowKind::hann, win_len);
    double win_sum = 0.0;
    for (double v : win) win_sum += v;
    const double peak_norm = (win_sum / 2.0) * (win_sum / 2.0);

    const BandLayout bands = mel_band_layout(cfg.ap_bands, fft_size, sr, sr / 2.0);

    // aperiodicity estimation groups: 3 consecutive BAP bands share one
    // band-limited correlation, widened to >= 600 Hz for a stable lag
    // estimate; the whole utterance is filtered once per group so frames
    // see a continuous band signal without segment-edge ringing
    const std::size_t group_width = 3;
    const std::size_t n_groups = (cfg.ap_bands + group_width - 1) / group_width;
    const double bin_hz = static_cast<double>(sr) / fft_size;
    std::size_t full_n = 1;
    while (full_n < w.samples.size() + 512) full_n <<= 1;
    const auto full_spec = rfft(w.samples, full_n);
    const double full_bin_hz = static_cast<double>(sr) / full_n;
    // analytic band signals: correlation magnitudes are then insensitive to
    // sub-sample carrier misalignment, which matters in the high bands
    std::vector<std::vector<std::complex<double>>> band_sig(n_groups);
    std::vector<std::size_t> grp_win(n_groups);
    const Fft& full_plan = Fft::plan(full_n);
    for (std::size_t g = 0; g < n_groups; ++g) {
        const std::size_t d0 = g * group_width;
        const std::size_t d1 = std::min(cfg.ap_bands, d0 + group_width) - 1;
        double lo_hz = bands.begin[d0] * bin_hz;
        double hi_hz = bands.end[d1] * bin_hz;
        if (hi_hz - lo_hz < 600.0) {  // widen, clipped to [0, nyquist]
            hi_hz = std::min(sr / 2.0, lo_hz + 600.0);
            lo_hz = std::max(0.0, hi_hz - 600.0);
        }
        // correlation window sized for ~150 independent samples in the band
        grp_win[g] = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::lround(150.0 * sr / (hi_hz - lo_hz))), 2 * win_len,
            static_cast<std::size_t>(std::lround(0.3 * sr)));
        std::vector<std::complex<double>> buf(full_n, {0.0, 0.0});
        const double roll = 40.0;  // raised-cosine edge, Hz
        for (std::size_t k = 0; k <= full_n / 2; ++k) {
            const double f_hz = k * full_bin_hz;
            double gain = 0.0;
            if (f_hz >= lo_hz && f_hz <= hi_hz)
                gain = 1.0;
            else if (f_hz > lo_hz - roll && f_hz < lo_hz)
                gain = 0.5 + 0.5 * std::cos(kPi * (lo_hz - f_hz) / roll);
            else if (f_hz > hi_hz && f_hz < hi_hz + roll)
                gain = 0.5 + 0.5 * std::cos(kPi * (f_hz - hi_hz) / roll);
            if (k != 0 && k != full_n / 2) gain *= 2.0;  // analytic signal
            buf[k] = full_spec[k] * gain;
        }
        full_plan.inverse(buf);
        band_sig[g] = std::move(buf);
    }

    VocoderFrames vf;
    vf.num_frames = nf;
    vf.num_bins = nb;
    vf.fft_size = fft_size;
    vf.frame_shift = cfg.frame_shift;
    vf.sample_rate = sr;
    vf.f0.assign(nf, 0.0);
    vf.sp.assign(nf * nb, kEnvelopeFloor);
    vf.ap.assign(nf * nb, 0.999);

    std::vector<double> frame(fft_size, 0.0), power(nb), logp(nb), filled(nb);
    const long n = static_cast<long>(w.samples.size());
    for (std::size_t f = 0; f < nf; ++f) {
        const long center = static_cast<long>(f * hop);
        double energy = 0.0;
        std::fill(frame.begin(), frame.end(), 0.0);
        for (std::size_t j = 0; j < win_len; ++j) {
            const long idx = center - static_cast<long>(win_len) / 2 + static_cast<long>(j);
            const double v = (idx >= 0 && idx < n) ? w.samples[idx] : 0.0;
            frame[j] = v * win[j];
            energy += v * v;
        }
        if (std::sqrt(energy / static_cast<double>(win_len)) < 1e-8) continue;  // leave floor/unvoiced

        auto spec = rfft(frame, fft_size);
        for (std::size_t k = 0; k < nb; ++k)
            power[k] = std::max(std::norm(spec[k]) / peak_norm, kEnvelopeFloor);

        const double hz = f0.hz[f];
        vf.f0[f] = hz;
        const bool voiced = hz > 0.0;

        // fill inter-harmonic valleys before smoothing so the envelope tracks peaks
        if (voiced) {
            const double spacing = hz * static_cast<double>(fft_size) / sr;
            const long hw = std::max<long>(1, std::lround(spacing / 2.0));
            for (long k = 0; k < static_cast<long>(nb); ++k) {
                double mx = power[k];
                for (long j = std::max<long>(0, k - hw);
                     j <= std::min<long>(static_cast<long>(nb) - 1, k + hw); ++j)
                    mx = std::max(mx, power[j]);
                filled[k] = mx;
            }
        } else {
            std::copy(power.begin(), power.end(), filled.begin());
        }
        for (std::size_t k = 0; k < nb; ++k) logp[k] = std::log(filled[k]);

        const std::size_t cut = voiced
            ? static_cast<std::size_t>(std::lround(std::min(sr / hz, cfg.lifter_voiced * sr)))
            : static_cast<std::size_t>(std::lround(cfg.lifter_unvoiced * sr));
        const std::vector<double> smooth = detail::lifter_log_spectrum(logp, fft_size, cut);
        for (std::size_t k = 0; k < nb; ++k)
            vf.sp_at(f, k) = std::max(std::exp(smooth[k]), kEnvelopeFloor);

        // aperiodicity: a fractional pitch lag is located on the full-band
        // signal, then each band's normalized correlation is interpolated at
        // that lag. Interpolation (not a max over lags) keeps the estimate
        // unbiased on noise.
        const std::size_t tau = voiced
            ? static_cast<std::size_t>(std::lround(sr / hz))
            : static_cast<std::size_t>(std::lround(sr / 100.0));
        const double total_energy = energy;
        const std::size_t ap_win = 2 * win_len;  // 50 ms; aperiodicity varies slowly
        const long start = center - static_cast<long>(ap_win) / 2;
        auto nccf = [&](const std::vector<double>& y, long lag) {
            if (lag < 8 || lag >= static_cast<long>(ap_win)) return 0.0;
            double num = 0.0, e0 = 0.0, e1 = 0.0;
            for (long j = 0; j + lag < static_cast<long>(ap_win); ++j) {
                const long i0 = start + j;
                const long i1 = start + j + lag;
                const double a = (i0 >= 0 && i0 < n) ? y[i0] : 0.0;
                const double b = (i1 >= 0 && i1 < n) ? y[i1] : 0.0;
                num += a * b;
                e0 += a * a;
                e1 += b * b;
            }
            if (e0 * e1 < 1e-16 * total_energy * total_energy) return 0.0;
            return num / std::sqrt(e0 * e1);
        };

        double rs[5];
        for (long dl = -2; dl <= 2; ++dl) rs[dl + 2] = nccf(w.samples, static_cast<long>(tau) + dl);
        int bi = 0;
        for (int i = 1; i < 5; ++i)
            if (rs[i] > rs[bi]) bi = i;
        double tau_frac = static_cast<double>(tau) + (bi - 2);
        if (bi > 0 && bi < 4) {
            const double a = rs[bi - 1], b = rs[bi], c = rs[bi + 1];
            const double denom = a - 2.0 * b + c;
            if (denom < -1e-12) tau_frac += std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
        }
        // band correlations use analytic signals; the magnitude is immune to
        // sub-sample carrier misalignment, which dominates in high bands
        auto band_r = [&](const std::vector<std::complex<double>>& y, long lag, std::size_t bw) {
            if (lag < 8 || lag >= static_cast<long>(bw)) return 0.0;
            const long bstart = center - static_cast<long>(bw) / 2;
            std::complex<double> cnum{0.0, 0.0};
            double e0 = 0.0, e1 = 0.0;
            const long yn = static_cast<long>(y.size());
            for (long j = 0; j + lag < static_cast<long>(bw); ++j) {
                const long i0 = bstart + j;
                const long i1 = bstart + j + lag;
                if (i0 < 0 || i1 >= yn) continue;
                const std::complex<double> a = y[i0];
                const std::complex<double> b = y[i1];
                cnum += a * std::conj(b);
                e0 += std::norm(a);
                e1 += std::norm(b);
            }
            if (e0 * e1 < 1e-16 * total_energy * total_energy) return 0.0;
            return std::abs(cnum) / std::sqrt(e0 * e1);
        };
        // periodicity must show at the lag and at twice the lag; noise only
        // rarely fakes both
        auto interp_r = [&](const std::vector<std::complex<double>>& y, double lag, std::size_t bw) {
            const long l0 = static_cast<long>(std::floor(lag));
            const double fr = lag - static_cast<double>(l0);
            return (1.0 - fr) * band_r(y, l0, bw) + fr * band_r(y, l0 + 1, bw);
        };
        for (std::size_t g = 0; g < n_groups; ++g) {
            double r = interp_r(band_sig[g], tau_frac, grp_win[g]);
            if (r < 0.5 && 2.0 * tau_frac + 1.0 < static_cast<double>(grp_win[g]))
                r = std::min(r, interp_r(band_sig[g], 2.0 * tau_frac, grp_win[g]));
            const double ap = std::clamp(1.0 - std::max(r, 0.0), 0.001, 0.999);
            const std::size_t d0 = g * group_width;
            const std::size_t d1 = std::min(cfg.ap_bands, d0 + group_width);
            for (std::size_t d = d0; d < d1; ++d)
                for (std::size_t k = bands.begin[d]; k < bands.end[d]; ++k) vf.ap_at(f, k) = ap;
        }
    }

    // median-smooth aperiodicity over +-3 frames; per-frame correlation
    // estimates on noise are individually coarse
    if (nf > 1) {
        std::vector<double> col(nf), windowed(7);
        for (std::size_t k = 0; k < nb; ++k) {
            for (std::size_t f = 0; f < nf; ++f) col[f] = vf.ap_at(f, k);
            for (std::size_t f = 0; f < nf; ++f) {
                std::size_t cnt = 0;
                for (long d = -3; d <= 3; ++d) {
                    const long j = static_cast<long>(f) + d;
                    if (j < 0 || j >= static_cast<long>(nf)) continue;
                    windowed[cnt++] = col[j];
                }
                std::nth_element(windowed.begin(), windowed.begin() + cnt / 2,
                                 windowed.begin() + cnt);
                vf.ap_at(f, k) = windowed[cnt / 2];
            }
        }
    }
    return vf;
}

// Mixed-excitation synthesis: minimum-phase pulse responses at F0-driven
// positions plus zero-phase filtered noise, crossfaded at the frame rate.
inline Waveform synthesize(const VocoderFrames& vf, std::uint64_t noise_seed = 0x5eed) {
    vf.check();
    const int sr = vf.sample_rate;
    const std::size_t hop = hop_samples(vf.frame_shift, sr);
    const std::size_t fft_size = vf.fft_size;
    const std::size_t nb = vf.num_bins;
    const std::size_t out_len = vf.num_frames * hop;

    Waveform out;
    out.sample_rate = sr;
    out.samples.assign(out_len, 0.0);
    if (vf.num_frames == 0) return out;

    // analysis-consistent calibration between pulse and noise paths
    const std::size_t win_len = static_cast<std::size_t>(std::lround(0.025 * sr));
    const std::vector<double> awin = make_window(WindowKind::hann, win_len);
    double win_sum = 0.0, win_sq = 0.0;
    for (double v : awin) {
        win_sum += v;
        win_sq += v * v;
    }
    const double noise_gain = (win_sum / 2.0) / std::sqrt(win_sq);

    auto clamp_ap = [](double a) { return std::clamp(a, 0.001, 0.999); };

    // ---- periodic part ----
    // pulses live at fractional sample positions; a windowed-sinc delay
    // kernel keeps pulse spacing exact, otherwise +-1 sample jitter makes
    // re-estimation lock onto subharmonics
    constexpr int kFracHalf = 8;
    std::vector<double> half_log(nb), shifted(fft_size + 2 * kFracHalf + 1);
    double t_pulse = -1.0;  // next pulse time; <0 means waiting for voiced onset
    for (std::size_t n = 0; n < out_len; ++n) {
        const std::size_t f = std::min(n / hop, vf.num_frames - 1);
        const double hz = vf.f0[f];
        if (hz <= 0.0) {
            t_pulse = -1.0;
            continue;
        }
        if (t_pulse < 0.0) t_pulse = static_cast<double>(n);
        while (t_pulse < static_cast<double>(n + 1) && t_pulse < static_cast<double>(out_len)) {
            const std::size_t pf = std::min(static_cast<std::size_t>(t_pulse) / hop, vf.num_frames - 1);
            const double phz = vf.f0[pf] > 0.0 ? vf.f0[pf] : hz;
            const double period = sr / phz;
            for (std::size_t k = 0; k < nb; ++k) {
                const double mag2 =
                    std::max(vf.sp_at(pf, k), kEnvelopeFloor) * (1.0 - clamp_ap(vf.ap_at(pf, k)));
                half_log[k] = 0.5 * std::log(std::max(mag2, kEnvelopeFloor));
            }
            const auto spec = detail::minimum_phase(half_log, fft_size);
            std::vector<std::complex<double>> buf(spec);
            Fft::plan(fft_size).inverse(buf);

            const long base = static_cast<long>(std::floor(t_pulse));
            const double frac = t_pulse - static_cast<double>(base);
            double kernel[2 * kFracHalf + 1];
            for (int m = -kFracHalf; m <= kFracHalf; ++m) {
                const double x = kPi * (static_cast<double>(m) - frac);
                const double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(x) / x;
                const double u = (static_cast<double>(m + kFracHalf) + (1.0 - frac)) /
                                 (2.0 * kFracHalf + 2.0);
                const double win = 0.5 - 0.5 * std::cos(2.0 * kPi * u);
                kernel[m + kFracHalf] = sinc * win;
            }
            std::fill(shifted.begin(), shifted.end(), 0.0);
            for (std::size_t j = 0; j < fft_size; ++j) {
                const double v = buf[j].real();
                if (v == 0.0) continue;
                for (int m = 0; m <= 2 * kFracHalf; ++m) shifted[j + m] += v * kernel[m];
            }
            // pulse amplitude T/2 makes the synthesized harmonic amplitudes
            // equal sqrt(sp*(1-ap)) under the peak-normalized analysis
            const double amp = 0.5 * period;
            for (std::size_t j = 0; j < shifted.size(); ++j) {
                const long idx = base - kFracHalf + static_cast<long>(j);
                if (idx < 0 || idx >= static_cast<long>(out_len)) continue;
                out.samples[idx] += amp * shifted[j];
            }
            t_pulse += period;
        }
    }

    // ---- noise part ----
    std::mt19937_64 rng(noise_seed);
    auto gauss = [&rng]() {
        // Box-Muller on explicit uniforms: deterministic for a given seed
        const double u1 = (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
        const double u2 = (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    };
    std::vector<double> noise(out_len + fft_size, 0.0);
    for (auto& v : noise) v = gauss();

    const std::size_t xfade = 2 * hop;
    const std::vector<double> xwin = make_window(WindowKind::hann, xfade);
    std::vector<std::complex<double>> block(fft_size);
    const Fft& plan = Fft::plan(fft_size);
    for (std::size_t f = 0; f < vf.num_frames; ++f) {
        const long center = static_cast<long>(f * hop);
        for (std::size_t j = 0; j < fft_size; ++j) {
            const long idx = center - static_cast<long>(fft_size / 2) + static_cast<long>(j);
            block[j] = {idx >= 0 && idx < static_cast<long>(noise.size()) ? noise[idx] : 0.0, 0.0};
        }
        plan.forward(block);
        for (std::size_t k = 0; k < nb; ++k) {
            const double gain =
                noise_gain * std::sqrt(std::max(vf.sp_at(f, k), kEnvelopeFloor) * clamp_ap(vf.ap_at(f, k)));
            block[k] *= gain;
            if (k != 0 && k != nb - 1) block[fft_size - k] *= gain;
        }
        plan.inverse(block);
        for (std::size_t j = 0; j < xfade; ++j) {
            const long idx = center - static_cast<long>(hop) + static_cast<long>(j);
            if (idx < 0 || idx >= static_cast<long>(out_len)) continue;
            out.samples[idx] += xwin[j] * block[fft_size / 2 - hop + j].real();
        }
    }
    return out;
}

// ---- VOCF container -----------------------------------------------------

inline void save_vocoder_frames(const VocoderFrames& vf, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path);
    os.write("VOCF", 4);
    write_u32(os, 1);
    write_u32(os, static_cast<std::uint32_t>(vf.num_frames));
    write_u32(os, static_cast<std::uint32_t>(vf.num_bins));
    write_f64(os, vf.frame_shift);
    write_u32(os, static_cast<std::uint32_t>(vf.fft_size));
    write_u32(os, static_cast<std::uint32_t>(vf.sample_rate));
    for (double v : vf.f0) write_f64(os, v);
    for (double v : vf.sp) write_f64(os, v);
    for (double v : vf.ap) write_f64(os, v);
    if (!os) throw IoError("write failed: " + path);
}

inline VocoderFrames load_vocoder_frames(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw NotFound("no such file: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "VOCF") throw CorruptHeader("not a VOCF file: " + path);
    const std::uint32_t version = read_u32(is);
    if (version != 1) throw UnsupportedFormat("unknown VOCF version");
    VocoderFrames vf;
    vf.num_frames = read_u32(is);
    vf.num_bins = read_u32(is);
    vf.frame_shift = read_f64(is);
    vf.fft_size = read_u32(is);
    vf.sample_rate = static_cast<int>(read_u32(is));
    vf.f0.resize(vf.num_frames);
    vf.sp.resize(vf.num_frames * vf.num_bins);
    vf.ap.resize(vf.num_frames * vf.num_bins);
    for (auto& v : vf.f0) v = read_f64(is);
    for (auto& v : vf.sp) v = read_f64(is);
    for (auto& v : vf.ap) v = read_f64(is);
    vf.check();
    return vf;
}

}  // namespace dysim
