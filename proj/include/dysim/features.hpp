#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "dysim/bands.hpp"
#include "dysim/fft.hpp"
#include "dysim/vocoder.hpp"

namespace dysim {

enum class FeatureKind : std::uint32_t { mcep = 0, bap = 1 };

inline constexpr std::size_t kMcepDim = 39;  // order 38 + energy coefficient c0
inline constexpr std::size_t kBapDim = 24;
inline constexpr double kDefaultWarp = 0.42;  // mel approximation at 16 kHz
inline constexpr double kBapFloorDb = -60.0;

struct FeatureSequence {
    std::vector<double> data;  // D x T; each dimension's track is contiguous
    std::size_t dim = 0;
    std::size_t frames = 0;
    FeatureKind kind = FeatureKind::mcep;
    double frame_shift = 0.005;
    std::string source_id;

    double& at(std::size_t d, std::size_t t) { return data[d * frames + t]; }
    double at(std::size_t d, std::size_t t) const { return data[d * frames + t]; }

    static std::size_t expected_dim(FeatureKind k) { return k == FeatureKind::mcep ? kMcepDim : kBapDim; }

    void check() const {
        if (dim != expected_dim(kind)) throw InvariantViolation("feature dimensionality mismatch");
        if (data.size() != dim * frames) throw InvariantViolation("feature buffer size mismatch");
        for (double v : data)
            if (!std::isfinite(v)) throw InvariantViolation("non-finite feature value");
    }
};

// ---- frequency warping (all-pass substitution on cepstra) ---------------

// Transforms cepstral coefficients c1[0..m1] to the warped domain with
// all-pass parameter `alpha`; alpha = 0 is the identity.
inline void freqt(const double* c1, std::size_t m1, double* c2, std::size_t m2, double alpha) {
    const double b = 1.0 - alpha * alpha;
    std::vector<double> d(m2 + 1, 0.0), g(m2 + 1, 0.0);
    for (long i = -static_cast<long>(m1); i <= 0; ++i) {
        d[0] = g[0];
        g[0] = c1[-i] + alpha * d[0];
        if (m2 >= 1) {
            d[1] = g[1];
            g[1] = b * d[0] + alpha * d[1];
        }
        for (std::size_t j = 2; j <= m2; ++j) {
            d[j] = g[j];
            g[j] = d[j - 1] + alpha * (d[j] - g[j - 1]);
        }
    }
    for (std::size_t j = 0; j <= m2; ++j) c2[j] = g[j];
}

// ---- MCEP ----------------------------------------------------------------

// Warped cepstrum of the log power envelope, truncated to order+1 coeffs.
inline FeatureSequence sp_to_mcep(const VocoderFrames& vf, std::size_t order = kMcepDim - 1,
                                  double warp = kDefaultWarp) {
    if (!(warp >= 0.0 && warp < 0.6)) throw InvariantViolation("warp must be in [0, 0.6)");
    const std::size_t fft_size = vf.fft_size;
    const std::size_t nb = vf.num_bins;
    const Fft& plan = Fft::plan(fft_size);

    FeatureSequence out;
    out.kind = FeatureKind::mcep;
    out.dim = order + 1;
    out.frames = vf.num_frames;
    out.frame_shift = vf.frame_shift;
    out.data.assign(out.dim * out.frames, 0.0);
    if (out.dim != kMcepDim) throw InvariantViolation("mcep order+1 must be 39");

    std::vector<std::complex<double>> buf(fft_size);
    const std::size_t m1 = fft_size / 2;
    std::vector<double> cep(m1 + 1), warped(order + 1);
    for (std::size_t t = 0; t < vf.num_frames; ++t) {
        for (std::size_t k = 0; k < nb; ++k) {
            const double v = vf.sp_at(t, k);
            if (!(v > 0.0)) throw NonPositiveEnvelope("sp must be strictly positive");
            buf[k] = {std::log(v), 0.0};
        }
        for (std::size_t k = nb; k < fft_size; ++k) buf[k] = buf[fft_size - k];
        plan.inverse(buf);
        for (std::size_t q = 0; q <= m1; ++q) cep[q] = buf[q].real();
        freqt(cep.data(), m1, warped.data(), order, warp);
        for (std::size_t d = 0; d <= order; ++d) out.at(d, t) = warped[d];
    }
    return out;
}

// Inverse: unwarp to a long plain cepstrum, then evaluate the log envelope.
inline std::vector<double> mcep_to_sp(const FeatureSequence& m, std::size_t fft_size,
                                      double warp = kDefaultWarp) {
    if (m.kind != FeatureKind::mcep) throw KindMismatch("expected mcep features");
    const std::size_t nb = fft_size / 2 + 1;
    const std::size_t m2 = fft_size / 2;
    const Fft& plan = Fft::plan(fft_size);

    std::vector<double> sp(m.frames * nb, 0.0);
    std::vector<double> warped(m.dim), plain(m2 + 1);
    std::vector<std::complex<double>> buf(fft_size);
    for (std::size_t t = 0; t < m.frames; ++t) {
        for (std::size_t d = 0; d < m.dim; ++d) warped[d] = m.at(d, t);
        freqt(warped.data(), m.dim - 1, plain.data(), m2, -warp);
        for (std::size_t q = 0; q <= m2; ++q) buf[q] = {plain[q], 0.0};
        for (std::size_t q = m2 + 1; q < fft_size; ++q) buf[q] = buf[fft_size - q];
        plan.forward(buf);
        for (std::size_t k = 0; k < nb; ++k)
            sp[t * nb + k] = std::max(std::exp(buf[k].real()), kEnvelopeFloor);
    }
    return sp;
}

// ---- BAP -----------------------------------------------------------------

// Mean of 20*log10(ap) over each of 24 mel-spaced bands, floored at -60 dB.
inline FeatureSequence ap_to_bap(const VocoderFrames& vf) {
    const BandLayout bands = mel_band_layout(kBapDim, vf.fft_size, vf.sample_rate,
                                             vf.sample_rate / 2.0);
    FeatureSequence out;
    out.kind = FeatureKind::bap;
    out.dim = kBapDim;
    out.frames = vf.num_frames;
    out.frame_shift = vf.frame_shift;
    out.data.assign(out.dim * out.frames, 0.0);

    for (std::size_t t = 0; t < vf.num_frames; ++t) {
        for (std::size_t d = 0; d < kBapDim; ++d) {
            double acc = 0.0;
            std::size_t cnt = 0;
            for (std::size_t k = bands.begin[d]; k < bands.end[d]; ++k) {
                const double a = vf.ap_at(t, k);
                if (!(a >= 0.0 && a <= 1.0)) throw RangeViolation("ap outside [0,1]");
                acc += 20.0 * std::log10(std::max(a, 1e-10));
                ++cnt;
            }
            out.at(d, t) = std::max(acc / static_cast<double>(cnt), kBapFloorDb);
        }
    }
    return out;
}

// Paints each band value across its bins, clamped to [0.001, 0.999].
inline std::vector<double> bap_to_ap(const FeatureSequence& b, std::size_t fft_size,
                                     int sample_rate) {
    if (b.kind != FeatureKind::bap) throw KindMismatch("expected bap features");
    const BandLayout bands = mel_band_layout(kBapDim, fft_size, sample_rate, sample_rate / 2.0);
    const std::size_t nb = fft_size / 2 + 1;
    std::vector<double> ap(b.frames * nb, 0.999);
    for (std::size_t t = 0; t < b.frames; ++t) {
        for (std::size_t d = 0; d < kBapDim; ++d) {
            const double v = std::clamp(std::pow(10.0, b.at(d, t) / 20.0), 0.001, 0.999);
            for (std::size_t k = bands.begin[d]; k < bands.end[d]; ++k) ap[t * nb + k] = v;
        }
    }
    return ap;
}

// ---- FSEQ container ------------------------------------------------------

inline void save_feature_sequence(const FeatureSequence& f, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path);
    os.write("FSEQ", 4);
    write_u32(os, static_cast<std::uint32_t>(f.kind));
    write_u32(os, static_cast<std::uint32_t>(f.dim));
    write_u32(os, static_cast<std::uint32_t>(f.frames));
    write_f64(os, f.frame_shift);
    for (std::size_t t = 0; t < f.frames; ++t)
        for (std::size_t d = 0; d < f.dim; ++d) write_f64(os, f.at(d, t));
    if (!os) throw IoError("write failed: " + path);
}

inline FeatureSequence load_feature_sequence(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw NotFound("no such file: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "FSEQ") throw CorruptHeader("not a FSEQ file: " + path);
    FeatureSequence f;
    f.kind = static_cast<FeatureKind>(read_u32(is));
    f.dim = read_u32(is);
    f.frames = read_u32(is);
    f.frame_shift = read_f64(is);
    f.data.resize(f.dim * f.frames);
    for (std::size_t t = 0; t < f.frames; ++t)
        for (std::size_t d = 0; d < f.dim; ++d) f.at(d, t) = read_f64(is);
    f.check();
    return f;
}

}  // namespace dysim
