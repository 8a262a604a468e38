#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "dysim/eval_features.hpp"
#include "dysim/features.hpp"
#include "dysim/vocoder.hpp"
#include "oracles.hpp"

using namespace dysim;

namespace {

VocoderFrames flat_envelope(std::size_t frames, double value, double ap_value = 0.5) {
    VocoderFrames vf;
    vf.num_frames = frames;
    vf.num_bins = 513;
    vf.fft_size = 1024;
    vf.sample_rate = 16000;
    vf.frame_shift = 0.005;
    vf.f0.assign(frames, 100.0);
    vf.sp.assign(frames * 513, value);
    vf.ap.assign(frames * 513, ap_value);
    return vf;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

}  // namespace

TEST_CASE("flat envelope maps to all-zero mceps") {
    VocoderFrames vf = flat_envelope(3, 1.0);
    FeatureSequence m = sp_to_mcep(vf);
    REQUIRE(m.dim == 39);
    for (double v : m.data) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("warp zero reduces to the plain truncated cepstrum") {
    Waveform w = oracle::vowel(120.0, {700.0}, 0.3);
    VocoderFrames vf = analyze(w);
    FeatureSequence m = sp_to_mcep(vf, 38, 0.0);

    // independent plain cepstrum of the log power envelope via naive DFT
    const std::size_t t = vf.num_frames / 2;
    std::vector<double> logp(1024);
    for (std::size_t k = 0; k < 513; ++k) logp[k] = std::log(vf.sp_at(t, k));
    for (std::size_t k = 513; k < 1024; ++k) logp[k] = logp[1024 - k];
    const auto spec = oracle::naive_dft(logp);
    for (std::size_t q = 0; q < 39; ++q) {
        const double expected = spec[q].real() / 1024.0;
        CHECK(m.at(q, t) == Catch::Approx(expected).margin(1e-9));
    }
}

TEST_CASE("mcep round trip stays under 1.5 dB on a one-formant envelope") {
    Waveform w = oracle::vowel(110.0, {700.0}, 0.5);
    VocoderFrames vf = analyze(w);
    FeatureSequence m = sp_to_mcep(vf);
    const std::vector<double> sp = mcep_to_sp(m, 1024);
    std::vector<double> lsd;
    for (std::size_t t = 0; t < vf.num_frames; ++t) {
        if (vf.f0[t] <= 0.0) continue;
        double acc = 0.0;
        for (std::size_t k = 0; k < 513; ++k) {
            const double d =
                10.0 * std::log10(vf.sp_at(t, k)) - 10.0 * std::log10(sp[t * 513 + k]);
            acc += d * d;
        }
        lsd.push_back(std::sqrt(acc / 513.0));
    }
    CHECK(median(lsd) < 1.5);
}

TEST_CASE("adding log(4) to c0 scales the envelope by 4") {
    Waveform w = oracle::vowel(130.0, {600.0}, 0.2);
    VocoderFrames vf = analyze(w);
    FeatureSequence m = sp_to_mcep(vf);
    const std::vector<double> base = mcep_to_sp(m, 1024);
    for (std::size_t t = 0; t < m.frames; ++t) m.at(0, t) += std::log(4.0);
    const std::vector<double> scaled = mcep_to_sp(m, 1024);
    for (std::size_t i = 0; i < base.size(); i += 97)
        CHECK(scaled[i] == Catch::Approx(4.0 * base[i]).epsilon(1e-9));
}

TEST_CASE("mcep kind and envelope positivity are enforced") {
    VocoderFrames vf = flat_envelope(2, 1.0);
    vf.sp[100] = 0.0;
    CHECK_THROWS_AS(sp_to_mcep(vf), NonPositiveEnvelope);

    FeatureSequence b;
    b.kind = FeatureKind::bap;
    b.dim = 24;
    b.frames = 1;
    b.data.assign(24, 0.0);
    CHECK_THROWS_AS(mcep_to_sp(b, 1024), KindMismatch);
}

TEST_CASE("bap of unit aperiodicity is 0 dB and of 0.1 is -20 dB") {
    VocoderFrames vf = flat_envelope(2, 1.0, 0.999);
    for (auto& a : vf.ap) a = 1.0;
    FeatureSequence b = ap_to_bap(vf);
    REQUIRE(b.dim == 24);
    for (double v : b.data) CHECK(v == Catch::Approx(0.0).margin(1e-12));

    for (auto& a : vf.ap) a = 0.1;
    b = ap_to_bap(vf);
    for (double v : b.data) CHECK(v == Catch::Approx(-20.0).epsilon(1e-9));
}

TEST_CASE("bap round trip equals the band-constant projection") {
    Waveform w = oracle::vowel(120.0, {800.0, 2000.0}, 0.3);
    VocoderFrames vf = analyze(w);
    FeatureSequence b = ap_to_bap(vf);
    const std::vector<double> ap = bap_to_ap(b, 1024, 16000);

    // independent piecewise-constant oracle over mel band edges
    const double mel_hi = 2595.0 * std::log10(1.0 + 8000.0 / 700.0);
    std::vector<std::size_t> edges;
    std::size_t prev = 0;
    edges.push_back(0);
    for (std::size_t d = 0; d < 24; ++d) {
        const double mel = mel_hi * (d + 1) / 24.0;
        const double hz = 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
        std::size_t e = static_cast<std::size_t>(std::ceil(hz / (16000.0 / 1024.0)));
        if (e <= prev) e = prev + 1;
        if (e > 513) e = 513;
        if (d == 23) e = 513;
        edges.push_back(e);
        prev = e;
    }
    for (std::size_t t = 0; t < vf.num_frames; t += 7) {
        for (std::size_t d = 0; d < 24; ++d) {
            double acc = 0.0;
            std::size_t cnt = 0;
            for (std::size_t k = edges[d]; k < edges[d + 1]; ++k) {
                acc += 20.0 * std::log10(std::max(vf.ap_at(t, k), 1e-10));
                ++cnt;
            }
            const double expected =
                std::clamp(std::pow(10.0, std::max(acc / cnt, -60.0) / 20.0), 0.001, 0.999);
            for (std::size_t k = edges[d]; k < edges[d + 1]; ++k)
                CHECK(ap[t * 513 + k] == Catch::Approx(expected).margin(1e-12));
        }
    }
}

TEST_CASE("bap rejects out-of-range aperiodicity") {
    VocoderFrames vf = flat_envelope(1, 1.0);
    vf.ap[5] = 1.5;
    CHECK_THROWS_AS(ap_to_bap(vf), RangeViolation);
}

TEST_CASE("feature sequences round trip through the FSEQ container") {
    Waveform w = oracle::vowel(120.0, {700.0}, 0.2);
    VocoderFrames vf = analyze(w);
    FeatureSequence m = sp_to_mcep(vf);
    m.source_id = "u1";
    const std::string path = (std::filesystem::temp_directory_path() / "dysim.fseq").string();
    save_feature_sequence(m, path);
    FeatureSequence r = load_feature_sequence(path);
    REQUIRE(r.dim == m.dim);
    REQUIRE(r.frames == m.frames);
    CHECK(r.kind == m.kind);
    for (std::size_t i = 0; i < m.data.size(); ++i) REQUIRE(r.data[i] == m.data[i]);
    std::filesystem::remove(path);
}

TEST_CASE("mfcc of silence has zero higher coefficients") {
    Waveform w;
    w.sample_rate = 16000;
    w.samples.assign(8000, 0.0);
    const auto c = mfcc(w);
    for (const auto& row : c)
        for (std::size_t i = 1; i < 13; ++i) CHECK(std::abs(row[i]) < 1e-9);
    CHECK(c[0][0] == Catch::Approx(std::sqrt(1.0 / 26.0) * 26.0 * std::log(1e-10)));
}

TEST_CASE("mfcc matches an independent filterbank + DCT oracle") {
    Waveform w = oracle::sine(1000.0, 0.2);
    const auto c = mfcc(w);
    const std::size_t f = c.size() / 2;

    // oracle: naive DFT, triangular filters, DCT-II written out directly
    const std::size_t win = 400, fft_size = 512, nfilt = 26;
    std::vector<double> frame(fft_size, 0.0);
    for (std::size_t j = 0; j < win; ++j) {
        const double window = 0.5 - 0.5 * std::cos(2.0 * oracle::kPi * j / win);
        frame[j] = w.samples[f * 160 + j] * window;
    }
    const auto spec = oracle::naive_dft(frame);
    const double mel_hi = 2595.0 * std::log10(1.0 + 8000.0 / 700.0);
    auto mel_to_hz_o = [](double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); };
    std::vector<double> loge(nfilt);
    for (std::size_t m = 0; m < nfilt; ++m) {
        const double lo = mel_to_hz_o(mel_hi * m / 27.0);
        const double mid = mel_to_hz_o(mel_hi * (m + 1) / 27.0);
        const double hi = mel_to_hz_o(mel_hi * (m + 2) / 27.0);
        double acc = 0.0;
        for (std::size_t k = 0; k <= fft_size / 2; ++k) {
            const double hz = k * 16000.0 / fft_size;
            double g = 0.0;
            if (hz > lo && hz < mid)
                g = (hz - lo) / (mid - lo);
            else if (hz >= mid && hz < hi)
                g = (hi - hz) / (hi - mid);
            acc += g * std::norm(spec[k]);
        }
        loge[m] = std::log(std::max(acc, 1e-10));
    }
    for (std::size_t i = 0; i < 13; ++i) {
        double acc = 0.0;
        for (std::size_t m = 0; m < nfilt; ++m)
            acc += loge[m] * std::cos(oracle::kPi * i * (m + 0.5) / nfilt);
        const double norm = i == 0 ? std::sqrt(1.0 / nfilt) : std::sqrt(2.0 / nfilt);
        CHECK(c[f][i] == Catch::Approx(norm * acc).margin(1e-9));
    }
}

TEST_CASE("shifting the input by one hop shifts mfcc frames by one") {
    Waveform w = oracle::white_noise(0.4, 16000, 21);
    Waveform shifted;
    shifted.sample_rate = 16000;
    shifted.samples.assign(160, 0.0);
    shifted.samples.insert(shifted.samples.end(), w.samples.begin(), w.samples.end());
    const auto a = mfcc(w);
    const auto b = mfcc(shifted);
    for (std::size_t f = 0; f + 1 < a.size(); ++f)
        for (std::size_t i = 0; i < 13; ++i)
            REQUIRE(b[f + 1][i] == Catch::Approx(a[f][i]).margin(1e-12));
}

TEST_CASE("ltas peaks in the 1 kHz band for a 1 kHz sine") {
    Waveform w = oracle::sine(1000.0, 0.5);
    const auto bands = ltas(w);
    REQUIRE(bands.size() == 64);
    std::size_t best = 0;
    for (std::size_t b = 1; b < bands.size(); ++b)
        if (bands[b] > bands[best]) best = b;
    CHECK(best == 8);  // 8 * 125 Hz = 1000 Hz
}

TEST_CASE("ltas of seeded white noise is flat within 6 dB") {
    Waveform w = oracle::white_noise(5.0, 16000, 1001);
    const auto bands = ltas(w);
    const double mx = *std::max_element(bands.begin(), bands.end());
    const double mn = *std::min_element(bands.begin(), bands.end());
    CHECK(mx - mn < 6.0);
}

TEST_CASE("ltas of silence sits at the floor") {
    Waveform w;
    w.sample_rate = 16000;
    w.samples.assign(8000, 0.0);
    const auto bands = ltas(w);
    for (double b : bands) CHECK(b == -80.0);
    Waveform e;
    CHECK_THROWS_AS(ltas(e), EmptySignal);
}

TEST_CASE("correlation structure conventions") {
    // constant track: zero variance -> 0 by convention
    std::vector<std::vector<double>> tracks = {std::vector<double>(100, 5.0)};
    auto c = corr_structure(tracks, {1, 3, 5, 10});
    for (double v : c) CHECK(v == 0.0);

    // sinusoid with a 20-frame period: lag 10 correlation is exactly -1
    std::vector<double> s(200);
    for (std::size_t t = 0; t < s.size(); ++t) s[t] = std::sin(2.0 * oracle::kPi * t / 20.0);
    c = corr_structure({s}, {10});
    CHECK(c[0] == Catch::Approx(-1.0).margin(1e-12));

    // identical tracks at lag 0 correlate perfectly
    c = corr_structure({s, s}, {0});
    REQUIRE(c.size() == 4);
    CHECK(c[1] == Catch::Approx(1.0).margin(1e-12));

    CHECK_THROWS_AS(corr_structure({std::vector<double>(15, 1.0)}, {10}), TooShort);
}

TEST_CASE("formant tracks recover synthetic vowel formants") {
    Waveform w = oracle::vowel(110.0, {700.0, 1200.0, 2500.0}, 0.6);
    const auto tracks = formant_tracks(w);
    REQUIRE(tracks.size() == 3);
    const double f1 = median(tracks[0]);
    const double f2 = median(tracks[1]);
    const double f3 = median(tracks[2]);
    CHECK(std::abs(f1 - 700.0) < 80.0);
    CHECK(std::abs(f2 - 1200.0) < 100.0);
    CHECK(std::abs(f3 - 2500.0) < 150.0);
}

TEST_CASE("ems finds the modulation rate of amplitude-modulated noise") {
    Waveform w = oracle::white_noise(4.0, 16000, 31, 0.4);
    for (std::size_t i = 0; i < w.samples.size(); ++i)
        w.samples[i] *= 0.5 * (1.0 + 0.9 * std::sin(2.0 * oracle::kPi * 4.0 * i / 16000.0));
    const auto bands = ems(w);
    REQUIRE(bands.size() == 7);
    for (const auto& b : bands) {
        CHECK(std::abs(b.peak_hz - 4.0) <= 0.25);
        CHECK(b.ratio_3_6 > 0.3);
    }
}

TEST_CASE("ems of an unmodulated tone is quiet in the 3-6 Hz range") {
    Waveform w = oracle::sine(1000.0, 2.0);
    const auto bands = ems(w);
    for (const auto& b : bands) CHECK(b.ratio_3_6 < 0.2);
}

TEST_CASE("ems separates a 2 Hz modulation from the 3-6 Hz band") {
    Waveform w = oracle::white_noise(4.0, 16000, 77, 0.4);
    for (std::size_t i = 0; i < w.samples.size(); ++i)
        w.samples[i] *= 0.5 * (1.0 + 0.9 * std::sin(2.0 * oracle::kPi * 2.0 * i / 16000.0));
    const auto bands = ems(w);
    for (const auto& b : bands) {
        CHECK(std::abs(b.peak_hz - 2.0) <= 0.25);
        CHECK(b.ratio_3_6 < 0.3);
    }
    Waveform shorty = oracle::white_noise(0.5);
    CHECK_THROWS_AS(ems(shorty), TooShort);
}

TEST_CASE("eval vector layout: rhythm only appends") {
    Waveform w = oracle::vowel(120.0, {700.0, 1300.0}, 1.2);
    const EvalFeatureVector without = assemble_eval_vector(w, false);
    const EvalFeatureVector with = assemble_eval_vector(w, true);
    CHECK(without.values.size() == eval_vector_dim(false));
    CHECK(with.values.size() == eval_vector_dim(true));
    CHECK(with.values.size() - without.values.size() == 21);
    for (std::size_t i = 0; i < without.values.size(); ++i)
        REQUIRE(with.values[i] == without.values[i]);

    // determinism across calls
    const EvalFeatureVector again = assemble_eval_vector(w, false);
    for (std::size_t i = 0; i < without.values.size(); ++i)
        REQUIRE(again.values[i] == without.values[i]);
}

TEST_CASE("eval vectors round trip through csv") {
    Waveform w = oracle::vowel(120.0, {650.0, 1100.0}, 1.1);
    std::vector<EvalFeatureVector> vecs = {assemble_eval_vector(w, false)};
    const std::string path = (std::filesystem::temp_directory_path() / "dysim_eval.csv").string();
    save_eval_vectors(vecs, path);
    const auto back = load_eval_vectors(path);
    REQUIRE(back.size() == 1);
    REQUIRE(back[0].values.size() == vecs[0].values.size());
    for (std::size_t i = 0; i < vecs[0].values.size(); ++i)
        REQUIRE(back[0].values[i] == vecs[0].values[i]);
    std::filesystem::remove(path);
}
