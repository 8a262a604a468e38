#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "dysim/vocoder.hpp"
#include "oracles.hpp"

using namespace dysim;

namespace {

double median(std::vector<double> v) {
    REQUIRE(!v.empty());
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

// per-frame RMS log-spectral distortion in dB between voiced frames
std::vector<double> frame_lsd(const VocoderFrames& a, const VocoderFrames& b) {
    std::vector<double> out;
    const std::size_t nf = std::min(a.num_frames, b.num_frames);
    for (std::size_t f = 0; f < nf; ++f) {
        if (a.f0[f] <= 0.0 || b.f0[f] <= 0.0) continue;
        double acc = 0.0;
        for (std::size_t k = 0; k < a.num_bins; ++k) {
            const double d = 10.0 * std::log10(a.sp_at(f, k)) - 10.0 * std::log10(b.sp_at(f, k));
            acc += d * d;
        }
        out.push_back(std::sqrt(acc / static_cast<double>(a.num_bins)));
    }
    return out;
}

double voiced_median_f0(const VocoderFrames& vf) {
    std::vector<double> v;
    for (double x : vf.f0)
        if (x > 0.0) v.push_back(x);
    return median(v);
}

std::size_t envelope_peak_bin(const VocoderFrames& vf, std::size_t frame, std::size_t lo_bin,
                              std::size_t hi_bin) {
    std::size_t best = lo_bin;
    for (std::size_t k = lo_bin; k < hi_bin; ++k)
        if (vf.sp_at(frame, k) > vf.sp_at(frame, best)) best = k;
    return best;
}

}  // namespace

TEST_CASE("f0 of a 100 Hz sawtooth is 100 +- 1 Hz on interior frames") {
    Waveform w = oracle::sawtooth(100.0, 0.5);
    F0Track t = estimate_f0(w, 50.0, 500.0);
    REQUIRE(t.hz.size() > 40);
    for (std::size_t f = 10; f + 10 < t.hz.size(); ++f) {
        CHECK(t.hz[f] > 0.0);
        CHECK(std::abs(t.hz[f] - 100.0) <= 1.0);
    }
}

TEST_CASE("white noise is at least 90% unvoiced") {
    Waveform w = oracle::white_noise(0.5, 16000, 5);
    F0Track t = estimate_f0(w, 50.0, 500.0);
    std::size_t unvoiced = 0;
    for (double v : t.hz)
        if (v == 0.0) ++unvoiced;
    CHECK(static_cast<double>(unvoiced) / t.hz.size() >= 0.9);
}

TEST_CASE("silence yields an all-zero track and empty input throws") {
    Waveform w;
    w.sample_rate = 16000;
    w.samples.assign(8000, 0.0);
    F0Track t = estimate_f0(w, 50.0, 500.0);
    for (double v : t.hz) CHECK(v == 0.0);
    Waveform e;
    CHECK_THROWS_AS(estimate_f0(e, 50.0, 500.0), EmptySignal);
    CHECK_THROWS_AS(estimate_f0(w, 10.0, 500.0), InvariantViolation);
}

TEST_CASE("analyze finds a single formant and low-band periodicity") {
    Waveform w = oracle::vowel(100.0, {700.0}, 0.6);
    VocoderFrames vf = analyze(w);
    const std::size_t f = vf.num_frames / 2;
    REQUIRE(vf.f0[f] > 0.0);

    // spectral peak near 700 Hz (bin 44.8 at fft 1024 / 16 kHz)
    const std::size_t peak = envelope_peak_bin(vf, f, 4, 128);
    const double peak_hz = static_cast<double>(peak) * 16000.0 / 1024.0;
    CHECK(std::abs(peak_hz - 700.0) <= 100.0);

    // low bands strongly periodic
    double lo_ap = 0.0;
    std::size_t cnt = 0;
    for (std::size_t k = 4; k < 64; ++k) {  // ~60-1000 Hz
        lo_ap += vf.ap_at(f, k);
        ++cnt;
    }
    CHECK(lo_ap / cnt < 0.2);
}

TEST_CASE("analyze marks white noise as aperiodic in every band") {
    Waveform w = oracle::white_noise(0.6, 16000, 11);
    VocoderFrames vf = analyze(w);
    const std::size_t f = vf.num_frames / 2;
    double min_ap = 1.0;
    for (std::size_t k = 0; k < vf.num_bins; ++k) min_ap = std::min(min_ap, vf.ap_at(f, k));
    CHECK(min_ap > 0.8);
}

TEST_CASE("analyze of silence sits at the numeric floor") {
    Waveform w;
    w.sample_rate = 16000;
    w.samples.assign(8000, 0.0);
    VocoderFrames vf = analyze(w);
    for (std::size_t f = 0; f < vf.num_frames; ++f) {
        CHECK(vf.f0[f] == 0.0);
        CHECK(vf.sp_at(f, 100) == kEnvelopeFloor);
    }
    Waveform e;
    CHECK_THROWS_AS(analyze(e), EmptySignal);
}

TEST_CASE("round trip keeps envelope, pitch, and formant peaks") {
    struct Case {
        double f0;
        std::vector<double> formants;
    };
    // formants sit on resolvable spots for each harmonic spacing
    const std::vector<Case> cases = {
        {100.0, {700.0, 1100.0, 2400.0}},
        {150.0, {600.0, 1800.0, 2400.0}},
        {220.0, {880.0, 1320.0, 2640.0}},
    };
    for (const auto& c : cases) {
        Waveform w = oracle::vowel(c.f0, c.formants, 0.6);
        VocoderFrames vf = analyze(w);
        Waveform y = synthesize(vf, 99);
        VocoderFrames vf2 = analyze(y);

        const double lsd = median(frame_lsd(vf, vf2));
        INFO("f0 = " << c.f0 << " median LSD = " << lsd);
        CHECK(lsd < 3.0);

        const double f0a = voiced_median_f0(vf);
        const double f0b = voiced_median_f0(vf2);
        CHECK(std::abs(f0b - f0a) / f0a <= 0.03);

        // first-formant envelope peak within 50 Hz between the two analyses
        const std::size_t mid = std::min(vf.num_frames, vf2.num_frames) / 2;
        const double bin_hz = 16000.0 / 1024.0;
        const std::size_t lo = static_cast<std::size_t>(300 / bin_hz);
        const std::size_t hi = static_cast<std::size_t>(1100 / bin_hz);
        const double p1 = envelope_peak_bin(vf, mid, lo, hi) * bin_hz;
        const double p2 = envelope_peak_bin(vf2, mid, lo, hi) * bin_hz;
        CHECK(std::abs(p1 - p2) <= 50.0);
    }
}

TEST_CASE("pure-noise aperiodicity synthesizes to an unvoiced signal") {
    Waveform w = oracle::vowel(120.0, {700.0, 1200.0}, 0.5);
    VocoderFrames vf = analyze(w);
    for (auto& a : vf.ap) a = 0.999;
    Waveform y = synthesize(vf, 7);
    F0Track t = estimate_f0(y, 50.0, 500.0);
    std::size_t voiced = 0;
    for (double v : t.hz)
        if (v > 0.0) ++voiced;
    CHECK(static_cast<double>(voiced) / t.hz.size() < 0.1);
}

TEST_CASE("zero envelope synthesizes to silence") {
    VocoderFrames vf;
    vf.num_frames = 100;
    vf.num_bins = 513;
    vf.fft_size = 1024;
    vf.sample_rate = 16000;
    vf.frame_shift = 0.005;
    vf.f0.assign(100, 120.0);
    vf.sp.assign(100 * 513, 0.0);
    vf.ap.assign(100 * 513, 0.5);
    Waveform y = synthesize(vf, 3);
    double peak = 0.0;
    for (double v : y.samples) peak = std::max(peak, std::abs(v));
    CHECK(peak < 1e-6);
}

TEST_CASE("synthesis is deterministic given the seed") {
    Waveform w = oracle::vowel(140.0, {600.0, 1400.0}, 0.3);
    VocoderFrames vf = analyze(w);
    Waveform a = synthesize(vf, 42);
    Waveform b = synthesize(vf, 42);
    REQUIRE(a.samples.size() == b.samples.size());
    for (std::size_t i = 0; i < a.samples.size(); ++i) REQUIRE(a.samples[i] == b.samples[i]);
}

TEST_CASE("invalid vocoder frames are rejected") {
    VocoderFrames vf;
    vf.num_frames = 2;
    vf.num_bins = 5;  // wrong for fft 1024
    vf.fft_size = 1024;
    vf.f0.assign(2, 0.0);
    vf.sp.assign(10, 1.0);
    vf.ap.assign(10, 0.5);
    CHECK_THROWS_AS(synthesize(vf, 1), InvariantViolation);
}

TEST_CASE("VOCF container round-trips bit-exactly") {
    Waveform w = oracle::vowel(110.0, {700.0}, 0.2);
    VocoderFrames vf = analyze(w);
    const std::string path =
        (std::filesystem::temp_directory_path() / "dysim_test.vocf").string();
    save_vocoder_frames(vf, path);
    VocoderFrames r = load_vocoder_frames(path);
    REQUIRE(r.num_frames == vf.num_frames);
    REQUIRE(r.num_bins == vf.num_bins);
    CHECK(r.frame_shift == vf.frame_shift);
    for (std::size_t i = 0; i < vf.sp.size(); ++i) {
        REQUIRE(r.sp[i] == vf.sp[i]);
        REQUIRE(r.ap[i] == vf.ap[i]);
    }
    for (std::size_t i = 0; i < vf.f0.size(); ++i) REQUIRE(r.f0[i] == vf.f0[i]);
    std::filesystem::remove(path);
}
