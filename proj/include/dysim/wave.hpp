#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dysim/common.hpp"

namespace dysim {

struct Waveform {
    std::vector<double> samples;  // amplitudes in [-1, 1]
    int sample_rate = 16000;

    double duration() const {
        return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
    }
    std::size_t size() const { return samples.size(); }
};

inline constexpr int kCanonicalRate = 16000;

struct SaveReport {
    std::size_t clipped = 0;  // samples outside [-1,1] hard-clipped on write
};

// ---- RIFF/WAVE ----------------------------------------------------------

namespace detail {
inline std::uint32_t read_tag(std::istream& is) {
    char t[4];
    is.read(t, 4);
    if (!is) throw CorruptHeader("truncated RIFF chunk");
    return static_cast<std::uint32_t>(static_cast<unsigned char>(t[0])) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(t[1])) << 8) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(t[2])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(t[3])) << 24);
}
inline constexpr std::uint32_t tag(char a, char b, char c, char d) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(a)) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(b)) << 8) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(c)) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(d)) << 24);
}
}  // namespace detail

inline Waveform load_wav(const std::string& path) {
    namespace fs = std::filesystem;
    if (!fs::exists(path)) throw NotFound("no such file: " + path);
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);

    using detail::tag;
    if (detail::read_tag(is) != tag('R', 'I', 'F', 'F')) throw CorruptHeader("missing RIFF tag: " + path);
    read_u32(is);  // riff size
    if (detail::read_tag(is) != tag('W', 'A', 'V', 'E')) throw CorruptHeader("missing WAVE tag: " + path);

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    Waveform w;

    while (is.peek() != EOF) {
        std::uint32_t id = detail::read_tag(is);
        std::uint32_t size = read_u32(is);
        if (id == tag('f', 'm', 't', ' ')) {
            if (size < 16) throw CorruptHeader("fmt chunk too small: " + path);
            format = read_u16(is);
            channels = read_u16(is);
            rate = read_u32(is);
            read_u32(is);  // byte rate
            read_u16(is);  // block align
            bits = read_u16(is);
            is.ignore(size - 16);
            have_fmt = true;
        } else if (id == tag('d', 'a', 't', 'a')) {
            if (!have_fmt) throw CorruptHeader("data chunk before fmt: " + path);
            if (channels != 1) throw UnsupportedFormat("only mono supported: " + path);
            if (rate == 0) throw CorruptHeader("zero sample rate: " + path);
            if (format == 1 && bits == 16) {
                std::size_t n = size / 2;
                w.samples.resize(n);
                for (std::size_t i = 0; i < n; ++i)
                    w.samples[i] = static_cast<double>(read_i16(is)) / 32768.0;
            } else if (format == 3 && bits == 32) {
                std::size_t n = size / 4;
                w.samples.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    std::uint32_t u = read_u32(is);
                    float f;
                    std::memcpy(&f, &u, sizeof f);
                    w.samples[i] = static_cast<double>(f);
                }
            } else {
                throw UnsupportedFormat("only PCM16 or float32 supported: " + path);
            }
            w.sample_rate = static_cast<int>(rate);
            if (size & 1) is.ignore(1);
            return w;
        } else {
            is.ignore(size + (size & 1));
            if (!is) throw CorruptHeader("truncated chunk: " + path);
        }
    }
    throw CorruptHeader("no data chunk: " + path);
}

inline SaveReport save_wav(const Waveform& w, const std::string& path) {
    for (double s : w.samples)
        if (!std::isfinite(s)) throw InvariantViolation("non-finite sample");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path);

    const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
    os.write("RIFF", 4);
    write_u32(os, 36 + data_bytes);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    write_u32(os, 16);
    write_u16(os, 1);  // PCM
    write_u16(os, 1);  // mono
    write_u32(os, static_cast<std::uint32_t>(w.sample_rate));
    write_u32(os, static_cast<std::uint32_t>(w.sample_rate * 2));
    write_u16(os, 2);
    write_u16(os, 16);
    os.write("data", 4);
    write_u32(os, data_bytes);

    SaveReport rep;
    for (double s : w.samples) {
        double c = s;
        if (c > 1.0) {
            c = 1.0;
            ++rep.clipped;
        } else if (c < -1.0) {
            c = -1.0;
            ++rep.clipped;
        }
        long v = std::lround(c * 32768.0);
        if (v > 32767) v = 32767;
        if (v < -32768) v = -32768;
        write_i16(os, static_cast<std::int16_t>(v));
    }
    if (!os) throw IoError("write failed: " + path);
    return rep;
}

// ---- resampling ---------------------------------------------------------

// Windowed-sinc resampler (Blackman window, 24 zero crossings). load_wav
// never resamples; ingest converts to the canonical 16 kHz with this.
inline Waveform resample(const Waveform& w, int target_rate) {
    if (target_rate <= 0) throw InvariantViolation("bad target rate");
    if (w.sample_rate == target_rate) return w;
    if (w.samples.empty()) return Waveform{{}, target_rate};

    const double ratio = static_cast<double>(target_rate) / w.sample_rate;
    const double cutoff = 0.45 * std::min(1.0, ratio);  // as fraction of source rate
    const int half_taps = 24;
    const double width = half_taps / std::max(1.0, ratio * 2.0) + half_taps;

    const std::size_t out_n = static_cast<std::size_t>(std::llround(w.samples.size() * ratio));
    Waveform out;
    out.sample_rate = target_rate;
    out.samples.resize(out_n, 0.0);

    for (std::size_t i = 0; i < out_n; ++i) {
        const double center = static_cast<double>(i) / ratio;
        const long lo = static_cast<long>(std::ceil(center - width));
        const long hi = static_cast<long>(std::floor(center + width));
        double acc = 0.0, norm = 0.0;
        for (long j = lo; j <= hi; ++j) {
            const double t = (static_cast<double>(j) - center);
            const double x = 2.0 * kPi * cutoff * t;
            const double sinc = (std::abs(x) < 1e-12) ? 1.0 : std::sin(x) / x;
            const double u = (t + width) / (2.0 * width);  // 0..1 across the kernel
            const double win = 0.42 - 0.5 * std::cos(2.0 * kPi * u) + 0.08 * std::cos(4.0 * kPi * u);
            const double k = sinc * win;
            norm += k;
            if (j >= 0 && j < static_cast<long>(w.samples.size())) acc += k * w.samples[j];
        }
        out.samples[i] = norm > 0.0 ? acc / norm : 0.0;
    }
    return out;
}

}  // namespace dysim
