#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "dysim/common.hpp"

namespace dysim {

// Iterative radix-2 FFT with cached twiddle tables. Sizes must be powers
// of two; everything in the pipeline sticks to that.
class Fft {
public:
    explicit Fft(std::size_t n) : n_(n) {
        if (n == 0 || (n & (n - 1)) != 0) throw InvariantViolation("fft size must be a power of two");
        twiddle_.resize(n / 2);
        for (std::size_t k = 0; k < n / 2; ++k) {
            double ang = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
            twiddle_[k] = {std::cos(ang), std::sin(ang)};
        }
        rev_.resize(n);
        std::size_t bits = 0;
        while ((1u << bits) < n) ++bits;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < bits; ++b)
                if (i & (1u << b)) r |= 1u << (bits - 1 - b);
            rev_[i] = r;
        }
    }

    std::size_t size() const { return n_; }

    void forward(std::vector<std::complex<double>>& x) const { run(x, false); }
    void inverse(std::vector<std::complex<double>>& x) const {
        run(x, true);
        const double s = 1.0 / static_cast<double>(n_);
        for (auto& v : x) v *= s;
    }

    static const Fft& plan(std::size_t n) {
        static std::mutex mu;
        static std::unordered_map<std::size_t, std::unique_ptr<Fft>> cache;
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(n);
        if (it == cache.end()) it = cache.emplace(n, std::make_unique<Fft>(n)).first;
        return *it->second;
    }

private:
    void run(std::vector<std::complex<double>>& x, bool inv) const {
        if (x.size() != n_) throw ShapeMismatch("fft buffer size mismatch");
        for (std::size_t i = 0; i < n_; ++i)
            if (rev_[i] > i) std::swap(x[i], x[rev_[i]]);
        for (std::size_t len = 2; len <= n_; len <<= 1) {
            const std::size_t step = n_ / len;
            for (std::size_t start = 0; start < n_; start += len) {
                for (std::size_t k = 0; k < len / 2; ++k) {
                    std::complex<double> w = twiddle_[k * step];
                    if (inv) w = std::conj(w);
                    std::complex<double> a = x[start + k];
                    std::complex<double> b = x[start + k + len / 2] * w;
                    x[start + k] = a + b;
                    x[start + k + len / 2] = a - b;
                }
            }
        }
    }

    std::size_t n_;
    std::vector<std::complex<double>> twiddle_;
    std::vector<std::size_t> rev_;
};

// Forward FFT of a real signal; returns the n/2+1 nonnegative-frequency bins.
inline std::vector<std::complex<double>> rfft(const std::vector<double>& x, std::size_t n) {
    const Fft& f = Fft::plan(n);
    std::vector<std::complex<double>> buf(n, {0.0, 0.0});
    const std::size_t m = std::min(x.size(), n);
    for (std::size_t i = 0; i < m; ++i) buf[i] = {x[i], 0.0};
    f.forward(buf);
    buf.resize(n / 2 + 1);
    return buf;
}

// Inverse of rfft: expands hermitian half-spectrum and returns n real samples.
inline std::vector<double> irfft(const std::vector<std::complex<double>>& half, std::size_t n) {
    if (half.size() != n / 2 + 1) throw ShapeMismatch("half spectrum size mismatch");
    const Fft& f = Fft::plan(n);
    std::vector<std::complex<double>> buf(n);
    for (std::size_t k = 0; k <= n / 2; ++k) buf[k] = half[k];
    for (std::size_t k = n / 2 + 1; k < n; ++k) buf[k] = std::conj(half[n - k]);
    f.inverse(buf);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = buf[i].real();
    return out;
}

}  // namespace dysim
