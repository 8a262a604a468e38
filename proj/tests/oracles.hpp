// Independent reference computations used to freeze expected test values.
// Everything here is deliberately naive and kept separate from the library
// implementations it checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "dysim/wave.hpp"

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

// O(n^2) DFT.
inline std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t j = 0; j < n; ++j) {
            const double ang = -2.0 * kPi * static_cast<double>(k * j) / static_cast<double>(n);
            acc += x[j] * std::complex<double>{std::cos(ang), std::sin(ang)};
        }
        out[k] = acc;
    }
    return out;
}

// Exhaustive minimum spanning tree via Prufer-sequence enumeration of all
// labeled trees; returns (total weight, edge list) of the minimum tree.
struct MstResult {
    double weight = 0.0;
    std::vector<std::pair<int, int>> edges;
};

inline double edge_weight(const std::vector<std::vector<double>>& pts, int a, int b) {
    double acc = 0.0;
    for (std::size_t k = 0; k < pts[a].size(); ++k) {
        const double d = pts[a][k] - pts[b][k];
        acc += d * d;
    }
    return std::sqrt(acc);
}

inline std::vector<std::pair<int, int>> prufer_to_tree(const std::vector<int>& prufer, int n) {
    std::vector<int> degree(n, 1);
    for (int v : prufer) ++degree[v];
    std::vector<std::pair<int, int>> edges;
    std::vector<bool> used(n, false);
    for (int v : prufer) {
        for (int leaf = 0; leaf < n; ++leaf) {
            if (degree[leaf] == 1 && !used[leaf]) {
                edges.emplace_back(std::min(leaf, v), std::max(leaf, v));
                used[leaf] = true;
                --degree[v];
                break;
            }
        }
    }
    int a = -1, b = -1;
    for (int v = 0; v < n; ++v) {
        if (degree[v] == 1 && !used[v]) {
            if (a < 0)
                a = v;
            else
                b = v;
        }
    }
    edges.emplace_back(a, b);
    return edges;
}

inline MstResult brute_force_mst(const std::vector<std::vector<double>>& pts) {
    const int n = static_cast<int>(pts.size());
    MstResult best;
    if (n == 2) {
        best.weight = edge_weight(pts, 0, 1);
        best.edges = {{0, 1}};
        return best;
    }
    best.weight = std::numeric_limits<double>::infinity();
    std::vector<int> prufer(n - 2, 0);
    while (true) {
        auto edges = prufer_to_tree(prufer, n);
        double w = 0.0;
        for (auto [a, b] : edges) w += edge_weight(pts, a, b);
        if (w < best.weight) {
            best.weight = w;
            best.edges = edges;
        }
        int pos = n - 3;
        while (pos >= 0 && prufer[pos] == n - 1) {
            prufer[pos] = 0;
            --pos;
        }
        if (pos < 0) break;
        ++prufer[pos];
    }
    std::sort(best.edges.begin(), best.edges.end());
    return best;
}

// Central finite differences of a scalar function over a parameter vector.
inline std::vector<double> finite_diff(std::vector<double>& params,
                                       const std::function<double()>& eval, double h = 1e-5) {
    std::vector<double> grad(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + h;
        const double fp = eval();
        params[i] = keep - h;
        const double fm = eval();
        params[i] = keep;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

// ---- synthetic signals ---------------------------------------------------

inline dysim::Waveform sine(double freq, double dur, int sr = 16000, double amp = 0.5) {
    dysim::Waveform w;
    w.sample_rate = sr;
    const std::size_t n = static_cast<std::size_t>(dur * sr);
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) w.samples[i] = amp * std::sin(2.0 * kPi * freq * i / sr);
    return w;
}

inline dysim::Waveform sawtooth(double freq, double dur, int sr = 16000, double amp = 0.4) {
    dysim::Waveform w;
    w.sample_rate = sr;
    const std::size_t n = static_cast<std::size_t>(dur * sr);
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double phase = std::fmod(freq * i / sr, 1.0);
        w.samples[i] = amp * (2.0 * phase - 1.0);
    }
    return w;
}

inline dysim::Waveform pulse_train(double freq, double dur, int sr = 16000, double amp = 0.8) {
    dysim::Waveform w;
    w.sample_rate = sr;
    const std::size_t n = static_cast<std::size_t>(dur * sr);
    w.samples.assign(n, 0.0);
    const double period = sr / freq;
    for (double t = 0.0; t < static_cast<double>(n); t += period)
        w.samples[static_cast<std::size_t>(t)] = amp;
    return w;
}

inline dysim::Waveform white_noise(double dur, int sr = 16000, std::uint64_t seed = 1234,
                                   double amp = 0.3) {
    dysim::Waveform w;
    w.sample_rate = sr;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const std::size_t n = static_cast<std::size_t>(dur * sr);
    w.samples.resize(n);
    for (auto& s : w.samples) s = amp * uni(rng);
    return w;
}

// Vowel-like signal: impulse train through cascaded two-pole resonators.
inline dysim::Waveform vowel(double f0, const std::vector<double>& formants, double dur,
                             int sr = 16000, double amp = 0.25) {
    dysim::Waveform w;
    w.sample_rate = sr;
    const std::size_t n = static_cast<std::size_t>(dur * sr);
    std::vector<double> x(n, 0.0);
    const double period = sr / f0;
    for (double t = 0.0; t < static_cast<double>(n); t += period)
        x[static_cast<std::size_t>(t)] = 1.0;

    for (double fc : formants) {
        const double bw = 100.0;
        const double r = std::exp(-kPi * bw / sr);
        const double a1 = -2.0 * r * std::cos(2.0 * kPi * fc / sr);
        const double a2 = r * r;
        const double g = 1.0 + a1 + a2;
        double y1 = 0.0, y2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double y = g * x[i] - a1 * y1 - a2 * y2;
            y2 = y1;
            y1 = y;
            x[i] = y;
        }
    }
    double peak = 1e-12;
    for (double v : x) peak = std::max(peak, std::abs(v));
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) w.samples[i] = amp * x[i] / peak;
    return w;
}

inline double rms(const std::vector<double>& x) {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return std::sqrt(acc / std::max<std::size_t>(1, x.size()));
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = std::min(a.size(), b.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb + 1e-300);
}

}  // namespace oracle
