#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dysim/common.hpp"

namespace dysim {

struct Tensor {
    std::size_t channels = 0, rows = 0, cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::size_t c, std::size_t r, std::size_t w)
        : channels(c), rows(r), cols(w), data(c * r * w, 0.0) {}

    double& at(std::size_t c, std::size_t r, std::size_t w) {
        return data[(c * rows + r) * cols + w];
    }
    double at(std::size_t c, std::size_t r, std::size_t w) const {
        return data[(c * rows + r) * cols + w];
    }
    std::size_t size() const { return data.size(); }
};

enum class Activation : std::uint32_t { relu = 0, linear = 1 };

struct ConvLayerSpec {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t kernel = 5;  // 5x5 throughout
    std::size_t stride_r = 1;
    std::size_t stride_c = 1;
    Activation activation = Activation::relu;
};

struct ConvLayer {
    ConvLayerSpec spec;
    std::vector<double> weights;  // out x in x k x k
    std::vector<double> bias;     // out

    void init_shape() {
        weights.assign(spec.out_channels * spec.in_channels * spec.kernel * spec.kernel, 0.0);
        bias.assign(spec.out_channels, 0.0);
    }
};

inline std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

// Cached intermediates for one item's forward pass through a conv layer.
struct ConvCache {
    std::vector<double> col;     // (in*k*k) x (out_r*out_c)
    std::vector<double> preact;  // out x out_r x out_c, before activation
    std::size_t in_rows = 0, in_cols = 0, out_rows = 0, out_cols = 0;
};

namespace detail {

// SAME padding split as in common frameworks: total = (out-1)*stride + k - in,
// front gets floor(total/2).
inline long pad_front(std::size_t in, std::size_t out, std::size_t stride, std::size_t k) {
    const long total = static_cast<long>((out - 1) * stride + k) - static_cast<long>(in);
    return std::max(0L, total) / 2;
}

}  // namespace detail

inline void conv2d_forward(const ConvLayer& layer, const Tensor& in, Tensor& out, ConvCache& cache) {
    const auto& s = layer.spec;
    if (in.channels != s.in_channels) throw ShapeMismatch("conv input channel mismatch");
    const std::size_t out_r = ceil_div(in.rows, s.stride_r);
    const std::size_t out_c = ceil_div(in.cols, s.stride_c);
    const long pad_r = detail::pad_front(in.rows, out_r, s.stride_r, s.kernel);
    const long pad_c = detail::pad_front(in.cols, out_c, s.stride_c, s.kernel);
    const std::size_t patch = s.in_channels * s.kernel * s.kernel;
    const std::size_t npos = out_r * out_c;

    cache.col.assign(patch * npos, 0.0);
    cache.in_rows = in.rows;
    cache.in_cols = in.cols;
    cache.out_rows = out_r;
    cache.out_cols = out_c;

    // im2col
    for (std::size_t c = 0; c < s.in_channels; ++c) {
        for (std::size_t kr = 0; kr < s.kernel; ++kr) {
            for (std::size_t kc = 0; kc < s.kernel; ++kc) {
                const std::size_t row = (c * s.kernel + kr) * s.kernel + kc;
                double* dst = &cache.col[row * npos];
                for (std::size_t orow = 0; orow < out_r; ++orow) {
                    const long ir = static_cast<long>(orow * s.stride_r) - pad_r + static_cast<long>(kr);
                    if (ir < 0 || ir >= static_cast<long>(in.rows)) {
                        dst += out_c;
                        continue;
                    }
                    const double* src = &in.data[(c * in.rows + ir) * in.cols];
                    for (std::size_t ocol = 0; ocol < out_c; ++ocol) {
                        const long ic = static_cast<long>(ocol * s.stride_c) - pad_c + static_cast<long>(kc);
                        *dst++ = (ic >= 0 && ic < static_cast<long>(in.cols)) ? src[ic] : 0.0;
                    }
                }
            }
        }
    }

    out = Tensor(s.out_channels, out_r, out_c);
    cache.preact.assign(s.out_channels * npos, 0.0);
    for (std::size_t o = 0; o < s.out_channels; ++o) {
        double* acc = &cache.preact[o * npos];
        const double b = layer.bias[o];
        for (std::size_t p = 0; p < npos; ++p) acc[p] = b;
        const double* wrow = &layer.weights[o * patch];
        for (std::size_t k = 0; k < patch; ++k) {
            const double wv = wrow[k];
            if (wv == 0.0) continue;
            const double* col = &cache.col[k * npos];
            for (std::size_t p = 0; p < npos; ++p) acc[p] += wv * col[p];
        }
    }
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const double v = cache.preact[i];
        out.data[i] = (s.activation == Activation::relu && v < 0.0) ? 0.0 : v;
    }
}

// Backward through activation + conv. Returns input gradient; accumulates
// weight/bias gradients into w_grad/b_grad when accumulate_wgrad is set.
inline Tensor conv2d_backward(const ConvLayer& layer, const ConvCache& cache, const Tensor& d_out,
                              std::vector<double>* w_grad, std::vector<double>* b_grad,
                              bool accumulate_wgrad) {
    const auto& s = layer.spec;
    const std::size_t npos = cache.out_rows * cache.out_cols;
    const std::size_t patch = s.in_channels * s.kernel * s.kernel;
    if (d_out.data.size() != s.out_channels * npos) throw ShapeMismatch("conv grad shape mismatch");

    // activation gradient
    std::vector<double> dz(d_out.data);
    if (s.activation == Activation::relu)
        for (std::size_t i = 0; i < dz.size(); ++i)
            if (cache.preact[i] <= 0.0) dz[i] = 0.0;

    if (accumulate_wgrad) {
        for (std::size_t o = 0; o < s.out_channels; ++o) {
            const double* dzo = &dz[o * npos];
            double acc = 0.0;
            for (std::size_t p = 0; p < npos; ++p) acc += dzo[p];
            (*b_grad)[o] += acc;
            double* wg = &(*w_grad)[o * patch];
            for (std::size_t k = 0; k < patch; ++k) {
                const double* col = &cache.col[k * npos];
                double s2 = 0.0;
                for (std::size_t p = 0; p < npos; ++p) s2 += dzo[p] * col[p];
                wg[k] += s2;
            }
        }
    }

    // d_col = W^T * dz
    std::vector<double> d_col(patch * npos, 0.0);
    for (std::size_t o = 0; o < s.out_channels; ++o) {
        const double* dzo = &dz[o * npos];
        const double* wrow = &layer.weights[o * patch];
        for (std::size_t k = 0; k < patch; ++k) {
            const double wv = wrow[k];
            if (wv == 0.0) continue;
            double* dcol = &d_col[k * npos];
            for (std::size_t p = 0; p < npos; ++p) dcol[p] += wv * dzo[p];
        }
    }

    // col2im
    Tensor d_in(s.in_channels, cache.in_rows, cache.in_cols);
    const long pad_r = detail::pad_front(cache.in_rows, cache.out_rows, s.stride_r, s.kernel);
    const long pad_c = detail::pad_front(cache.in_cols, cache.out_cols, s.stride_c, s.kernel);
    for (std::size_t c = 0; c < s.in_channels; ++c) {
        for (std::size_t kr = 0; kr < s.kernel; ++kr) {
            for (std::size_t kc = 0; kc < s.kernel; ++kc) {
                const std::size_t row = (c * s.kernel + kr) * s.kernel + kc;
                const double* src = &d_col[row * npos];
                for (std::size_t orow = 0; orow < cache.out_rows; ++orow) {
                    const long ir = static_cast<long>(orow * s.stride_r) - pad_r + static_cast<long>(kr);
                    if (ir < 0 || ir >= static_cast<long>(cache.in_rows)) continue;
                    double* dst = &d_in.data[(c * cache.in_rows + ir) * cache.in_cols];
                    const double* srow = src + orow * cache.out_cols;
                    for (std::size_t ocol = 0; ocol < cache.out_cols; ++ocol) {
                        const long ic =
                            static_cast<long>(ocol * s.stride_c) - pad_c + static_cast<long>(kc);
                        if (ic >= 0 && ic < static_cast<long>(cache.in_cols)) dst[ic] += srow[ocol];
                    }
                }
            }
        }
    }
    return d_in;
}

// Average pooling over the time axis restricted to valid columns.
inline std::vector<double> masked_time_pool(const Tensor& in, std::size_t valid_cols) {
    if (valid_cols == 0 || valid_cols > in.cols) throw ShapeMismatch("invalid pooling mask");
    std::vector<double> out(in.channels * in.rows, 0.0);
    for (std::size_t c = 0; c < in.channels; ++c)
        for (std::size_t r = 0; r < in.rows; ++r) {
            double acc = 0.0;
            for (std::size_t w = 0; w < valid_cols; ++w) acc += in.at(c, r, w);
            out[c * in.rows + r] = acc / static_cast<double>(valid_cols);
        }
    return out;
}

inline Tensor masked_time_pool_backward(const std::vector<double>& d_pool, const Tensor& like,
                                        std::size_t valid_cols) {
    Tensor d_in(like.channels, like.rows, like.cols);
    for (std::size_t c = 0; c < like.channels; ++c)
        for (std::size_t r = 0; r < like.rows; ++r) {
            const double g = d_pool[c * like.rows + r] / static_cast<double>(valid_cols);
            for (std::size_t w = 0; w < valid_cols; ++w) d_in.at(c, r, w) = g;
        }
    return d_in;
}

// ---- optimizer -------------------------------------------------------------

struct AdamHyper {
    double lr = 0.00006;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamMoments {
    std::vector<double> m, v;
    std::uint64_t step = 0;
};

// One bias-corrected Adam step over a parameter block.
inline void adam_step(std::vector<double>& params, const std::vector<double>& grads,
                      AdamMoments& state, const AdamHyper& hyper) {
    if (params.size() != grads.size()) throw ShapeMismatch("adam parameter/gradient mismatch");
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
        state.step = 0;
    }
    ++state.step;
    const double b1t = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
    const double b2t = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * grads[i];
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / b1t;
        const double vhat = state.v[i] / b2t;
        params[i] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
    }
}

// ---- losses ------------------------------------------------------------------

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

// binary cross-entropy on a logit; label y in {0,1}
inline double bce_from_logit(double z, double y) { return softplus(z) - y * z; }
inline double bce_grad_logit(double z, double y) { return 1.0 / (1.0 + std::exp(-z)) - y; }

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace dysim
