#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "dysim/features.hpp"
#include "dysim/tensor.hpp"

namespace dysim {

struct GanHyper {
    AdamHyper adam;          // lr 0.00006
    std::size_t batch = 32;
    std::size_t epochs = 25;
    double l1_weight = 0.0;  // optional reconstruction term, off by default
};

struct EpochLoss {
    std::size_t epoch = 0;
    double d_loss = 0.0;
    double g_loss = 0.0;
};

struct PaddedBatch {
    std::vector<Tensor> items;              // each 1 x D x T_max, zero beyond true length
    std::vector<std::size_t> true_lengths;  // per item

    std::size_t max_len() const {
        std::size_t m = 0;
        for (std::size_t t : true_lengths) m = std::max(m, t);
        return m;
    }
};

struct DcganModel {
    FeatureKind kind = FeatureKind::mcep;
    std::size_t feature_dim = kMcepDim;
    std::vector<ConvLayer> g_layers;  // 1->8, 8->8, 8->1, stride 1, last linear
    std::vector<ConvLayer> d_layers;  // 1->8->16->32->64, stride 2
    std::vector<double> d_fc_w;       // 64 * ceil(D/16)
    double d_fc_b = 0.0;
    std::vector<double> norm_mean, norm_std;  // per feature dimension
    GanHyper hyper;
    std::uint64_t seed = 0;

    std::size_t pooled_dim() const { return 64 * ceil_div(ceil_div(ceil_div(ceil_div(feature_dim, 2), 2), 2), 2); }
};

namespace detail {

inline double gauss_from(std::mt19937_64& rng) {
    const double u1 = (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    const double u2 = (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

inline void init_conv(ConvLayer& layer, std::mt19937_64& rng, double std_dev = 0.02) {
    layer.init_shape();
    for (auto& w : layer.weights) w = std_dev * gauss_from(rng);
    // biases start at zero
}

}  // namespace detail

inline DcganModel make_dcgan(FeatureKind kind, const GanHyper& hyper, std::uint64_t seed,
                             std::size_t feature_dim = 0) {
    DcganModel m;
    m.kind = kind;
    m.feature_dim = feature_dim ? feature_dim : FeatureSequence::expected_dim(kind);
    m.hyper = hyper;
    m.seed = seed;
    std::mt19937_64 rng(mix_seed(seed, 0xD9A1));

    auto conv = [&](std::size_t in, std::size_t out, std::size_t stride, Activation act) {
        ConvLayer layer;
        layer.spec = {in, out, 5, stride, stride, act};
        detail::init_conv(layer, rng);
        return layer;
    };
    m.g_layers = {conv(1, 8, 1, Activation::relu), conv(8, 8, 1, Activation::relu),
                  conv(8, 1, 1, Activation::linear)};
    m.d_layers = {conv(1, 8, 2, Activation::relu), conv(8, 16, 2, Activation::relu),
                  conv(16, 32, 2, Activation::relu), conv(32, 64, 2, Activation::relu)};
    m.d_fc_w.resize(m.pooled_dim());
    for (auto& w : m.d_fc_w) w = 0.02 * detail::gauss_from(rng);
    m.d_fc_b = 0.0;
    m.norm_mean.assign(m.feature_dim, 0.0);
    m.norm_std.assign(m.feature_dim, 1.0);
    return m;
}

// ---- forward passes ---------------------------------------------------------

struct GeneratorTrace {
    std::vector<ConvCache> caches;  // one per layer
    std::vector<Tensor> inputs;     // layer inputs (inputs[0] = item)
    Tensor output;
};

inline Tensor generator_forward_item(const DcganModel& m, const Tensor& item,
                                     std::size_t true_len, GeneratorTrace* trace) {
    if (item.channels != 1 || item.rows != m.feature_dim) throw ShapeMismatch("generator input shape");
    Tensor x = item;
    GeneratorTrace local;
    GeneratorTrace& tr = trace ? *trace : local;
    tr.caches.resize(m.g_layers.size());
    tr.inputs.clear();
    for (std::size_t i = 0; i < m.g_layers.size(); ++i) {
        tr.inputs.push_back(x);
        Tensor y;
        conv2d_forward(m.g_layers[i], x, y, tr.caches[i]);
        x = std::move(y);
    }
    // re-zero the padded region
    for (std::size_t r = 0; r < x.rows; ++r)
        for (std::size_t w = true_len; w < x.cols; ++w) x.at(0, r, w) = 0.0;
    if (trace) trace->output = x;
    return x;
}

inline PaddedBatch generator_forward(const DcganModel& m, const PaddedBatch& batch) {
    PaddedBatch out;
    out.true_lengths = batch.true_lengths;
    out.items.reserve(batch.items.size());
    for (std::size_t i = 0; i < batch.items.size(); ++i)
        out.items.push_back(generator_forward_item(m, batch.items[i], batch.true_lengths[i], nullptr));
    return out;
}

struct DiscriminatorTrace {
    std::vector<ConvCache> caches;
    std::vector<Tensor> inputs;
    Tensor last;                 // final conv output
    std::vector<double> pooled;  // masked time average, flattened
    std::size_t valid4 = 0;
    double logit = 0.0;
};

inline std::size_t valid_after_strides(std::size_t len, std::size_t n_layers) {
    for (std::size_t i = 0; i < n_layers; ++i) len = ceil_div(len, 2);
    return std::max<std::size_t>(len, 1);
}

inline double discriminator_logit_item(const DcganModel& m, const Tensor& item,
                                       std::size_t true_len, DiscriminatorTrace* trace) {
    if (item.channels != 1 || item.rows != m.feature_dim)
        throw ShapeMismatch("discriminator input shape");
    DiscriminatorTrace local;
    DiscriminatorTrace& tr = trace ? *trace : local;
    tr.caches.resize(m.d_layers.size());
    tr.inputs.clear();
    Tensor x = item;
    for (std::size_t i = 0; i < m.d_layers.size(); ++i) {
        tr.inputs.push_back(x);
        Tensor y;
        conv2d_forward(m.d_layers[i], x, y, tr.caches[i]);
        x = std::move(y);
    }
    tr.valid4 = valid_after_strides(true_len, m.d_layers.size());
    tr.valid4 = std::min(tr.valid4, x.cols);
    tr.pooled = masked_time_pool(x, tr.valid4);
    if (tr.pooled.size() != m.d_fc_w.size()) throw ShapeMismatch("discriminator fc size");
    double z = m.d_fc_b;
    for (std::size_t i = 0; i < tr.pooled.size(); ++i) z += m.d_fc_w[i] * tr.pooled[i];
    tr.last = std::move(x);
    tr.logit = z;
    return z;
}

inline std::vector<double> discriminator_forward(const DcganModel& m, const PaddedBatch& batch) {
    std::vector<double> probs;
    probs.reserve(batch.items.size());
    for (std::size_t i = 0; i < batch.items.size(); ++i)
        probs.push_back(sigmoid(discriminator_logit_item(m, batch.items[i], batch.true_lengths[i], nullptr)));
    return probs;
}

// ---- gradients ----------------------------------------------------------------

struct ConvGrads {
    std::vector<std::vector<double>> w;  // per layer
    std::vector<std::vector<double>> b;

    void init_like(const std::vector<ConvLayer>& layers) {
        w.resize(layers.size());
        b.resize(layers.size());
        for (std::size_t i = 0; i < layers.size(); ++i) {
            w[i].assign(layers[i].weights.size(), 0.0);
            b[i].assign(layers[i].bias.size(), 0.0);
        }
    }
    void scale(double s) {
        for (auto& v : w)
            for (auto& x : v) x *= s;
        for (auto& v : b)
            for (auto& x : v) x *= s;
    }
};

struct DiscGrads {
    ConvGrads conv;
    std::vector<double> fc_w;
    double fc_b = 0.0;

    void init_like(const DcganModel& m) {
        conv.init_like(m.d_layers);
        fc_w.assign(m.d_fc_w.size(), 0.0);
        fc_b = 0.0;
    }
    void scale(double s) {
        conv.scale(s);
        for (auto& x : fc_w) x *= s;
        fc_b *= s;
    }
};

// Backward from dL/dlogit through fc + pooling + conv stack. Accumulates
// discriminator gradients when grads is non-null; returns dL/d(input item).
inline Tensor discriminator_backward_item(const DcganModel& m, const DiscriminatorTrace& tr,
                                          double d_logit, DiscGrads* grads) {
    std::vector<double> d_pool(m.d_fc_w.size());
    for (std::size_t i = 0; i < d_pool.size(); ++i) d_pool[i] = d_logit * m.d_fc_w[i];
    if (grads) {
        for (std::size_t i = 0; i < d_pool.size(); ++i) grads->fc_w[i] += d_logit * tr.pooled[i];
        grads->fc_b += d_logit;
    }
    Tensor d = masked_time_pool_backward(d_pool, tr.last, tr.valid4);
    for (std::size_t i = m.d_layers.size(); i-- > 0;) {
        d = conv2d_backward(m.d_layers[i], tr.caches[i], d,
                            grads ? &grads->conv.w[i] : nullptr,
                            grads ? &grads->conv.b[i] : nullptr, grads != nullptr);
    }
    return d;
}

// Backward through the generator given dL/d(generator output).
inline void generator_backward_item(const DcganModel& m, const GeneratorTrace& tr,
                                    const Tensor& d_out_masked, ConvGrads& grads) {
    Tensor d = d_out_masked;
    for (std::size_t i = m.g_layers.size(); i-- > 0;) {
        d = conv2d_backward(m.g_layers[i], tr.caches[i], d, &grads.w[i], &grads.b[i], true);
    }
}

// ---- training -------------------------------------------------------------------

namespace detail {

inline Tensor to_padded_tensor(const FeatureSequence& f, const std::vector<double>& mean,
                               const std::vector<double>& stdev, std::size_t t_max) {
    Tensor t(1, f.dim, t_max);
    for (std::size_t d = 0; d < f.dim; ++d)
        for (std::size_t x = 0; x < f.frames; ++x)
            t.at(0, d, x) = (f.at(d, x) - mean[d]) / stdev[d];
    return t;
}

}  // namespace detail

struct AdamStateSet {
    std::vector<AdamMoments> conv_w, conv_b;
    AdamMoments fc_w, fc_b;
};

// Alternating non-saturating GAN training on paired feature sequences.
// Deterministic for a fixed (data, hyper, seed).
inline DcganModel train_gan(const std::vector<std::pair<FeatureSequence, FeatureSequence>>& pairs,
                            const GanHyper& hyper, std::uint64_t seed,
                            std::vector<EpochLoss>* loss_log = nullptr) {
    if (pairs.empty()) throw EmptyTrainingSet("no training pairs");
    const FeatureKind kind = pairs.front().first.kind;
    const std::size_t dim = pairs.front().first.dim;
    for (const auto& [src, dst] : pairs) {
        if (src.kind != kind || dst.kind != kind) throw KindMismatch("mixed feature kinds");
        if (src.dim != dim || dst.dim != dim) throw ShapeMismatch("mixed feature dimensions");
        if (src.data.size() != src.dim * src.frames || dst.data.size() != dst.dim * dst.frames)
            throw InvariantViolation("feature buffer size mismatch");
        for (double v : src.data)
            if (!std::isfinite(v)) throw InvariantViolation("non-finite feature value");
        for (double v : dst.data)
            if (!std::isfinite(v)) throw InvariantViolation("non-finite feature value");
    }

    DcganModel m = make_dcgan(kind, hyper, seed, dim);

    // z-normalization statistics over all frames of both sides
    std::vector<double> acc(m.feature_dim, 0.0), acc2(m.feature_dim, 0.0);
    double count = 0.0;
    for (const auto& [src, dst] : pairs) {
        for (const FeatureSequence* f : {&src, &dst}) {
            for (std::size_t d = 0; d < f->dim; ++d)
                for (std::size_t t = 0; t < f->frames; ++t) {
                    acc[d] += f->at(d, t);
                    acc2[d] += f->at(d, t) * f->at(d, t);
                }
        }
        count += static_cast<double>(src.frames + dst.frames);
    }
    for (std::size_t d = 0; d < m.feature_dim; ++d) {
        m.norm_mean[d] = acc[d] / count;
        const double var = acc2[d] / count - m.norm_mean[d] * m.norm_mean[d];
        m.norm_std[d] = std::sqrt(std::max(var, 1e-12));
    }

    AdamStateSet g_state, d_state;
    g_state.conv_w.resize(m.g_layers.size());
    g_state.conv_b.resize(m.g_layers.size());
    d_state.conv_w.resize(m.d_layers.size());
    d_state.conv_b.resize(m.d_layers.size());

    std::mt19937_64 shuffle_rng(mix_seed(seed, 0x5u));
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double d_loss_sum = 0.0, g_loss_sum = 0.0;
        std::size_t n_batches = 0;

        for (std::size_t begin = 0; begin < order.size(); begin += hyper.batch) {
            const std::size_t end = std::min(order.size(), begin + hyper.batch);
            const std::size_t bsz = end - begin;

            std::size_t t_max = 0;
            for (std::size_t i = begin; i < end; ++i) {
                t_max = std::max(t_max, pairs[order[i]].first.frames);
                t_max = std::max(t_max, pairs[order[i]].second.frames);
            }

            PaddedBatch src, dst;
            for (std::size_t i = begin; i < end; ++i) {
                const auto& [s, t] = pairs[order[i]];
                src.items.push_back(detail::to_padded_tensor(s, m.norm_mean, m.norm_std, t_max));
                src.true_lengths.push_back(s.frames);
                dst.items.push_back(detail::to_padded_tensor(t, m.norm_mean, m.norm_std, t_max));
                dst.true_lengths.push_back(t.frames);
            }

            // ---- discriminator step: real up, generated down ----
            DiscGrads d_grads;
            d_grads.init_like(m);
            double d_loss = 0.0;
            for (std::size_t i = 0; i < bsz; ++i) {
                DiscriminatorTrace tr;
                const double z_real =
                    discriminator_logit_item(m, dst.items[i], dst.true_lengths[i], &tr);
                d_loss += bce_from_logit(z_real, 1.0);
                discriminator_backward_item(m, tr, bce_grad_logit(z_real, 1.0), &d_grads);

                const Tensor fake =
                    generator_forward_item(m, src.items[i], src.true_lengths[i], nullptr);
                DiscriminatorTrace trf;
                const double z_fake = discriminator_logit_item(m, fake, src.true_lengths[i], &trf);
                d_loss += bce_from_logit(z_fake, 0.0);
                discriminator_backward_item(m, trf, bce_grad_logit(z_fake, 0.0), &d_grads);
            }
            d_loss /= static_cast<double>(2 * bsz);
            d_grads.scale(1.0 / static_cast<double>(2 * bsz));
            for (std::size_t l = 0; l < m.d_layers.size(); ++l) {
                adam_step(m.d_layers[l].weights, d_grads.conv.w[l], d_state.conv_w[l], hyper.adam);
                adam_step(m.d_layers[l].bias, d_grads.conv.b[l], d_state.conv_b[l], hyper.adam);
            }
            adam_step(m.d_fc_w, d_grads.fc_w, d_state.fc_w, hyper.adam);
            {
                std::vector<double> b{m.d_fc_b}, g{d_grads.fc_b};
                adam_step(b, g, d_state.fc_b, hyper.adam);
                m.d_fc_b = b[0];
            }

            // ---- generator step: non-saturating objective ----
            ConvGrads g_grads;
            g_grads.init_like(m.g_layers);
            double g_loss = 0.0;
            for (std::size_t i = 0; i < bsz; ++i) {
                GeneratorTrace gt;
                const Tensor fake =
                    generator_forward_item(m, src.items[i], src.true_lengths[i], &gt);
                DiscriminatorTrace trf;
                const double z = discriminator_logit_item(m, fake, src.true_lengths[i], &trf);
                g_loss += bce_from_logit(z, 1.0);
                Tensor d_fake =
                    discriminator_backward_item(m, trf, bce_grad_logit(z, 1.0), nullptr);
                if (hyper.l1_weight > 0.0) {
                    const std::size_t frames = src.true_lengths[i];
                    const double scale =
                        hyper.l1_weight / static_cast<double>(m.feature_dim * frames);
                    double l1 = 0.0;
                    for (std::size_t d = 0; d < m.feature_dim; ++d)
                        for (std::size_t x = 0; x < frames; ++x) {
                            const double diff = fake.at(0, d, x) - dst.items[i].at(0, d, x);
                            l1 += std::abs(diff);
                            d_fake.at(0, d, x) += scale * (diff > 0.0 ? 1.0 : diff < 0.0 ? -1.0 : 0.0);
                        }
                    g_loss += hyper.l1_weight * l1 / static_cast<double>(m.feature_dim * frames);
                }
                // padded region does not contribute
                for (std::size_t d = 0; d < d_fake.rows; ++d)
                    for (std::size_t x = src.true_lengths[i]; x < d_fake.cols; ++x)
                        d_fake.at(0, d, x) = 0.0;
                generator_backward_item(m, gt, d_fake, g_grads);
            }
            g_loss /= static_cast<double>(bsz);
            g_grads.scale(1.0 / static_cast<double>(bsz));
            for (std::size_t l = 0; l < m.g_layers.size(); ++l) {
                adam_step(m.g_layers[l].weights, g_grads.w[l], g_state.conv_w[l], hyper.adam);
                adam_step(m.g_layers[l].bias, g_grads.b[l], g_state.conv_b[l], hyper.adam);
            }

            d_loss_sum += d_loss;
            g_loss_sum += g_loss;
            ++n_batches;
        }
        if (loss_log)
            loss_log->push_back({epoch, d_loss_sum / n_batches, g_loss_sum / n_batches});
    }
    return m;
}

// Single-sequence application of a trained generator.
inline FeatureSequence transform_features(const DcganModel& m, const FeatureSequence& f) {
    if (f.kind != m.kind) throw KindMismatch("feature kind does not match the model");
    if (f.dim != m.feature_dim) throw ShapeMismatch("feature dimension does not match the model");
    if (f.data.size() != f.dim * f.frames) throw InvariantViolation("feature buffer size mismatch");
    Tensor item = detail::to_padded_tensor(f, m.norm_mean, m.norm_std, f.frames);
    const Tensor out = generator_forward_item(m, item, f.frames, nullptr);
    FeatureSequence result = f;
    for (std::size_t d = 0; d < f.dim; ++d)
        for (std::size_t t = 0; t < f.frames; ++t)
            result.at(d, t) = out.at(0, d, t) * m.norm_std[d] + m.norm_mean[d];
    return result;
}

// ---- DGAN container -----------------------------------------------------------

inline void save_dcgan(const DcganModel& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path);
    os.write("DGAN", 4);
    write_u32(os, 1);
    write_u32(os, static_cast<std::uint32_t>(m.kind));
    write_u32(os, static_cast<std::uint32_t>(m.feature_dim));
    auto write_layers = [&](const std::vector<ConvLayer>& layers) {
        write_u32(os, static_cast<std::uint32_t>(layers.size()));
        for (const auto& layer : layers) {
            write_u32(os, static_cast<std::uint32_t>(layer.spec.in_channels));
            write_u32(os, static_cast<std::uint32_t>(layer.spec.out_channels));
            write_u32(os, static_cast<std::uint32_t>(layer.spec.stride_r));
            write_u32(os, static_cast<std::uint32_t>(layer.spec.stride_c));
            write_u32(os, static_cast<std::uint32_t>(layer.spec.activation));
            for (double v : layer.weights) write_f64(os, v);
            for (double v : layer.bias) write_f64(os, v);
        }
    };
    write_layers(m.g_layers);
    write_layers(m.d_layers);
    write_u32(os, static_cast<std::uint32_t>(m.d_fc_w.size()));
    for (double v : m.d_fc_w) write_f64(os, v);
    write_f64(os, m.d_fc_b);
    for (double v : m.norm_mean) write_f64(os, v);
    for (double v : m.norm_std) write_f64(os, v);
    write_f64(os, m.hyper.adam.lr);
    write_f64(os, m.hyper.adam.beta1);
    write_f64(os, m.hyper.adam.beta2);
    write_f64(os, m.hyper.adam.eps);
    write_u32(os, static_cast<std::uint32_t>(m.hyper.batch));
    write_u32(os, static_cast<std::uint32_t>(m.hyper.epochs));
    write_f64(os, m.hyper.l1_weight);
    write_u64(os, m.seed);
    if (!os) throw IoError("write failed: " + path);
}

inline DcganModel load_dcgan(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ArtifactMissing("missing model file: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "DGAN") throw CorruptHeader("not a DGAN file: " + path);
    if (read_u32(is) != 1) throw UnsupportedFormat("unknown DGAN version");
    DcganModel m;
    m.kind = static_cast<FeatureKind>(read_u32(is));
    m.feature_dim = read_u32(is);
    auto read_layers = [&]() {
        std::vector<ConvLayer> layers(read_u32(is));
        for (auto& layer : layers) {
            layer.spec.in_channels = read_u32(is);
            layer.spec.out_channels = read_u32(is);
            layer.spec.kernel = 5;
            layer.spec.stride_r = read_u32(is);
            layer.spec.stride_c = read_u32(is);
            layer.spec.activation = static_cast<Activation>(read_u32(is));
            layer.init_shape();
            for (auto& v : layer.weights) v = read_f64(is);
            for (auto& v : layer.bias) v = read_f64(is);
        }
        return layers;
    };
    m.g_layers = read_layers();
    m.d_layers = read_layers();
    m.d_fc_w.resize(read_u32(is));
    for (auto& v : m.d_fc_w) v = read_f64(is);
    m.d_fc_b = read_f64(is);
    m.norm_mean.resize(m.feature_dim);
    m.norm_std.resize(m.feature_dim);
    for (auto& v : m.norm_mean) v = read_f64(is);
    for (auto& v : m.norm_std) v = read_f64(is);
    m.hyper.adam.lr = read_f64(is);
    m.hyper.adam.beta1 = read_f64(is);
    m.hyper.adam.beta2 = read_f64(is);
    m.hyper.adam.eps = read_f64(is);
    m.hyper.batch = read_u32(is);
    m.hyper.epochs = read_u32(is);
    m.hyper.l1_weight = read_f64(is);
    m.seed = read_u64(is);
    return m;
}

}  // namespace dysim
