#include "fatq/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fatq::trainer {

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::FullPrecision: return "fp";
        case Mode::Ste: return "ste";
        case Mode::Fat: return "fat";
    }
    return "?";
}

Mode mode_from_name(const std::string& name) {
    if (name == "fp") return Mode::FullPrecision;
    if (name == "ste") return Mode::Ste;
    if (name == "fat") return Mode::Fat;
    throw std::invalid_argument("unknown mode: " + name + " (expected fp|ste|fat)");
}

namespace {

QuantConfig weight_quant_config(const ModelConfig& cfg, const QatLayer& layer) {
    QuantConfig q;
    q.bitwidth = cfg.m_w;
    q.scheme = cfg.scheme;
    q.is_signed = true;
    q.alpha = layer.alpha_w;
    return q;
}

QuantConfig act_quant_config(const ModelConfig& cfg, const QatLayer& layer) {
    QuantConfig q;
    q.bitwidth = cfg.m_a;
    q.scheme = cfg.scheme;
    q.is_signed = false;
    q.alpha = layer.alpha_a;
    return q;
}

std::vector<double> quantize_or_clip(const std::vector<double>& x, const QuantConfig& q,
                                     bool surrogate) {
    if (!surrogate) return quantizers::quantize(x, q);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = quantizers::clip_surrogate(x[i], q);
    return out;
}

void conv_output_dims(const QatLayer& layer, const Volume& in, std::size_t& oh,
                      std::size_t& ow) {
    const std::size_t kh = layer.weights.kh, kw = layer.weights.kw;
    if (in.c != layer.weights.c_in) {
        throw std::invalid_argument("conv: input channels " + std::to_string(in.c) +
                                    " do not match weights c_in " +
                                    std::to_string(layer.weights.c_in));
    }
    if (in.h + 2 * layer.pad < kh || in.w + 2 * layer.pad < kw) {
        throw std::invalid_argument("conv: input smaller than kernel");
    }
    oh = (in.h + 2 * layer.pad - kh) / layer.stride + 1;
    ow = (in.w + 2 * layer.pad - kw) / layer.stride + 1;
}

Volume conv_forward_one(const QatLayer& layer, const RealMatrix& w, const Volume& in) {
    std::size_t oh, ow;
    conv_output_dims(layer, in, oh, ow);
    const std::size_t kh = layer.weights.kh, kw = layer.weights.kw;
    const std::size_t c_in = layer.weights.c_in;
    Volume out(layer.c_out(), oh, ow);
    for (std::size_t oc = 0; oc < layer.c_out(); ++oc) {
        const double* wrow = w.data.data() + oc * w.cols;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double acc = 0.0;
                for (std::size_t ic = 0; ic < c_in; ++ic) {
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * layer.stride + ky) -
                                                  static_cast<std::ptrdiff_t>(layer.pad);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.h)) continue;
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox * layer.stride + kx) -
                                static_cast<std::ptrdiff_t>(layer.pad);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.w)) continue;
                            acc += wrow[(ic * kh + ky) * kw + kx] *
                                   in.at(ic, static_cast<std::size_t>(iy),
                                         static_cast<std::size_t>(ix));
                        }
                    }
                }
                out.at(oc, oy, ox) = acc;
            }
        }
    }
    return out;
}

Volume fc_forward_one(const QatLayer& layer, const RealMatrix& w, const Volume& in) {
    if (in.data.size() != layer.n()) {
        throw std::invalid_argument("fc: input size " + std::to_string(in.data.size()) +
                                    " does not match weights n " + std::to_string(layer.n()));
    }
    Volume out(layer.c_out(), 1, 1);
    for (std::size_t o = 0; o < layer.c_out(); ++o) {
        double acc = 0.0;
        for (std::size_t i = 0; i < layer.n(); ++i) acc += w(o, i) * in.data[i];
        out.data[o] = acc;
    }
    return out;
}

// dL/dW for a conv layer, accumulated over the batch.
void conv_weight_grad(const QatLayer& layer, const Batch& input_q, const Batch& upstream,
                      RealMatrix& grad) {
    const std::size_t kh = layer.weights.kh, kw = layer.weights.kw;
    const std::size_t c_in = layer.weights.c_in;
    for (std::size_t b = 0; b < input_q.size(); ++b) {
        const Volume& in = input_q[b];
        const Volume& up = upstream[b];
        for (std::size_t oc = 0; oc < layer.c_out(); ++oc) {
            for (std::size_t oy = 0; oy < up.h; ++oy) {
                for (std::size_t ox = 0; ox < up.w; ++ox) {
                    const double u = up.at(oc, oy, ox);
                    if (u == 0.0) continue;
                    for (std::size_t ic = 0; ic < c_in; ++ic) {
                        for (std::size_t ky = 0; ky < kh; ++ky) {
                            const std::ptrdiff_t iy =
                                static_cast<std::ptrdiff_t>(oy * layer.stride + ky) -
                                static_cast<std::ptrdiff_t>(layer.pad);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.h)) continue;
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox * layer.stride + kx) -
                                    static_cast<std::ptrdiff_t>(layer.pad);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.w)) continue;
                                grad(oc, (ic * kh + ky) * kw + kx) +=
                                    u * in.at(ic, static_cast<std::size_t>(iy),
                                              static_cast<std::size_t>(ix));
                            }
                        }
                    }
                }
            }
        }
    }
}

// dL/d(input) for a conv layer (transposed convolution with the used weights).
Batch conv_input_grad(const QatLayer& layer, const RealMatrix& w, const Batch& input_q,
                      const Batch& upstream) {
    const std::size_t kh = layer.weights.kh, kw = layer.weights.kw;
    const std::size_t c_in = layer.weights.c_in;
    Batch grads;
    grads.reserve(input_q.size());
    for (std::size_t b = 0; b < input_q.size(); ++b) {
        const Volume& in = input_q[b];
        const Volume& up = upstream[b];
        Volume g(in.c, in.h, in.w);
        for (std::size_t oc = 0; oc < layer.c_out(); ++oc) {
            const double* wrow = w.data.data() + oc * w.cols;
            for (std::size_t oy = 0; oy < up.h; ++oy) {
                for (std::size_t ox = 0; ox < up.w; ++ox) {
                    const double u = up.at(oc, oy, ox);
                    if (u == 0.0) continue;
                    for (std::size_t ic = 0; ic < c_in; ++ic) {
                        for (std::size_t ky = 0; ky < kh; ++ky) {
                            const std::ptrdiff_t iy =
                                static_cast<std::ptrdiff_t>(oy * layer.stride + ky) -
                                static_cast<std::ptrdiff_t>(layer.pad);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.h)) continue;
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox * layer.stride + kx) -
                                    static_cast<std::ptrdiff_t>(layer.pad);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.w)) continue;
                                g.at(ic, static_cast<std::size_t>(iy),
                                     static_cast<std::size_t>(ix)) +=
                                    u * wrow[(ic * kh + ky) * kw + kx];
                            }
                        }
                    }
                }
            }
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

struct WeightPipeline {
    spectral::FilterMatrix base;  // (standardized) weights feeding the transform
    spectral::FilterMatrix w_t;
    spectral::FilterMatrix w_used;
    spectral::Mask mask;
    bool fat = false;
    double wn_scale = 1.0, wn_shift = 0.0;
};

// Shared weight path: optional standardization, optional spectral transform,
// quantization, fold-back.
WeightPipeline run_weight_pipeline(const QatLayer& layer, const ModelConfig& cfg,
                                   bool surrogate) {
    WeightPipeline p;
    p.base = layer.weights;
    if (cfg.mode == Mode::FullPrecision) {
        p.w_t = p.base;
        p.w_used = p.base;
        return p;
    }
    if (cfg.weight_norm) {
        double mean = 0.0;
        for (double v : p.base.data.data) mean += v;
        mean /= static_cast<double>(p.base.data.data.size());
        double var = 0.0;
        for (double v : p.base.data.data) var += (v - mean) * (v - mean);
        var /= static_cast<double>(p.base.data.data.size());
        const double stddev = std::sqrt(std::max(var, 1e-12));
        for (double& v : p.base.data.data) v = (v - mean) / stddev;
        p.wn_scale = stddev;
        p.wn_shift = mean;
    }
    if (cfg.mode == Mode::Fat) {
        p.fat = true;
        p.mask = spectral::make_mask(spectral::spectrum(p.base), layer.generator);
        p.w_t = spectral::transform(p.base, p.mask);
    } else {
        p.w_t = p.base;
    }
    const QuantConfig qw = weight_quant_config(cfg, layer);
    p.w_used = p.w_t;
    p.w_used.data.data = quantize_or_clip(p.w_t.data.data, qw, surrogate);
    if (cfg.weight_norm) {
        for (double& v : p.w_used.data.data) v = p.wn_scale * v + p.wn_shift;
    }
    return p;
}

Batch relu(const Batch& x) {
    Batch out = x;
    for (Volume& v : out) {
        for (double& d : v.data) d = std::max(d, 0.0);
    }
    return out;
}

Batch relu_backward(const Batch& upstream, const Batch& pre_activation) {
    Batch out = upstream;
    for (std::size_t b = 0; b < out.size(); ++b) {
        for (std::size_t i = 0; i < out[b].data.size(); ++i) {
            if (pre_activation[b].data[i] <= 0.0) out[b].data[i] = 0.0;
        }
    }
    return out;
}

Batch global_average_pool(const Batch& x) {
    Batch out;
    out.reserve(x.size());
    for (const Volume& v : x) {
        Volume o(v.c, 1, 1);
        const double denom = static_cast<double>(v.h * v.w);
        for (std::size_t c = 0; c < v.c; ++c) {
            double acc = 0.0;
            for (std::size_t i = 0; i < v.h * v.w; ++i) acc += v.data[c * v.h * v.w + i];
            o.data[c] = acc / denom;
        }
        out.push_back(std::move(o));
    }
    return out;
}

Batch global_average_pool_backward(const Batch& upstream, const Batch& pooled_input) {
    Batch out;
    out.reserve(upstream.size());
    for (std::size_t b = 0; b < upstream.size(); ++b) {
        const Volume& src = pooled_input[b];
        Volume g(src.c, src.h, src.w);
        const double denom = static_cast<double>(src.h * src.w);
        for (std::size_t c = 0; c < src.c; ++c) {
            const double v = upstream[b].data[c] / denom;
            for (std::size_t i = 0; i < src.h * src.w; ++i) g.data[c * src.h * src.w + i] = v;
        }
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace

Batch forward_layer(const QatLayer& layer, const ModelConfig& cfg, const Batch& input,
                    LayerCache& cache, const PassOptions& opts) {
    if (input.empty()) throw std::invalid_argument("forward_layer: empty batch");
    WeightPipeline p = run_weight_pipeline(layer, cfg, opts.surrogate);

    cache = LayerCache{};
    cache.input = input;
    cache.opts = opts;
    cache.fat = p.fat;
    cache.w_t = p.w_t;
    cache.w_used = p.w_used;
    cache.mask = p.mask;
    cache.wn_scale = p.wn_scale;
    cache.wn_shift = p.wn_shift;

    if (cfg.mode == Mode::FullPrecision || !opts.quantize_input) {
        cache.input_q = input;
    } else {
        const QuantConfig qa = act_quant_config(cfg, layer);
        cache.input_q.reserve(input.size());
        for (const Volume& v : input) {
            Volume q = v;
            q.data = quantize_or_clip(v.data, qa, opts.surrogate);
            cache.input_q.push_back(std::move(q));
        }
    }

    Batch out;
    out.reserve(input.size());
    for (const Volume& v : cache.input_q) {
        out.push_back(layer.kind == LayerKind::Conv
                          ? conv_forward_one(layer, p.w_used.data, v)
                          : fc_forward_one(layer, p.w_used.data, v));
    }
    cache.valid = true;
    return out;
}

LayerGrads backward_layer(const QatLayer& layer, const ModelConfig& cfg,
                          const LayerCache& cache, const Batch& upstream) {
    if (!cache.valid) throw std::runtime_error("backward_layer: stale or missing cache");
    if (upstream.size() != cache.input.size()) {
        throw std::invalid_argument("backward_layer: upstream batch size mismatch");
    }

    LayerGrads grads;
    grads.grad_generator = RealMatrix(layer.c_out(), layer.c_out());

    // dL/dW_used accumulated over the batch.
    RealMatrix d_w_used(layer.c_out(), layer.n());
    if (layer.kind == LayerKind::Conv) {
        conv_weight_grad(layer, cache.input_q, upstream, d_w_used);
    } else {
        for (std::size_t b = 0; b < upstream.size(); ++b) {
            for (std::size_t o = 0; o < layer.c_out(); ++o) {
                const double u = upstream[b].data[o];
                if (u == 0.0) continue;
                for (std::size_t i = 0; i < layer.n(); ++i) {
                    d_w_used(o, i) += u * cache.input_q[b].data[i];
                }
            }
        }
    }

    // dL/d(input_q), also the input gradient once the activation STE is applied.
    Batch d_input_q;
    if (layer.kind == LayerKind::Conv) {
        d_input_q = conv_input_grad(layer, cache.w_used.data, cache.input_q, upstream);
    } else {
        d_input_q.reserve(upstream.size());
        for (std::size_t b = 0; b < upstream.size(); ++b) {
            const Volume& in = cache.input_q[b];
            Volume g(in.c, in.h, in.w);
            for (std::size_t o = 0; o < layer.c_out(); ++o) {
                const double u = upstream[b].data[o];
                if (u == 0.0) continue;
                for (std::size_t i = 0; i < layer.n(); ++i) {
                    g.data[i] += u * cache.w_used.data(o, i);
                }
            }
            d_input_q.push_back(std::move(g));
        }
    }

    if (cfg.mode == Mode::FullPrecision) {
        grads.grad_weights = d_w_used;
        grads.grad_input = std::move(d_input_q);
        return grads;
    }

    // Weight path: undo the fold-back scale, then the STE pass-through.
    const QuantConfig qw = weight_quant_config(cfg, layer);
    RealMatrix d_w_q = d_w_used;
    if (cfg.weight_norm) {
        for (double& v : d_w_q.data) v *= cache.wn_scale;
    }
    grads.grad_alpha_w = quantizers::alpha_grad_weight(d_w_q.data, cache.w_t.data.data, qw);
    const std::vector<double> w_mask = quantizers::ste_grad_mask(cache.w_t.data.data, qw);
    RealMatrix d_w_t = d_w_q;
    for (std::size_t i = 0; i < d_w_t.data.size(); ++i) d_w_t.data[i] *= w_mask[i];

    if (cfg.mode == Mode::Fat) {
        spectral::FilterMatrix base = layer.weights;
        if (cfg.weight_norm) {
            // Reconstruct the standardized weights the transform actually saw.
            for (double& v : base.data.data) v = (v - cache.wn_shift) / cache.wn_scale;
        }
        const spectral::BackwardResult res =
            spectral::backward(d_w_t, base, cache.mask, cfg.norm_path);
        grads.grad_weights = res.grad_weights;
        grads.grad_generator = res.grad_generator;
    } else {
        grads.grad_weights = d_w_t;
    }
    if (cfg.weight_norm) {
        for (double& v : grads.grad_weights.data) v /= cache.wn_scale;
    }

    // Activation path.
    if (cache.opts.quantize_input) {
        const QuantConfig qa = act_quant_config(cfg, layer);
        double d_alpha_a = 0.0;
        grads.grad_input.reserve(d_input_q.size());
        for (std::size_t b = 0; b < d_input_q.size(); ++b) {
            d_alpha_a += quantizers::alpha_grad_activation(d_input_q[b].data,
                                                           cache.input[b].data, qa);
            const std::vector<double> a_mask =
                quantizers::ste_grad_mask(cache.input[b].data, qa);
            Volume g = d_input_q[b];
            for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] *= a_mask[i];
            grads.grad_input.push_back(std::move(g));
        }
        grads.grad_alpha_a = d_alpha_a;
    } else {
        grads.grad_input = std::move(d_input_q);
    }
    return grads;
}

LossResult softmax_cross_entropy(const std::vector<std::vector<double>>& logits,
                                 const std::vector<int>& labels) {
    if (logits.size() != labels.size() || logits.empty()) {
        throw std::invalid_argument("softmax_cross_entropy: batch size mismatch");
    }
    LossResult res;
    res.grad_logits.resize(logits.size());
    const double inv_batch = 1.0 / static_cast<double>(logits.size());
    for (std::size_t b = 0; b < logits.size(); ++b) {
        const std::vector<double>& z = logits[b];
        const int label = labels[b];
        if (label < 0 || static_cast<std::size_t>(label) >= z.size()) {
            throw std::invalid_argument("softmax_cross_entropy: label out of range");
        }
        const double zmax = *std::max_element(z.begin(), z.end());
        double denom = 0.0;
        for (double v : z) denom += std::exp(v - zmax);
        res.loss += -(z[label] - zmax - std::log(denom)) * inv_batch;

        std::size_t argmax = 0;
        for (std::size_t k = 1; k < z.size(); ++k) {
            if (z[k] > z[argmax]) argmax = k;
        }
        if (static_cast<int>(argmax) == label) ++res.correct;

        std::vector<double> g(z.size());
        for (std::size_t k = 0; k < z.size(); ++k) {
            const double p = std::exp(z[k] - zmax) / denom;
            g[k] = (p - (static_cast<int>(k) == label ? 1.0 : 0.0)) * inv_batch;
        }
        res.grad_logits[b] = std::move(g);
    }
    return res;
}

QatModel make_toy_model(const ModelConfig& cfg, std::uint64_t init_seed) {
    RngState init_rng(init_seed);
    const auto make_layer = [&](LayerKind kind, std::size_t c_out, std::size_t c_in,
                                std::size_t k) {
        QatLayer layer;
        layer.kind = kind;
        layer.weights.c_in = c_in;
        layer.weights.kh = k;
        layer.weights.kw = k;
        layer.weights.data = RealMatrix(c_out, c_in * k * k);
        const double scale = std::sqrt(2.0 / static_cast<double>(c_in * k * k));
        for (double& v : layer.weights.data.data) v = init_rng.next_gaussian() * scale;
        layer.generator = RealMatrix(c_out, c_out);
        return layer;
    };
    QatModel model;
    model.cfg = cfg;
    model.layers.push_back(make_layer(LayerKind::Conv, 8, 1, 3));
    model.layers.push_back(make_layer(LayerKind::Conv, 16, 8, 3));
    model.layers.push_back(make_layer(LayerKind::FullyConnected, cfg.classes, 16, 1));
    model.rng = RngState(init_seed);
    return model;
}

std::vector<std::vector<double>> forward_net(QatModel& model, const Batch& input,
                                             NetCache* caches, const PassOptions& opts) {
    const std::size_t n_layers = model.layers.size();
    NetCache local;
    NetCache& nc = caches ? *caches : local;
    nc.layer_caches.assign(n_layers, LayerCache{});
    nc.relu_inputs.clear();

    Batch x = input;
    for (std::size_t li = 0; li < n_layers; ++li) {
        const QatLayer& layer = model.layers[li];
        if (layer.kind == LayerKind::FullyConnected) {
            nc.gap_input = x;
            x = global_average_pool(x);
        }
        x = forward_layer(layer, model.cfg, x, nc.layer_caches[li], opts);
        if (layer.kind == LayerKind::Conv) {
            nc.relu_inputs.push_back(x);
            x = relu(x);
        }
    }
    std::vector<std::vector<double>> logits;
    logits.reserve(x.size());
    for (const Volume& v : x) logits.push_back(v.data);
    return logits;
}

namespace {

struct NetGrads {
    std::vector<LayerGrads> per_layer;
};

NetGrads backward_net(QatModel& model, const NetCache& nc,
                      const std::vector<std::vector<double>>& grad_logits) {
    const std::size_t n_layers = model.layers.size();
    NetGrads grads;
    grads.per_layer.resize(n_layers);

    Batch upstream;
    upstream.reserve(grad_logits.size());
    for (const std::vector<double>& g : grad_logits) {
        Volume v(g.size(), 1, 1);
        v.data = g;
        upstream.push_back(std::move(v));
    }

    for (std::size_t li = n_layers; li-- > 0;) {
        const QatLayer& layer = model.layers[li];
        if (layer.kind == LayerKind::FullyConnected) {
            grads.per_layer[li] =
                backward_layer(layer, model.cfg, nc.layer_caches[li], upstream);
            upstream = global_average_pool_backward(grads.per_layer[li].grad_input,
                                                    nc.gap_input);
        } else {
            // A relu follows every conv layer; undo it before the layer itself.
            upstream = relu_backward(upstream, nc.relu_inputs[li]);
            grads.per_layer[li] =
                backward_layer(layer, model.cfg, nc.layer_caches[li], upstream);
            upstream = std::move(grads.per_layer[li].grad_input);
        }
    }
    return grads;
}

Batch make_batch(const dataset::Dataset& data, const std::vector<std::size_t>& indices,
                 std::size_t begin, std::size_t end) {
    Batch batch;
    batch.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        Volume v(1, data.image_size, data.image_size);
        v.data = data.images[indices[i]];
        batch.push_back(std::move(v));
    }
    return batch;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - std::floor(pos);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

void init_from_pretrained(QatModel& model, const QatModel& pretrained,
                          const Batch& calibration) {
    if (model.layers.size() != pretrained.layers.size()) {
        throw std::invalid_argument("init_from_pretrained: layer count mismatch");
    }
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const QatLayer& src = pretrained.layers[li];
        QatLayer& dst = model.layers[li];
        if (src.weights.data.rows != dst.weights.data.rows ||
            src.weights.data.cols != dst.weights.data.cols) {
            throw std::invalid_argument("init_from_pretrained: weight shape mismatch at layer " +
                                        std::to_string(li));
        }
        dst.weights = src.weights;
    }

    // Capture per-layer input activations with a full-precision pass.
    QatModel probe = model;
    probe.cfg.mode = Mode::FullPrecision;
    NetCache nc;
    forward_net(probe, calibration, &nc);

    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        QatLayer& layer = model.layers[li];

        // Generator: scaled identity with the median pre-sigmoid activation
        // pinned at 3, so training starts near the identity transform.
        spectral::FilterMatrix base = layer.weights;
        if (model.cfg.weight_norm) {
            double mean = 0.0;
            for (double v : base.data.data) mean += v;
            mean /= static_cast<double>(base.data.data.size());
            double var = 0.0;
            for (double v : base.data.data) var += (v - mean) * (v - mean);
            var /= static_cast<double>(base.data.data.size());
            const double stddev = std::sqrt(std::max(var, 1e-12));
            for (double& v : base.data.data) v = (v - mean) / stddev;
        }
        const spectral::SpectrumView spec = spectral::spectrum(base);
        const double med = median(spec.norms.data);
        const double scale = med > 0.0 ? 3.0 / med : 1.0;
        layer.generator = RealMatrix(layer.c_out(), layer.c_out());
        for (std::size_t i = 0; i < layer.c_out(); ++i) layer.generator(i, i) = scale;

        // alpha_w from the transformed weights this configuration produces.
        spectral::FilterMatrix w_t = base;
        if (model.cfg.mode == Mode::Fat) {
            const spectral::Mask mask = spectral::make_mask(spec, layer.generator);
            w_t = spectral::transform(base, mask);
        }
        double max_wt = 0.0;
        for (double v : w_t.data.data) max_wt = std::max(max_wt, std::abs(v));
        layer.alpha_w = std::max(max_wt, 1e-4);

        // alpha_a from a high percentile of the calibration activations.
        std::vector<double> acts;
        for (const Volume& v : nc.layer_caches[li].input) {
            acts.insert(acts.end(), v.data.begin(), v.data.end());
        }
        layer.alpha_a = std::max(percentile(std::move(acts), 0.999), 1e-4);
    }
    model.epoch = 0;
    model.history.clear();
}

EvalResult evaluate(QatModel& model, const dataset::Dataset& data) {
    if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
    std::vector<std::size_t> indices(data.size());
    std::iota(indices.begin(), indices.end(), 0);
    double loss = 0.0;
    std::size_t correct = 0;
    const std::size_t batch_size = 64;
    for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
        const std::size_t end = std::min(begin + batch_size, data.size());
        const Batch batch = make_batch(data, indices, begin, end);
        const std::vector<std::vector<double>> logits = forward_net(model, batch, nullptr);
        std::vector<int> labels(data.labels.begin() + begin, data.labels.begin() + end);
        const LossResult lr = softmax_cross_entropy(logits, labels);
        loss += lr.loss * static_cast<double>(end - begin);
        correct += lr.correct;
    }
    return {loss / static_cast<double>(data.size()),
            static_cast<double>(correct) / static_cast<double>(data.size())};
}

EvalResult evaluate_folded(QatModel& model, const dataset::Dataset& data) {
    // Fold each layer's live transform into stored weights, then run without
    // the spectral path, exactly as a deployed quantizer-only model would.
    QatModel folded = model;
    if (model.cfg.mode == Mode::Fat) {
        for (std::size_t li = 0; li < model.layers.size(); ++li) {
            WeightPipeline p = run_weight_pipeline(model.layers[li], model.cfg, false);
            spectral::FilterMatrix stored = p.w_t;
            if (model.cfg.weight_norm) {
                // Keep the fold-back affine inside the stored weights so the
                // quantizer-only path needs no normalization state.
                stored.data.data = p.w_used.data.data;
                folded.cfg.weight_norm = false;
                folded.cfg.m_w = 16;  // stored weights are already quantized
            }
            folded.layers[li].weights = stored;
        }
        folded.cfg.mode = Mode::Ste;
    }
    return evaluate(folded, data);
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be positive");
    if (!(lr_decay > 0.0)) throw std::invalid_argument("TrainConfig: lr_decay must be positive");
    if (momentum < 0.0 || momentum >= 1.0) {
        throw std::invalid_argument("TrainConfig: momentum must lie in [0, 1)");
    }
    if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
    if (m_w < 2 || m_a < 2) throw std::invalid_argument("TrainConfig: bitwidths must be >= 2");
    if (n_train == 0 || n_test == 0) {
        throw std::invalid_argument("TrainConfig: dataset sizes must be >= 1");
    }
    if (classes < 2) throw std::invalid_argument("TrainConfig: need at least 2 classes");
    if (!std::is_sorted(milestones.begin(), milestones.end())) {
        throw std::invalid_argument("TrainConfig: milestones must be sorted");
    }
}

TrainResult train(const TrainConfig& cfg, const QatModel* pretrained) {
    cfg.validate();

    TrainResult result;
    const RngState seed_source(cfg.seed);
    result.train_data = make_train_dataset(cfg);
    result.test_data = make_test_dataset(cfg);

    ModelConfig mc;
    mc.image_size = cfg.image_size;
    mc.classes = cfg.classes;
    mc.mode = cfg.mode;
    mc.m_w = cfg.m_w;
    mc.m_a = cfg.m_a;
    mc.scheme = cfg.scheme;
    mc.norm_path = cfg.norm_path;
    mc.weight_norm = cfg.weight_norm;

    QatModel model = make_toy_model(mc, seed_source.derive_seed(0x1417));
    if (cfg.mode != Mode::FullPrecision) {
        if (pretrained == nullptr) {
            throw std::invalid_argument(
                "train: quantized modes start from a pretrained full-precision model; "
                "run an fp training first and pass its checkpoint");
        }
        std::vector<std::size_t> indices(result.train_data.size());
        std::iota(indices.begin(), indices.end(), 0);
        const Batch calibration =
            make_batch(result.train_data, indices, 0,
                       std::min<std::size_t>(cfg.batch_size, result.train_data.size()));
        init_from_pretrained(model, *pretrained, calibration);
    }
    model.rng = RngState(seed_source.derive_seed(0x5AFF));

    std::vector<std::uint32_t> milestones = cfg.milestones;
    if (milestones.empty() && cfg.epochs > 0) {
        milestones = {cfg.epochs / 2, (3 * cfg.epochs) / 4};
    }

    // Momentum buffers per layer: weights, generator, alphas.
    struct MomentumState {
        RealMatrix weights;
        RealMatrix generator;
        double alpha_w = 0.0;
        double alpha_a = 0.0;
    };
    std::vector<MomentumState> momentum(model.layers.size());
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        momentum[li].weights = RealMatrix(model.layers[li].c_out(), model.layers[li].n());
        momentum[li].generator = RealMatrix(model.layers[li].c_out(), model.layers[li].c_out());
    }

    std::vector<std::size_t> order(result.train_data.size());
    std::iota(order.begin(), order.end(), 0);

    double lr = cfg.lr;
    for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::uint32_t m : milestones) {
            if (m == epoch && m > 0) lr *= cfg.lr_decay;
        }
        // Fisher-Yates with the model's own stream keeps runs reproducible.
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[model.rng.next_index(i)]);
        }

        double epoch_loss = 0.0;
        std::size_t epoch_correct = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(begin + cfg.batch_size, order.size());
            const Batch batch = make_batch(result.train_data, order, begin, end);
            std::vector<int> labels;
            labels.reserve(end - begin);
            for (std::size_t i = begin; i < end; ++i) {
                labels.push_back(result.train_data.labels[order[i]]);
            }

            NetCache nc;
            const std::vector<std::vector<double>> logits = forward_net(model, batch, &nc);
            const LossResult lr_res = softmax_cross_entropy(logits, labels);
            epoch_loss += lr_res.loss * static_cast<double>(end - begin);
            epoch_correct += lr_res.correct;

            const NetGrads grads = backward_net(model, nc, lr_res.grad_logits);
            for (std::size_t li = 0; li < model.layers.size(); ++li) {
                QatLayer& layer = model.layers[li];
                MomentumState& ms = momentum[li];
                const LayerGrads& g = grads.per_layer[li];
                for (std::size_t i = 0; i < layer.weights.data.data.size(); ++i) {
                    const double step = g.grad_weights.data[i] +
                                        cfg.weight_decay * layer.weights.data.data[i];
                    ms.weights.data[i] = cfg.momentum * ms.weights.data[i] + step;
                    layer.weights.data.data[i] -= lr * ms.weights.data[i];
                }
                if (cfg.mode == Mode::Fat) {
                    for (std::size_t i = 0; i < layer.generator.data.size(); ++i) {
                        ms.generator.data[i] =
                            cfg.momentum * ms.generator.data[i] + g.grad_generator.data[i];
                        layer.generator.data[i] -= lr * ms.generator.data[i];
                    }
                }
                if (cfg.mode != Mode::FullPrecision) {
                    ms.alpha_w = cfg.momentum * ms.alpha_w + g.grad_alpha_w;
                    layer.alpha_w = std::max(layer.alpha_w - lr * ms.alpha_w, 1e-4);
                    ms.alpha_a = cfg.momentum * ms.alpha_a + g.grad_alpha_a;
                    layer.alpha_a = std::max(layer.alpha_a - lr * ms.alpha_a, 1e-4);
                }
            }
        }

        model.epoch = epoch + 1;
        MetricRow train_row;
        train_row.epoch = model.epoch;
        train_row.is_validation = false;
        train_row.loss = epoch_loss / static_cast<double>(order.size());
        train_row.accuracy =
            static_cast<double>(epoch_correct) / static_cast<double>(order.size());
        model.history.push_back(train_row);

        const EvalResult val = evaluate(model, result.test_data);
        MetricRow val_row;
        val_row.epoch = model.epoch;
        val_row.is_validation = true;
        val_row.loss = val.loss;
        val_row.accuracy = val.accuracy;
        model.history.push_back(val_row);
    }

    result.metrics = model.history;
    result.model = std::move(model);
    return result;
}

WeightView layer_weight_view(const QatLayer& layer, const ModelConfig& cfg) {
    WeightPipeline p = run_weight_pipeline(layer, cfg, false);
    WeightView view;
    view.w_t = std::move(p.w_t);
    view.w_used = std::move(p.w_used);
    view.mask = std::move(p.mask);
    view.fat = p.fat;
    return view;
}

dataset::Dataset make_train_dataset(const TrainConfig& cfg) {
    const RngState seed_source(cfg.seed);
    return dataset::make_oriented_dataset(seed_source.derive_seed(0xDA7A), cfg.n_train,
                                          cfg.image_size, cfg.classes);
}

dataset::Dataset make_test_dataset(const TrainConfig& cfg) {
    const RngState seed_source(cfg.seed);
    return dataset::make_oriented_dataset(seed_source.derive_seed(0x7E57), cfg.n_test,
                                          cfg.image_size, cfg.classes);
}

double bop(double m_w, double m_a, double mac_count) {
    if (!(m_w > 0.0) || !(m_a > 0.0) || !(mac_count > 0.0)) {
        throw std::invalid_argument("bop: all arguments must be positive");
    }
    return m_w * m_a * mac_count;
}

TransformOverhead transform_overhead(double c_out, double c_in, double k, double h,
                                     double w) {
    if (!(c_out > 0.0) || !(c_in > 0.0) || !(k > 0.0) || !(h > 0.0) || !(w > 0.0)) {
        throw std::invalid_argument("transform_overhead: all arguments must be positive");
    }
    const double n = c_in * k * k;
    TransformOverhead out;
    out.delta_mac = 2.0 * c_out * n * std::log2(n) + 4.0 * c_out * n + c_out * c_out * n;
    out.base_mac = h * w * c_out * n;
    out.ratio = (2.0 * std::log2(n) + 4.0 + c_out) / (h * w);
    return out;
}

}  // namespace fatq::trainer
