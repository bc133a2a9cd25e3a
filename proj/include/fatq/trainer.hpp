#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fatq/dataset.hpp"
#include "fatq/numerics.hpp"
#include "fatq/quantizers.hpp"
#include "fatq/spectral.hpp"

namespace fatq::trainer {

using numerics::RealMatrix;
using numerics::RngState;
using quantizers::QuantConfig;
using quantizers::Scheme;

enum class Mode { FullPrecision, Ste, Fat };

std::string mode_name(Mode m);
Mode mode_from_name(const std::string& name);

// Single-channel activation volume (c, h, w), row-major.
struct Volume {
    std::size_t c = 1, h = 1, w = 1;
    std::vector<double> data;

    Volume() = default;
    Volume(std::size_t c_, std::size_t h_, std::size_t w_)
        : c(c_), h(h_), w(w_), data(c_ * h_ * w_, 0.0) {}

    double& at(std::size_t ch, std::size_t y, std::size_t x) {
        return data[(ch * h + y) * w + x];
    }
    double at(std::size_t ch, std::size_t y, std::size_t x) const {
        return data[(ch * h + y) * w + x];
    }
};

using Batch = std::vector<Volume>;

enum class LayerKind { Conv, FullyConnected };

// One quantization-aware layer: weights plus the learnable mask generator and
// clipping thresholds. Weights are stored flattened (row per filter) with the
// 4-D kernel meta alongside; the flat layout matches the 4-D row-major order.
struct QatLayer {
    LayerKind kind = LayerKind::Conv;
    std::size_t stride = 1, pad = 0;
    spectral::FilterMatrix weights;
    RealMatrix generator;  // c_out x c_out
    double alpha_w = 1.0;
    double alpha_a = 1.0;

    std::size_t c_out() const { return weights.c_out(); }
    std::size_t n() const { return weights.n(); }
};

struct ModelConfig {
    std::size_t image_size = 16;
    std::size_t classes = 4;
    Mode mode = Mode::FullPrecision;
    int m_w = 4;
    int m_a = 4;
    Scheme scheme = Scheme::Uniform;
    bool norm_path = true;     // mask-through-norms gradient contribution
    bool weight_norm = false;  // per-layer standardization before the transform
};

struct MetricRow {
    std::uint32_t epoch = 0;
    bool is_validation = false;
    double loss = 0.0;
    double accuracy = 0.0;
};

struct QatModel {
    ModelConfig cfg;
    std::vector<QatLayer> layers;  // conv..., fc last
    std::uint32_t epoch = 0;
    RngState rng{0};
    std::vector<MetricRow> history;
};

// conv(1->8, 3x3) -> relu -> conv(8->16, 3x3) -> relu -> gap -> fc(16->classes).
QatModel make_toy_model(const ModelConfig& cfg, std::uint64_t init_seed);

// Per-call behavior switches for the forward/backward pair.
struct PassOptions {
    bool surrogate = false;  // replace the quantizer with its clip surrogate
    bool quantize_input = true;
};

// Cache produced by forward_layer and consumed by the matching backward_layer.
struct LayerCache {
    Batch input;               // pre-quantization activations
    Batch input_q;
    spectral::FilterMatrix w_t;
    spectral::FilterMatrix w_used;  // quantized (and re-scaled, under weight norm)
    spectral::Mask mask;            // fat mode only
    bool fat = false;
    bool valid = false;
    PassOptions opts;
    double wn_scale = 1.0, wn_shift = 0.0;  // weight-norm fold-back terms
};

Batch forward_layer(const QatLayer& layer, const ModelConfig& cfg, const Batch& input,
                    LayerCache& cache, const PassOptions& opts = {});

struct LayerGrads {
    RealMatrix grad_weights;    // same shape as layer.weights.data
    RealMatrix grad_generator;  // c_out x c_out (zeros outside fat mode)
    double grad_alpha_w = 0.0;
    double grad_alpha_a = 0.0;
    Batch grad_input;
};

LayerGrads backward_layer(const QatLayer& layer, const ModelConfig& cfg,
                          const LayerCache& cache, const Batch& upstream);

// Softmax cross entropy averaged over the batch; grad has the same layout as
// the logits.
struct LossResult {
    double loss = 0.0;
    std::size_t correct = 0;
    std::vector<std::vector<double>> grad_logits;
};

LossResult softmax_cross_entropy(const std::vector<std::vector<double>>& logits,
                                 const std::vector<int>& labels);

// Whole-network forward to logits; caches every stage when `caches` is given.
struct NetCache {
    std::vector<LayerCache> layer_caches;
    std::vector<Batch> relu_inputs;  // pre-activation values per relu
    Batch gap_input;
};

std::vector<std::vector<double>> forward_net(QatModel& model, const Batch& input,
                                             NetCache* caches,
                                             const PassOptions& opts = {});

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

EvalResult evaluate(QatModel& model, const dataset::Dataset& data);

// Deployment-style evaluation: per-layer transforms are folded once into
// stored transformed weights and the live spectral path is skipped.
EvalResult evaluate_folded(QatModel& model, const dataset::Dataset& data);

struct TrainConfig {
    Mode mode = Mode::FullPrecision;
    std::uint32_t epochs = 20;
    std::size_t batch_size = 32;
    double lr = 0.01;
    double momentum = 0.9;
    double lr_decay = 0.1;
    std::vector<std::uint32_t> milestones;  // empty -> 50% and 75% of epochs
    double weight_decay = 5e-4;
    std::uint64_t seed = 1;
    int m_w = 4;
    int m_a = 4;
    Scheme scheme = Scheme::Uniform;
    bool norm_path = true;
    bool weight_norm = false;
    std::size_t n_train = 512;
    std::size_t n_test = 256;
    std::size_t classes = 4;
    std::size_t image_size = 16;

    void validate() const;
};

struct TrainResult {
    QatModel model;
    std::vector<MetricRow> metrics;
    dataset::Dataset train_data;
    dataset::Dataset test_data;
};

// Runs SGD per the config. Quantized modes require a pretrained model to start
// from; FP mode trains from random initialization.
TrainResult train(const TrainConfig& cfg,
                  const QatModel* pretrained = nullptr);

// Initializes mask generators and clipping thresholds of a quantized-mode
// model from pretrained full-precision weights plus a calibration batch.
void init_from_pretrained(QatModel& model, const QatModel& pretrained,
                          const Batch& calibration);

// The weight pipeline a forward pass would run for this layer: optional
// standardization, spectral transform (fat mode), quantization and fold-back.
struct WeightView {
    spectral::FilterMatrix w_t;     // transformed (pre-quantization) weights
    spectral::FilterMatrix w_used;  // weights the convolution actually sees
    spectral::Mask mask;            // fat mode only
    bool fat = false;
};

WeightView layer_weight_view(const QatLayer& layer, const ModelConfig& cfg);

// Dataset builders with the same seed derivation train() uses, so analysis
// commands can regenerate a run's exact train/test split from its seed.
dataset::Dataset make_train_dataset(const TrainConfig& cfg);
dataset::Dataset make_test_dataset(const TrainConfig& cfg);

// Bit-operation count: m_w * m_a * mac.
double bop(double m_w, double m_a, double mac_count);

struct TransformOverhead {
    double delta_mac = 0.0;
    double base_mac = 0.0;
    double ratio = 0.0;
};

// Extra MACs of the spectral transform against a conv layer's own MACs:
// delta = 2 C_out N log2(N) + 4 C_out N + C_out^2 N with N = C_in k^2,
// base = H W C_out N, ratio = (2 log2(N) + 4 + C_out) / (H W).
TransformOverhead transform_overhead(double c_out, double c_in, double k, double h,
                                     double w);

}  // namespace fatq::trainer
