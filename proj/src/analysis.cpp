#include "fatq/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fatq/quantizers.hpp"
#include "fatq/spectral.hpp"

namespace fatq::analysis {

using numerics::RealMatrix;
using trainer::QatModel;

namespace {

// Actual frequency of DFT bin k for an N-point real signal.
std::size_t bin_frequency(std::size_t k, std::size_t n) {
    return std::min(k, n - k);
}

}  // namespace

std::vector<MaskExport> mask_export(const QatModel& model) {
    if (model.cfg.mode != trainer::Mode::Fat) {
        throw std::invalid_argument("mask_export: checkpoint does not carry a spectral mask "
                                    "(mode is not fat)");
    }
    std::vector<MaskExport> out;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const trainer::WeightView view =
            trainer::layer_weight_view(model.layers[li], model.cfg);
        const spectral::SpectrumView spec =
            spectral::spectrum(model.layers[li].weights);

        MaskExport exp;
        exp.layer = li;
        exp.norms = spec.norms;
        exp.mask = view.mask.values;

        const std::size_t n = exp.mask.cols;
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [n](std::size_t a, std::size_t b) {
            return bin_frequency(a, n) < bin_frequency(b, n);
        });
        const std::size_t quartile = std::max<std::size_t>(n / 4, 1);
        double low = 0.0, high = 0.0;
        for (std::size_t i = 0; i < quartile; ++i) {
            for (std::size_t r = 0; r < exp.mask.rows; ++r) {
                low += exp.mask(r, order[i]);
                high += exp.mask(r, order[n - 1 - i]);
            }
        }
        const double denom = static_cast<double>(quartile * exp.mask.rows);
        exp.low_quartile_mean = low / denom;
        exp.high_quartile_mean = high / denom;
        out.push_back(std::move(exp));
    }
    return out;
}

std::vector<ShiftRow> shift_report(const QatModel& pretrained, const QatModel& transformed) {
    if (pretrained.layers.size() != transformed.layers.size()) {
        throw std::invalid_argument("shift_report: architectures differ (layer count)");
    }
    if (transformed.cfg.mode != trainer::Mode::Fat) {
        throw std::invalid_argument("shift_report: second checkpoint must be a fat model");
    }
    std::vector<ShiftRow> rows;
    for (std::size_t li = 0; li < pretrained.layers.size(); ++li) {
        const trainer::QatLayer& fp_layer = pretrained.layers[li];
        const trainer::QatLayer& fat_layer = transformed.layers[li];
        if (fp_layer.weights.data.rows != fat_layer.weights.data.rows ||
            fp_layer.weights.data.cols != fat_layer.weights.data.cols) {
            throw std::invalid_argument("shift_report: architectures differ at layer " +
                                        std::to_string(li));
        }

        // Learned transform applied to the pretrained weights.
        trainer::QatLayer probe = fat_layer;
        probe.weights = fp_layer.weights;
        const trainer::WeightView view = trainer::layer_weight_view(probe, transformed.cfg);

        quantizers::QuantConfig qw;
        qw.bitwidth = transformed.cfg.m_w;
        qw.scheme = transformed.cfg.scheme;
        qw.is_signed = true;
        qw.alpha = fat_layer.alpha_w;

        const std::vector<double> q_orig = quantizers::quantize(fp_layer.weights.data.data, qw);
        const std::vector<double> q_trans = quantizers::quantize(view.w_t.data.data, qw);
        ShiftRow row;
        row.layer = li;
        row.total = q_orig.size();
        for (std::size_t i = 0; i < q_orig.size(); ++i) {
            if (q_orig[i] != q_trans[i]) ++row.shifted;
        }
        row.proportion = static_cast<double>(row.shifted) / static_cast<double>(row.total);
        rows.push_back(row);
    }
    return rows;
}

std::vector<AblationRow> band_ablation(const QatModel& model, const dataset::Dataset& data,
                                       std::size_t bands, double damping) {
    std::size_t max_freqs = 0;
    for (const trainer::QatLayer& layer : model.layers) {
        max_freqs = std::max(max_freqs, layer.n() / 2 + 1);
    }
    if (bands < 2 || bands > max_freqs) {
        throw std::invalid_argument("band_ablation: bands must lie in [2, " +
                                    std::to_string(max_freqs) + "] for this model");
    }
    if (!(damping >= 0.0) || damping > 1.0) {
        throw std::invalid_argument("band_ablation: damping must lie in [0, 1]");
    }

    // Ablation measures the weights themselves: evaluate in full precision.
    QatModel probe = model;
    probe.cfg.mode = trainer::Mode::FullPrecision;

    std::vector<AblationRow> rows;
    AblationRow baseline;
    baseline.band = -1;
    baseline.bin_lo = -1;
    baseline.bin_hi = -1;
    baseline.accuracy = trainer::evaluate(probe, data).accuracy;
    rows.push_back(baseline);

    for (std::size_t band = 0; band < bands; ++band) {
        QatModel damped = probe;
        for (trainer::QatLayer& layer : damped.layers) {
            const std::size_t n = layer.n();
            const std::size_t freqs = n / 2 + 1;
            // Equal-width contiguous partition of this layer's frequency range.
            const std::size_t f_lo =
                static_cast<std::size_t>(band * freqs / bands);
            const std::size_t f_hi =
                static_cast<std::size_t>((band + 1) * freqs / bands);
            if (f_lo >= f_hi) continue;  // narrower layers skip empty bands
            for (std::size_t r = 0; r < layer.c_out(); ++r) {
                numerics::ComplexVec f = numerics::dft(layer.weights.data.row(r));
                for (std::size_t k = 0; k < n; ++k) {
                    const std::size_t freq = bin_frequency(k, n);
                    if (freq >= f_lo && freq < f_hi) {
                        f.re[k] *= damping;
                        f.im[k] *= damping;
                    }
                }
                layer.weights.data.set_row(r, numerics::idft(f));
            }
        }
        AblationRow row;
        row.band = static_cast<int>(band);
        row.bin_lo = static_cast<long>(band * max_freqs / bands);
        row.bin_hi = static_cast<long>((band + 1) * max_freqs / bands) - 1;
        row.accuracy = trainer::evaluate(damped, data).accuracy;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace fatq::analysis
