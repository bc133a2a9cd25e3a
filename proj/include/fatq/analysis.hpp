#pragma once

#include <cstddef>
#include <vector>

#include "fatq/dataset.hpp"
#include "fatq/numerics.hpp"
#include "fatq/trainer.hpp"

namespace fatq::analysis {

// Spectral norms and mask values of one layer, with mean mask level over the
// lowest- and highest-frequency quartile of bins (bins ranked by their actual
// frequency min(k, N-k)).
struct MaskExport {
    std::size_t layer = 0;
    numerics::RealMatrix norms;
    numerics::RealMatrix mask;
    double low_quartile_mean = 0.0;
    double high_quartile_mean = 0.0;
};

std::vector<MaskExport> mask_export(const trainer::QatModel& model);

// Per-layer share of weights whose quantized value changes between Q(W) and
// Q(T(W)), with W the pretrained weights and T the learned transform.
struct ShiftRow {
    std::size_t layer = 0;
    std::size_t total = 0;
    std::size_t shifted = 0;
    double proportion = 0.0;
};

std::vector<ShiftRow> shift_report(const trainer::QatModel& pretrained,
                                   const trainer::QatModel& transformed);

// Full-precision accuracy after damping one frequency band of every layer's
// weight spectrum; band 0 is the lowest frequency. Row -1 carries the
// unablated baseline. bin_lo/bin_hi give the band's bins in natural DFT
// indexing for the widest layer (the mirrored conjugate arc is implied).
struct AblationRow {
    int band = 0;
    long bin_lo = 0;
    long bin_hi = 0;
    double accuracy = 0.0;
};

std::vector<AblationRow> band_ablation(const trainer::QatModel& model,
                                       const dataset::Dataset& data, std::size_t bands,
                                       double damping);

}  // namespace fatq::analysis
