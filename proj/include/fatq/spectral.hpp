#pragma once

#include <cstddef>
#include <vector>

#include "fatq/numerics.hpp"

namespace fatq::spectral {

using numerics::ComplexVec;
using numerics::RealMatrix;

// 4-D convolution weight tensor, row-major (c_out, c_in, kh, kw).
struct Tensor4 {
    std::size_t c_out = 0, c_in = 0, kh = 0, kw = 0;
    std::vector<double> data;

    Tensor4() = default;
    Tensor4(std::size_t co, std::size_t ci, std::size_t h, std::size_t w)
        : c_out(co), c_in(ci), kh(h), kw(w), data(co * ci * h * w, 0.0) {}

    std::size_t size() const { return data.size(); }
    double& at(std::size_t o, std::size_t i, std::size_t y, std::size_t x) {
        return data[((o * c_in + i) * kh + y) * kw + x];
    }
    double at(std::size_t o, std::size_t i, std::size_t y, std::size_t x) const {
        return data[((o * c_in + i) * kh + y) * kw + x];
    }
};

// Per-filter flattened weight view: row i is filter i in (c_in, k_row, k_col)
// order, last index fastest. n == c_in * kh * kw.
struct FilterMatrix {
    RealMatrix data;           // c_out x n
    std::size_t c_in = 1, kh = 1, kw = 1;

    std::size_t c_out() const { return data.rows; }
    std::size_t n() const { return data.cols; }
};

// Row-wise DFT of a FilterMatrix plus the per-entry spectral magnitudes.
struct SpectrumView {
    RealMatrix freq_re;   // c_out x n
    RealMatrix freq_im;   // c_out x n
    RealMatrix norms;     // c_out x n, norms(i,k) == |freq(i,k)|
};

// Soft frequency mask in (0,1) together with the generator that produced it.
struct Mask {
    RealMatrix values;     // c_out x n
    RealMatrix generator;  // c_out x c_out
};

FilterMatrix flatten_weights(const Tensor4& w4d);
Tensor4 unflatten_weights(const FilterMatrix& w);

SpectrumView spectrum(const FilterMatrix& w);

// M = sigmoid(generator^T * norms); mixing is across filters, per frequency.
Mask make_mask(const SpectrumView& spec, const RealMatrix& generator);

// W_t(i,:) = Re(iDFT(mask(i,:) .* DFT(W(i,:)))). Same shape as the input.
FilterMatrix transform(const FilterMatrix& w, const RealMatrix& mask_values);
FilterMatrix transform(const FilterMatrix& w, const Mask& m);

// Largest |imaginary part| of the inverse transform before the real part is
// taken; vanishes for frequency-symmetric masks.
double transform_imag_residue(const FilterMatrix& w, const RealMatrix& mask_values);

// Jacobian of the transform w.r.t. the weight row, mask held fixed:
// entry (k1, k2) = (1/N) sum_n mask(i,n) cos(2 pi (k1 - k2) n / N).
// Symmetric; identity when the mask row is all ones.
RealMatrix weight_jacobian(const Mask& m, std::size_t filter_index);
RealMatrix weight_jacobian_row(const std::vector<double>& mask_row);

// Jacobian of the transform w.r.t. the mask row, weights held fixed:
// entry (k1, k2) = (1/N) sum_n w(i,n) cos(2 pi (k1 - n) k2 / N).
RealMatrix mask_jacobian(const FilterMatrix& w, std::size_t filter_index);
RealMatrix mask_jacobian_row(const std::vector<double>& weight_row);

// Collapses a per-filter Jacobian stack (c_out x n x n, flattened outer-first)
// by summing over the second neuron axis: out(i, j1) = sum_j2 raw(i, j1, j2).
RealMatrix reduce_gradient(const std::vector<double>& raw, std::size_t c_out,
                           std::size_t n);

struct BackwardResult {
    RealMatrix grad_weights;    // c_out x n
    RealMatrix grad_mask;       // c_out x n
    RealMatrix grad_generator;  // c_out x c_out
};

// Chain-rule product of an upstream gradient with the transform Jacobians.
// grad_weights follows the fixed-mask path; when norm_path is set it also
// accumulates the dependence of the mask on the weights through the spectral
// norms (the mask is itself a function of the weights).
BackwardResult backward(const RealMatrix& upstream, const FilterMatrix& w,
                        const Mask& m, bool norm_path = true);

double sigmoid(double x);

}  // namespace fatq::spectral
