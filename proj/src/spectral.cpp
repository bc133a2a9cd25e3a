#include "fatq/spectral.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fatq::spectral {

double sigmoid(double x) {
    return 1.0 / (1.0 + std::exp(-x));
}

FilterMatrix flatten_weights(const Tensor4& w4d) {
    if (w4d.c_out == 0 || w4d.c_in == 0 || w4d.kh == 0 || w4d.kw == 0) {
        throw std::invalid_argument("flatten_weights: all dims must be >= 1");
    }
    FilterMatrix out;
    out.c_in = w4d.c_in;
    out.kh = w4d.kh;
    out.kw = w4d.kw;
    // (c_in, k_row, k_col) with the last index fastest is exactly the
    // row-major layout of the tensor, so rows are contiguous slices.
    out.data = RealMatrix(w4d.c_out, w4d.c_in * w4d.kh * w4d.kw);
    out.data.data = w4d.data;
    return out;
}

Tensor4 unflatten_weights(const FilterMatrix& w) {
    if (w.n() != w.c_in * w.kh * w.kw) {
        throw std::invalid_argument("unflatten_weights: shape meta inconsistent with n");
    }
    Tensor4 out(w.c_out(), w.c_in, w.kh, w.kw);
    out.data = w.data.data;
    return out;
}

SpectrumView spectrum(const FilterMatrix& w) {
    const std::size_t rows = w.c_out();
    const std::size_t n = w.n();
    SpectrumView view;
    view.freq_re = RealMatrix(rows, n);
    view.freq_im = RealMatrix(rows, n);
    view.norms = RealMatrix(rows, n);
    for (std::size_t i = 0; i < rows; ++i) {
        const ComplexVec f = numerics::dft(w.data.row(i));
        for (std::size_t k = 0; k < n; ++k) {
            view.freq_re(i, k) = f.re[k];
            view.freq_im(i, k) = f.im[k];
            view.norms(i, k) = f.modulus(k);
        }
    }
    return view;
}

Mask make_mask(const SpectrumView& spec, const RealMatrix& generator) {
    const std::size_t rows = spec.norms.rows;
    if (generator.rows != rows || generator.cols != rows) {
        throw std::invalid_argument("make_mask: generator must be c_out x c_out, got " +
                                    std::to_string(generator.rows) + "x" +
                                    std::to_string(generator.cols));
    }
    Mask m;
    m.generator = generator;
    m.values = numerics::matmul_transposed_a(generator, spec.norms);
    for (double& v : m.values.data) v = sigmoid(v);
    return m;
}

namespace {

void check_transform_shapes(const FilterMatrix& w, const RealMatrix& mask_values) {
    if (mask_values.rows != w.c_out() || mask_values.cols != w.n()) {
        throw std::invalid_argument("transform: mask/weight shape mismatch");
    }
}

}  // namespace

FilterMatrix transform(const FilterMatrix& w, const RealMatrix& mask_values) {
    check_transform_shapes(w, mask_values);
    FilterMatrix out = w;
    for (std::size_t i = 0; i < w.c_out(); ++i) {
        ComplexVec f = numerics::dft(w.data.row(i));
        for (std::size_t k = 0; k < w.n(); ++k) {
            f.re[k] *= mask_values(i, k);
            f.im[k] *= mask_values(i, k);
        }
        out.data.set_row(i, numerics::idft(f));
    }
    return out;
}

FilterMatrix transform(const FilterMatrix& w, const Mask& m) {
    return transform(w, m.values);
}

double transform_imag_residue(const FilterMatrix& w, const RealMatrix& mask_values) {
    check_transform_shapes(w, mask_values);
    double residue = 0.0;
    for (std::size_t i = 0; i < w.c_out(); ++i) {
        ComplexVec f = numerics::dft(w.data.row(i));
        for (std::size_t k = 0; k < w.n(); ++k) {
            f.re[k] *= mask_values(i, k);
            f.im[k] *= mask_values(i, k);
        }
        const ComplexVec inv = numerics::idft_complex(f);
        for (double v : inv.im) residue = std::max(residue, std::abs(v));
    }
    return residue;
}

RealMatrix weight_jacobian_row(const std::vector<double>& mask_row) {
    const std::size_t n = mask_row.size();
    const numerics::detail::TrigTable trig(n);
    // Entries depend on (k1 - k2) mod N only; precompute the N cosine sums.
    std::vector<double> by_offset(n, 0.0);
    for (std::size_t d = 0; d < n; ++d) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            s += mask_row[j] * trig.cos_table[d * j % n];
        }
        by_offset[d] = s / static_cast<double>(n);
    }
    RealMatrix jac(n, n);
    for (std::size_t k1 = 0; k1 < n; ++k1) {
        for (std::size_t k2 = 0; k2 < n; ++k2) {
            jac(k1, k2) = by_offset[(k1 + n - k2) % n];
        }
    }
    return jac;
}

RealMatrix weight_jacobian(const Mask& m, std::size_t filter_index) {
    if (filter_index >= m.values.rows) {
        throw std::invalid_argument("weight_jacobian: filter index out of range");
    }
    return weight_jacobian_row(m.values.row(filter_index));
}

RealMatrix mask_jacobian_row(const std::vector<double>& weight_row) {
    const std::size_t n = weight_row.size();
    const numerics::detail::TrigTable trig(n);
    RealMatrix jac(n, n);
    for (std::size_t k1 = 0; k1 < n; ++k1) {
        for (std::size_t k2 = 0; k2 < n; ++k2) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                // cos(2 pi (k1 - j) k2 / N); offsets wrap mod N.
                const std::size_t d = ((k1 + n - j) % n) * k2 % n;
                s += weight_row[j] * trig.cos_table[d];
            }
            jac(k1, k2) = s / static_cast<double>(n);
        }
    }
    return jac;
}

RealMatrix mask_jacobian(const FilterMatrix& w, std::size_t filter_index) {
    if (filter_index >= w.c_out()) {
        throw std::invalid_argument("mask_jacobian: filter index out of range");
    }
    return mask_jacobian_row(w.data.row(filter_index));
}

RealMatrix reduce_gradient(const std::vector<double>& raw, std::size_t c_out,
                           std::size_t n) {
    if (raw.size() != c_out * n * n) {
        throw std::invalid_argument("reduce_gradient: raw tensor must be c_out*n*n");
    }
    RealMatrix out(c_out, n);
    for (std::size_t i = 0; i < c_out; ++i) {
        for (std::size_t j1 = 0; j1 < n; ++j1) {
            double s = 0.0;
            const double* slice = raw.data() + (i * n + j1) * n;
            for (std::size_t j2 = 0; j2 < n; ++j2) s += slice[j2];
            out(i, j1) = s;
        }
    }
    return out;
}

BackwardResult backward(const RealMatrix& upstream, const FilterMatrix& w,
                        const Mask& m, bool norm_path) {
    const std::size_t rows = w.c_out();
    const std::size_t n = w.n();
    if (upstream.rows != rows || upstream.cols != n) {
        throw std::invalid_argument("spectral::backward: upstream shape mismatch");
    }
    if (m.values.rows != rows || m.values.cols != n) {
        throw std::invalid_argument("spectral::backward: mask shape mismatch");
    }
    if (m.generator.rows != rows || m.generator.cols != rows) {
        throw std::invalid_argument("spectral::backward: generator shape mismatch");
    }

    BackwardResult res;
    res.grad_weights = RealMatrix(rows, n);
    res.grad_mask = RealMatrix(rows, n);

    for (std::size_t i = 0; i < rows; ++i) {
        const std::vector<double> u = upstream.row(i);
        const RealMatrix jw = weight_jacobian_row(m.values.row(i));
        const RealMatrix jm = mask_jacobian_row(w.data.row(i));
        for (std::size_t k2 = 0; k2 < n; ++k2) {
            double gw = 0.0, gm = 0.0;
            for (std::size_t k1 = 0; k1 < n; ++k1) {
                gw += u[k1] * jw(k1, k2);
                gm += u[k1] * jm(k1, k2);
            }
            res.grad_weights(i, k2) = gw;
            res.grad_mask(i, k2) = gm;
        }
    }

    // Chain through the mask generation: M = sigmoid(P), P = G^T S.
    RealMatrix pre_grad(rows, n);  // dL/dP
    for (std::size_t idx = 0; idx < pre_grad.data.size(); ++idx) {
        const double mv = m.values.data[idx];
        pre_grad.data[idx] = res.grad_mask.data[idx] * mv * (1.0 - mv);
    }

    const SpectrumView spec = spectrum(w);
    res.grad_generator = numerics::matmul_transposed_b(spec.norms, pre_grad);

    if (norm_path) {
        // dL/dS = G * dL/dP, then through S(r,k) = |W_f(r,k)|.
        const numerics::detail::TrigTable trig(n);
        const RealMatrix ds = numerics::matmul(m.generator, pre_grad);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double norm = spec.norms(r, k);
                    if (norm == 0.0) continue;
                    const std::size_t t = k * j % n;
                    const double d_norm = (spec.freq_re(r, k) * trig.cos_table[t] -
                                           spec.freq_im(r, k) * trig.sin_table[t]) /
                                          norm;
                    acc += ds(r, k) * d_norm;
                }
                res.grad_weights(r, j) += acc;
            }
        }
    }
    return res;
}

}  // namespace fatq::spectral
