#pragma once

#include <cstdint>
#include <vector>

#include "fatq/numerics.hpp"
#include "fatq/quantizers.hpp"
#include "fatq/spectral.hpp"

namespace fatq::error_model {

using quantizers::Scheme;

// Parameters of the analytic quantization-error functions for a Laplace(0, b)
// weight population clipped at alpha with amplitude a = max|W|.
struct ErrorModelParams {
    double b = 1.0;
    double a = 1.0;
    double alpha = 1.0;
    int bitwidth = 4;
    Scheme scheme = Scheme::Uniform;

    void validate() const;
};

struct ErrorBreakdown {
    double quant_noise = 0.0;
    double clip_noise = 0.0;
    double total = 0.0;
};

// Expected rounding error inside the clip range, uniform levels:
// alpha^2 / (3 * 2^(2m)).
double quant_noise_uniform(double alpha, int bitwidth);

// Expected rounding error inside the clip range, power-of-two levels:
// (alpha^2 / 84) * (1 + 3 * 2^(-3*2^(m-1)+4)).
double quant_noise_log(double alpha, int bitwidth);

// Expected saturation error 2 * integral_alpha^a f(x) (x - alpha)^2 dx for the
// Laplace(0, b) density, in closed form:
// e^(-alpha/b) * [2 b^2 - e^(-c/b) (c^2 + 2 b c + 2 b^2)],  c = a - alpha.
double clip_noise(double alpha, double a, double b);

// Same quantity evaluated by quadrature on the defining integral (oracle path).
double clip_noise_quadrature(double alpha, double a, double b, double tol = 1e-12);

ErrorBreakdown total_error(const ErrorModelParams& p);

// d(total_error)/d(alpha) at fixed (a, b, m, scheme).
double total_error_derivative(const ErrorModelParams& p);

struct OptimalAlpha {
    double alpha = 0.0;
    bool at_boundary = false;  // set when no interior stationary point exists
};

// Stationary point of total_error over alpha in (0, a], by root bracketing on
// the analytic derivative.
OptimalAlpha optimal_alpha(double a, double b, int bitwidth, Scheme scheme,
                           double tol = 1e-10);

struct CurvePoint {
    double a = 0.0;
    double alpha_star = 0.0;
    bool at_boundary = false;
    ErrorBreakdown error;
};

// g(a): total error at the per-amplitude optimal clipping threshold.
std::vector<CurvePoint> error_vs_amplitude_curve(double b, int bitwidth, Scheme scheme,
                                                 const std::vector<double>& a_grid);

enum class MaskMode { Generated, AllOnes, Half };

struct MaskEffectStats {
    std::size_t trials = 0;
    std::size_t amplitude_ok = 0;  // max|W_t| <= max|W|
    std::size_t mse_ok = 0;        // MSE(W_t, Q(W_t)) <= MSE(W, Q(W))
    double amplitude_rate = 0.0;
    double mse_rate = 0.0;
};

// Empirical satisfaction rates of the amplitude-tightening and MSE-reduction
// properties of the spectral mask over random Laplace weight draws. Reports;
// asserts nothing.
MaskEffectStats mask_effect_stats(numerics::RngState& rng, double b, int bitwidth,
                                  Scheme scheme, std::size_t trials,
                                  std::size_t rows = 4, std::size_t cols = 16,
                                  MaskMode mode = MaskMode::Generated);

struct MseComparisonRow {
    bool is_fat = false;   // otherwise a plain beta-scaling row
    double beta = 1.0;
    double mse_w_wt = 0.0;   // distance between original and transformed weights
    double mse_wt_q = 0.0;   // distance between transformed and quantized weights
    double total = 0.0;
};

// Compares the spectral transform against plain amplitude scaling W_t = beta*W
// under MSE = MSE(W, W_t) + MSE(W_t, Q(W_t)).
std::vector<MseComparisonRow> mse_transform_comparison(
    const spectral::FilterMatrix& w, const spectral::Mask& m,
    const std::vector<double>& betas, const quantizers::QuantConfig& cfg);

}  // namespace fatq::error_model
