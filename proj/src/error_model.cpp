#include "fatq/error_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fatq::error_model {

void ErrorModelParams::validate() const {
    if (!(b > 0.0)) throw std::invalid_argument("ErrorModelParams: b must be positive");
    if (!(a > 0.0)) throw std::invalid_argument("ErrorModelParams: a must be positive");
    if (!(alpha > 0.0) || alpha > a) {
        throw std::invalid_argument("ErrorModelParams: need 0 < alpha <= a");
    }
    if (bitwidth < 2) throw std::invalid_argument("ErrorModelParams: bitwidth must be >= 2");
}

double quant_noise_uniform(double alpha, int bitwidth) {
    return alpha * alpha / (3.0 * std::ldexp(1.0, 2 * bitwidth));
}

double quant_noise_log(double alpha, int bitwidth) {
    const double correction = 3.0 * std::ldexp(1.0, -3 * (1 << (bitwidth - 1)) + 4);
    return alpha * alpha / 84.0 * (1.0 + correction);
}

double clip_noise(double alpha, double a, double b) {
    if (!(b > 0.0)) throw std::invalid_argument("clip_noise: b must be positive");
    if (!(alpha > 0.0) || alpha > a) {
        throw std::invalid_argument("clip_noise: need 0 < alpha <= a");
    }
    const double c = a - alpha;
    return std::exp(-alpha / b) *
           (2.0 * b * b - std::exp(-c / b) * (c * c + 2.0 * b * c + 2.0 * b * b));
}

double clip_noise_quadrature(double alpha, double a, double b, double tol) {
    if (!(b > 0.0)) throw std::invalid_argument("clip_noise_quadrature: b must be positive");
    if (!(alpha > 0.0) || alpha > a) {
        throw std::invalid_argument("clip_noise_quadrature: need 0 < alpha <= a");
    }
    const auto integrand = [alpha, b](double x) {
        const double d = x - alpha;
        return 0.5 / b * std::exp(-x / b) * d * d;
    };
    return 2.0 * numerics::integrate(integrand, alpha, a, tol);
}

ErrorBreakdown total_error(const ErrorModelParams& p) {
    p.validate();
    ErrorBreakdown out;
    out.quant_noise = p.scheme == Scheme::Uniform ? quant_noise_uniform(p.alpha, p.bitwidth)
                                                  : quant_noise_log(p.alpha, p.bitwidth);
    out.clip_noise = clip_noise(p.alpha, p.a, p.b);
    out.total = out.quant_noise + out.clip_noise;
    return out;
}

double total_error_derivative(const ErrorModelParams& p) {
    p.validate();
    double d_quant;
    if (p.scheme == Scheme::Uniform) {
        d_quant = 2.0 * p.alpha / (3.0 * std::ldexp(1.0, 2 * p.bitwidth));
    } else {
        const double correction = 3.0 * std::ldexp(1.0, -3 * (1 << (p.bitwidth - 1)) + 4);
        d_quant = p.alpha / 42.0 * (1.0 + correction);
    }
    const double d_clip = 2.0 * std::exp(-p.a / p.b) * (p.a + p.b - p.alpha) -
                          2.0 * p.b * std::exp(-p.alpha / p.b);
    return d_quant + d_clip;
}

OptimalAlpha optimal_alpha(double a, double b, int bitwidth, Scheme scheme, double tol) {
    if (!(a > 0.0) || !(b > 0.0)) {
        throw std::invalid_argument("optimal_alpha: a and b must be positive");
    }
    if (bitwidth < 2) throw std::invalid_argument("optimal_alpha: bitwidth must be >= 2");
    const double lo = a * 1e-12;
    const auto derivative = [&](double alpha) {
        // Secant steps may probe just outside the bracket; the closed form is
        // smooth, so evaluate at the clamped point instead of rejecting it.
        ErrorModelParams p{b, a, std::clamp(alpha, lo, a), bitwidth, scheme};
        return total_error_derivative(p);
    };
    // The derivative is negative at 0+ and positive at a for this family; the
    // boundary return is a safety net for bracketing failures.
    if (derivative(lo) > 0.0 || derivative(a) < 0.0) {
        return {a, true};
    }
    OptimalAlpha out;
    out.alpha = numerics::find_root(derivative, lo, a, tol);
    out.at_boundary = false;
    return out;
}

std::vector<CurvePoint> error_vs_amplitude_curve(double b, int bitwidth, Scheme scheme,
                                                 const std::vector<double>& a_grid) {
    std::vector<CurvePoint> curve;
    curve.reserve(a_grid.size());
    for (double a : a_grid) {
        if (!(a > 0.0)) throw std::invalid_argument("error_vs_amplitude_curve: a must be positive");
        CurvePoint pt;
        pt.a = a;
        const OptimalAlpha opt = optimal_alpha(a, b, bitwidth, scheme);
        pt.alpha_star = opt.alpha;
        pt.at_boundary = opt.at_boundary;
        pt.error = total_error({b, a, opt.alpha, bitwidth, scheme});
        curve.push_back(pt);
    }
    return curve;
}

namespace {

double mean_sq_diff(const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        s += d * d;
    }
    return s / static_cast<double>(x.size());
}

double max_abs(const std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

// Empirical MSE between a tensor and its quantization at the model-optimal
// threshold for the tensor's own amplitude.
double mse_at_optimal_alpha(const std::vector<double>& values, double b, int bitwidth,
                            Scheme scheme) {
    const double a = max_abs(values);
    if (a == 0.0) return 0.0;
    quantizers::QuantConfig cfg;
    cfg.bitwidth = bitwidth;
    cfg.scheme = scheme;
    cfg.is_signed = true;
    cfg.alpha = optimal_alpha(a, b, bitwidth, scheme).alpha;
    return mean_sq_diff(values, quantizers::quantize(values, cfg));
}

}  // namespace

MaskEffectStats mask_effect_stats(numerics::RngState& rng, double b, int bitwidth,
                                  Scheme scheme, std::size_t trials, std::size_t rows,
                                  std::size_t cols, MaskMode mode) {
    if (trials == 0) throw std::invalid_argument("mask_effect_stats: trials must be >= 1");
    if (rows == 0 || cols == 0) {
        throw std::invalid_argument("mask_effect_stats: rows/cols must be >= 1");
    }
    MaskEffectStats stats;
    stats.trials = trials;
    for (std::size_t t = 0; t < trials; ++t) {
        spectral::FilterMatrix w;
        w.c_in = cols;
        w.data = numerics::RealMatrix(rows, cols);
        const std::vector<double> draw = numerics::sample_laplace(rng, b, rows * cols);
        w.data.data = draw;

        spectral::Mask mask;
        mask.generator = numerics::RealMatrix(rows, rows);
        if (mode == MaskMode::AllOnes || mode == MaskMode::Half) {
            mask.values = numerics::RealMatrix(rows, cols, mode == MaskMode::AllOnes ? 1.0 : 0.5);
        } else {
            const spectral::SpectrumView spec = spectral::spectrum(w);
            double mean_norm = 0.0;
            for (double v : spec.norms.data) mean_norm += v;
            mean_norm /= static_cast<double>(spec.norms.data.size());
            // Spread the pre-sigmoid activations over the sigmoid's active range.
            const double scale = mean_norm > 0.0
                                     ? 2.0 / (mean_norm * std::sqrt(static_cast<double>(rows)))
                                     : 1.0;
            for (double& g : mask.generator.data) g = rng.next_gaussian() * scale;
            mask = spectral::make_mask(spec, mask.generator);
        }

        const spectral::FilterMatrix wt = spectral::transform(w, mask.values);
        // Ulp-level slack keeps the identity transform counted as satisfying
        // both inequalities with equality.
        if (max_abs(wt.data.data) <= max_abs(w.data.data) * (1.0 + 1e-12)) {
            ++stats.amplitude_ok;
        }
        const double mse_orig = mse_at_optimal_alpha(w.data.data, b, bitwidth, scheme);
        const double mse_trans = mse_at_optimal_alpha(wt.data.data, b, bitwidth, scheme);
        if (mse_trans <= mse_orig * (1.0 + 1e-9)) ++stats.mse_ok;
    }
    stats.amplitude_rate = static_cast<double>(stats.amplitude_ok) / static_cast<double>(trials);
    stats.mse_rate = static_cast<double>(stats.mse_ok) / static_cast<double>(trials);
    return stats;
}

std::vector<MseComparisonRow> mse_transform_comparison(
    const spectral::FilterMatrix& w, const spectral::Mask& m,
    const std::vector<double>& betas, const quantizers::QuantConfig& cfg) {
    cfg.validate();
    for (double beta : betas) {
        if (!(beta > 0.0) || beta > 1.0) {
            throw std::invalid_argument("mse_transform_comparison: betas must lie in (0, 1]");
        }
    }
    std::vector<MseComparisonRow> rows;
    rows.reserve(betas.size() + 1);
    const std::vector<double>& orig = w.data.data;
    for (double beta : betas) {
        std::vector<double> scaled(orig.size());
        for (std::size_t i = 0; i < orig.size(); ++i) scaled[i] = beta * orig[i];
        MseComparisonRow row;
        row.is_fat = false;
        row.beta = beta;
        row.mse_w_wt = mean_sq_diff(orig, scaled);
        row.mse_wt_q = mean_sq_diff(scaled, quantizers::quantize(scaled, cfg));
        row.total = row.mse_w_wt + row.mse_wt_q;
        rows.push_back(row);
    }
    const spectral::FilterMatrix wt = spectral::transform(w, m);
    MseComparisonRow fat_row;
    fat_row.is_fat = true;
    fat_row.mse_w_wt = mean_sq_diff(orig, wt.data.data);
    fat_row.mse_wt_q = mean_sq_diff(wt.data.data, quantizers::quantize(wt.data.data, cfg));
    fat_row.total = fat_row.mse_w_wt + fat_row.mse_wt_q;
    rows.push_back(fat_row);
    return rows;
}

}  // namespace fatq::error_model
