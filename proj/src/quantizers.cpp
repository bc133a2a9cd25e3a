#include "fatq/quantizers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fatq::quantizers {

std::string scheme_name(Scheme s) {
    return s == Scheme::Uniform ? "uniform" : "log";
}

Scheme scheme_from_name(const std::string& name) {
    if (name == "uniform") return Scheme::Uniform;
    if (name == "log" || name == "logarithmic") return Scheme::Logarithmic;
    throw std::invalid_argument("unknown quantization scheme: " + name);
}

void QuantConfig::validate() const {
    if (bitwidth < 2) {
        throw std::invalid_argument("QuantConfig: bitwidth must be >= 2, got " +
                                    std::to_string(bitwidth));
    }
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw std::invalid_argument("QuantConfig: alpha must be positive and finite");
    }
}

namespace {

// Unsigned normalized levels for an m-bit code, ascending, 2^m members.
std::vector<double> unsigned_levels(int m, Scheme scheme) {
    const std::int64_t count = std::int64_t{1} << m;
    std::vector<double> levels;
    levels.reserve(count);
    if (scheme == Scheme::Uniform) {
        const double denom = static_cast<double>(count - 1);
        for (std::int64_t k = 0; k < count; ++k) {
            levels.push_back(static_cast<double>(k) / denom);
        }
    } else {
        levels.push_back(0.0);
        for (std::int64_t e = -count + 2; e <= 0; ++e) {
            levels.push_back(std::ldexp(1.0, static_cast<int>(e)));
        }
    }
    return levels;
}

// Positive half (including 0) of the level set actually used for projection.
std::vector<double> projection_levels(const QuantConfig& cfg) {
    return unsigned_levels(cfg.is_signed ? cfg.bitwidth - 1 : cfg.bitwidth, cfg.scheme);
}

double clip_value(double x, const QuantConfig& cfg) {
    const double lo = cfg.is_signed ? -cfg.alpha : 0.0;
    return std::clamp(x, lo, cfg.alpha);
}

// Nearest entry of a sorted ascending level list; ties pick the larger level.
std::size_t nearest_level_index(const std::vector<double>& levels, double y) {
    const auto it = std::lower_bound(levels.begin(), levels.end(), y);
    if (it == levels.begin()) return 0;
    if (it == levels.end()) return levels.size() - 1;
    const std::size_t hi = static_cast<std::size_t>(it - levels.begin());
    const std::size_t lo = hi - 1;
    const double d_lo = y - levels[lo];
    const double d_hi = levels[hi] - y;
    return d_hi <= d_lo ? hi : lo;
}

}  // namespace

std::vector<double> level_set(const QuantConfig& cfg) {
    cfg.validate();
    const std::vector<double> pos = projection_levels(cfg);
    if (!cfg.is_signed) return pos;
    std::vector<double> levels;
    levels.reserve(2 * pos.size() - 1);
    for (auto it = pos.rbegin(); it != pos.rend(); ++it) {
        if (*it > 0.0) levels.push_back(-*it);
    }
    levels.insert(levels.end(), pos.begin(), pos.end());
    return levels;
}

namespace {

// Index into the positive half-set of the level nearest to mag in [0, 1].
std::size_t positive_index(double mag, const QuantConfig& cfg) {
    if (cfg.scheme == Scheme::Uniform) {
        const std::int64_t denom =
            (std::int64_t{1} << (cfg.is_signed ? cfg.bitwidth - 1 : cfg.bitwidth)) - 1;
        // std::round breaks ties away from zero, matching the level midpoint rule.
        return static_cast<std::size_t>(std::round(mag * static_cast<double>(denom)));
    }
    const std::vector<double> pos = projection_levels(cfg);
    return nearest_level_index(pos, mag);
}

double positive_level(std::size_t index, const QuantConfig& cfg) {
    if (cfg.scheme == Scheme::Uniform) {
        const std::int64_t denom =
            (std::int64_t{1} << (cfg.is_signed ? cfg.bitwidth - 1 : cfg.bitwidth)) - 1;
        return static_cast<double>(index) / static_cast<double>(denom);
    }
    return projection_levels(cfg)[index];
}

}  // namespace

double quantize(double x, const QuantConfig& cfg) {
    cfg.validate();
    if (std::isnan(x)) throw std::runtime_error("quantize: NaN input");
    const double xc = clip_value(x, cfg);
    const double mag = std::abs(xc) / cfg.alpha;
    const double value = cfg.alpha * positive_level(positive_index(mag, cfg), cfg);
    return xc < 0.0 ? -value : value;
}

std::vector<double> quantize(const std::vector<double>& x, const QuantConfig& cfg) {
    cfg.validate();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::isnan(x[i])) {
            throw std::runtime_error("quantize: NaN input at index " + std::to_string(i));
        }
        out[i] = quantize(x[i], cfg);
    }
    return out;
}

std::size_t quantize_index(double x, const QuantConfig& cfg) {
    cfg.validate();
    if (std::isnan(x)) throw std::runtime_error("quantize_index: NaN input");
    const double xc = clip_value(x, cfg);
    const std::size_t k = positive_index(std::abs(xc) / cfg.alpha, cfg);
    if (!cfg.is_signed) return k;
    const std::size_t pos_count =
        static_cast<std::size_t>(std::int64_t{1} << (cfg.bitwidth - 1));
    return xc < 0.0 ? pos_count - 1 - k : pos_count - 1 + k;
}

double clip_surrogate(double x, const QuantConfig& cfg) {
    return clip_value(x, cfg);
}

std::vector<double> ste_grad_mask(const std::vector<double>& x, const QuantConfig& cfg) {
    cfg.validate();
    std::vector<double> mask(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const bool inside = cfg.is_signed ? std::abs(x[i]) < cfg.alpha
                                          : (x[i] >= 0.0 && x[i] < cfg.alpha);
        mask[i] = inside ? 1.0 : 0.0;
    }
    return mask;
}

double alpha_grad_weight(const std::vector<double>& upstream,
                         const std::vector<double>& w_t, const QuantConfig& cfg) {
    cfg.validate();
    if (upstream.size() != w_t.size()) {
        throw std::invalid_argument("alpha_grad_weight: shape mismatch");
    }
    double grad = 0.0;
    for (std::size_t i = 0; i < w_t.size(); ++i) {
        if (std::abs(w_t[i]) > cfg.alpha) {
            grad += upstream[i] * (w_t[i] > 0.0 ? 1.0 : -1.0);
        }
    }
    return grad;
}

double alpha_grad_activation(const std::vector<double>& upstream,
                             const std::vector<double>& a, const QuantConfig& cfg) {
    cfg.validate();
    if (upstream.size() != a.size()) {
        throw std::invalid_argument("alpha_grad_activation: shape mismatch");
    }
    double grad = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > cfg.alpha) grad += upstream[i];
    }
    return grad;
}

}  // namespace fatq::quantizers
