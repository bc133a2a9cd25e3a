#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fatq::quantizers {

enum class Scheme { Uniform, Logarithmic };

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

// Bitwidth, scheme, signedness and clipping threshold. Defines the level set.
struct QuantConfig {
    int bitwidth = 4;
    Scheme scheme = Scheme::Uniform;
    bool is_signed = true;
    double alpha = 1.0;

    void validate() const;
};

// Normalized quantization levels, sorted ascending.
// Unsigned sets live in [0, 1] and have 2^m members; signed sets are the
// (m-1)-bit unsigned set symmetrized about 0 (2^m - 1 members in [-1, 1]).
std::vector<double> level_set(const QuantConfig& cfg);

// Clips to the representable range and projects onto alpha-scaled levels.
// Ties at level midpoints round away from zero.
double quantize(double x, const QuantConfig& cfg);
std::vector<double> quantize(const std::vector<double>& x, const QuantConfig& cfg);

// Index of the chosen level within level_set(cfg), used for level histograms.
std::size_t quantize_index(double x, const QuantConfig& cfg);

// Clip-only surrogate: the function whose exact derivative the STE pass-through
// assumes. Used by gradient checks in place of quantize.
double clip_surrogate(double x, const QuantConfig& cfg);

// Pass-through indicator: 1 inside the clip range, 0 where clipped.
// Signed: |x| < alpha.  Unsigned: 0 <= x < alpha.
std::vector<double> ste_grad_mask(const std::vector<double>& x, const QuantConfig& cfg);

// d(loss)/d(alpha) for weights: sum of upstream * sign(w) over clipped entries.
double alpha_grad_weight(const std::vector<double>& upstream,
                         const std::vector<double>& w_t, const QuantConfig& cfg);

// d(loss)/d(alpha) for activations: sum of upstream over entries above alpha.
double alpha_grad_activation(const std::vector<double>& upstream,
                             const std::vector<double>& a, const QuantConfig& cfg);

}  // namespace fatq::quantizers
