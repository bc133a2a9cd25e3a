#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace fatq::numerics {

// Complex vector stored as parallel real/imaginary sequences.
struct ComplexVec {
    std::vector<double> re;
    std::vector<double> im;

    ComplexVec() = default;
    explicit ComplexVec(std::size_t n) : re(n, 0.0), im(n, 0.0) {}
    ComplexVec(std::vector<double> r, std::vector<double> i);

    std::size_t size() const { return re.size(); }
    double modulus(std::size_t k) const;
};

// Dense row-major matrix of doubles.
struct RealMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    RealMatrix() = default;
    RealMatrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::vector<double> row(std::size_t i) const;
    void set_row(std::size_t i, const std::vector<double>& values);

    static RealMatrix identity(std::size_t n);
};

bool operator==(const RealMatrix& a, const RealMatrix& b);

// C = A * B
RealMatrix matmul(const RealMatrix& a, const RealMatrix& b);
// C = A^T * B
RealMatrix matmul_transposed_a(const RealMatrix& a, const RealMatrix& b);
// C = A * B^T
RealMatrix matmul_transposed_b(const RealMatrix& a, const RealMatrix& b);

// Deterministic random stream. The engine is std::mt19937_64 (sequence fixed
// by the standard); uniform doubles are derived with an explicit bit mapping
// so the stream does not depend on library distribution internals.
class RngState {
  public:
    explicit RngState(std::uint64_t seed = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next_u64();
    // Uniform on (0,1), strictly excluding both endpoints.
    double next_uniform01();
    // Uniform on [lo, hi).
    double next_uniform(double lo, double hi);
    // Standard normal via Box-Muller (two uniform draws per call).
    double next_gaussian();
    // Integer in [0, n).
    std::uint64_t next_index(std::uint64_t n);

    // Derives an independent seed for a sub-stream, stable across runs.
    std::uint64_t derive_seed(std::uint64_t tag) const;

    void save(std::ostream& out) const;
    void load(std::istream& in);

    bool operator==(const RngState& other) const;

  private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

namespace detail {

// Shared twiddle-factor table for the O(N^2) transform loops.
struct TrigTable {
    explicit TrigTable(std::size_t n);
    std::vector<double> cos_table;
    std::vector<double> sin_table;
};

}  // namespace detail

// Unnormalized forward DFT: X(k) = sum_n x(n) * e^{-j 2 pi k n / N}.
// Direct O(N^2) evaluation; filter lengths in this project are small.
ComplexVec dft(const std::vector<double>& x);

// Inverse DFT returning the real part only: x(n) = Re[(1/N) sum_k X(k) e^{+j 2 pi k n / N}].
std::vector<double> idft(const ComplexVec& x);

// Full complex inverse, used where the imaginary residue itself is of interest.
ComplexVec idft_complex(const ComplexVec& x);

// n i.i.d. draws from Laplace(0, b) via inverse CDF of a uniform deviate.
std::vector<double> sample_laplace(RngState& rng, double b, std::size_t n);

// Central finite differences: entry (i, j) = (f(x + h e_j)_i - f(x - h e_j)_i) / (2h).
using VectorFn = std::function<std::vector<double>(const std::vector<double>&)>;
RealMatrix finite_diff_jacobian(const VectorFn& f, const std::vector<double>& x,
                                double h = 1e-6);

// Adaptive Simpson quadrature with absolute tolerance.
using ScalarFn = std::function<double(double)>;
double integrate(const ScalarFn& f, double lo, double hi, double tol = 1e-10);

struct BracketingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bisection on [lo, hi] (g must change sign), polished by secant steps.
// Returns x* with |g(x*)| <= tol.
double find_root(const ScalarFn& g, double lo, double hi, double tol);

}  // namespace fatq::numerics
