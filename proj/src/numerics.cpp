#include "fatq/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

namespace fatq::numerics {

ComplexVec::ComplexVec(std::vector<double> r, std::vector<double> i)
    : re(std::move(r)), im(std::move(i)) {
    if (re.size() != im.size()) {
        throw std::invalid_argument("ComplexVec: re/im length mismatch (" +
                                    std::to_string(re.size()) + " vs " +
                                    std::to_string(im.size()) + ")");
    }
}

double ComplexVec::modulus(std::size_t k) const {
    return std::hypot(re[k], im[k]);
}

std::vector<double> RealMatrix::row(std::size_t i) const {
    return std::vector<double>(data.begin() + i * cols, data.begin() + (i + 1) * cols);
}

void RealMatrix::set_row(std::size_t i, const std::vector<double>& values) {
    if (values.size() != cols) {
        throw std::invalid_argument("RealMatrix::set_row: width mismatch");
    }
    std::copy(values.begin(), values.end(), data.begin() + i * cols);
}

RealMatrix RealMatrix::identity(std::size_t n) {
    RealMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool operator==(const RealMatrix& a, const RealMatrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

RealMatrix matmul(const RealMatrix& a, const RealMatrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dim mismatch");
    RealMatrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) {
                c(i, j) += aik * b(k, j);
            }
        }
    }
    return c;
}

RealMatrix matmul_transposed_a(const RealMatrix& a, const RealMatrix& b) {
    if (a.rows != b.rows) throw std::invalid_argument("matmul_transposed_a: dim mismatch");
    RealMatrix c(a.cols, b.cols);
    for (std::size_t k = 0; k < a.rows; ++k) {
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double aki = a(k, i);
            if (aki == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) {
                c(i, j) += aki * b(k, j);
            }
        }
    }
    return c;
}

RealMatrix matmul_transposed_b(const RealMatrix& a, const RealMatrix& b) {
    if (a.cols != b.cols) throw std::invalid_argument("matmul_transposed_b: dim mismatch");
    RealMatrix c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < b.rows; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * b(j, k);
            c(i, j) = s;
        }
    }
    return c;
}

RngState::RngState(std::uint64_t seed) : seed_(seed), engine_(seed) {}

std::uint64_t RngState::next_u64() { return engine_(); }

double RngState::next_uniform01() {
    // 53-bit mantissa plus a half-ulp offset keeps the value in the open interval.
    const std::uint64_t bits = next_u64() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double RngState::next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_uniform01();
}

double RngState::next_gaussian() {
    const double u1 = next_uniform01();
    const double u2 = next_uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t RngState::next_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("next_index: n must be positive");
    // Modulo bias is negligible for the small ranges used here.
    return next_u64() % n;
}

std::uint64_t RngState::derive_seed(std::uint64_t tag) const {
    // splitmix64 finalizer over seed^tag; stable and well mixed.
    std::uint64_t z = seed_ ^ (tag * 0x9E3779B97F4A7C15ull);
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

void RngState::save(std::ostream& out) const {
    out << seed_ << ' ' << engine_;
}

void RngState::load(std::istream& in) {
    in >> seed_ >> engine_;
    if (!in) throw std::runtime_error("RngState::load: malformed stream state");
}

bool RngState::operator==(const RngState& other) const {
    return seed_ == other.seed_ && engine_ == other.engine_;
}

namespace detail {

// cos/sin of 2 pi t / n for t = 0..n-1; every twiddle factor used by the
// O(N^2) transforms is one of these n angles.
TrigTable::TrigTable(std::size_t n) : cos_table(n), sin_table(n) {
    for (std::size_t t = 0; t < n; ++t) {
        const double theta = 2.0 * M_PI * static_cast<double>(t) / static_cast<double>(n);
        cos_table[t] = std::cos(theta);
        sin_table[t] = std::sin(theta);
    }
}

}  // namespace detail

ComplexVec dft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    if (n == 0) throw std::invalid_argument("dft: empty input");
    const detail::TrigTable trig(n);
    ComplexVec out(n);
    for (std::size_t k = 0; k < n; ++k) {
        double re = 0.0, im = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t t = k * j % n;
            re += x[j] * trig.cos_table[t];
            im -= x[j] * trig.sin_table[t];
        }
        out.re[k] = re;
        out.im[k] = im;
    }
    return out;
}

ComplexVec idft_complex(const ComplexVec& x) {
    if (x.re.size() != x.im.size()) {
        throw std::invalid_argument("idft: re/im length mismatch");
    }
    const std::size_t n = x.size();
    if (n == 0) throw std::invalid_argument("idft: empty input");
    const detail::TrigTable trig(n);
    ComplexVec out(n);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
        double re = 0.0, im = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t t = k * j % n;
            const double c = trig.cos_table[t];
            const double s = trig.sin_table[t];
            re += x.re[k] * c - x.im[k] * s;
            im += x.re[k] * s + x.im[k] * c;
        }
        out.re[j] = re * inv_n;
        out.im[j] = im * inv_n;
    }
    return out;
}

std::vector<double> idft(const ComplexVec& x) {
    return idft_complex(x).re;
}

std::vector<double> sample_laplace(RngState& rng, double b, std::size_t n) {
    if (!(b > 0.0)) throw std::invalid_argument("sample_laplace: scale b must be positive");
    if (n == 0) throw std::invalid_argument("sample_laplace: n must be positive");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.next_uniform01() - 0.5;  // (-1/2, 1/2)
        const double t = 1.0 - 2.0 * std::abs(u);     // (0, 1]
        out[i] = (u >= 0.0 ? -b : b) * std::log(t);
    }
    return out;
}

RealMatrix finite_diff_jacobian(const VectorFn& f, const std::vector<double>& x, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_jacobian: h must be positive");
    std::vector<double> xp = x;
    const std::size_t n = x.size();
    std::size_t m = 0;
    RealMatrix jac;
    for (std::size_t j = 0; j < n; ++j) {
        xp[j] = x[j] + h;
        const std::vector<double> fp = f(xp);
        xp[j] = x[j] - h;
        const std::vector<double> fm = f(xp);
        xp[j] = x[j];
        if (j == 0) {
            m = fp.size();
            jac = RealMatrix(m, n);
        }
        if (fp.size() != m || fm.size() != m) {
            throw std::runtime_error("finite_diff_jacobian: inconsistent output size");
        }
        for (std::size_t i = 0; i < m; ++i) {
            const double d = (fp[i] - fm[i]) / (2.0 * h);
            if (!std::isfinite(d)) {
                throw std::runtime_error("finite_diff_jacobian: non-finite value at output " +
                                         std::to_string(i) + ", input " + std::to_string(j));
            }
            jac(i, j) = d;
        }
    }
    return jac;
}

namespace {

double simpson_panel(double fa, double fm, double fb, double h) {
    return (h / 6.0) * (fa + 4.0 * fm + fb);
}

double adaptive_simpson(const ScalarFn& f, double a, double b, double fa, double fm,
                        double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = simpson_panel(fa, flm, fm, m - a);
    const double right = simpson_panel(fm, frm, fb, b - m);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;  // Richardson correction
    }
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double integrate(const ScalarFn& f, double lo, double hi, double tol) {
    if (lo > hi) throw std::invalid_argument("integrate: lo > hi");
    if (lo == hi) return 0.0;
    const double fa = f(lo);
    const double fb = f(hi);
    const double m = 0.5 * (lo + hi);
    const double fm = f(m);
    const double whole = simpson_panel(fa, fm, fb, hi - lo);
    return adaptive_simpson(f, lo, hi, fa, fm, fb, whole, tol, 48);
}

double find_root(const ScalarFn& g, double lo, double hi, double tol) {
    if (lo > hi) throw std::invalid_argument("find_root: lo > hi");
    double glo = g(lo);
    double ghi = g(hi);
    if (std::abs(glo) <= tol) return lo;
    if (std::abs(ghi) <= tol) return hi;
    if (glo * ghi > 0.0) {
        throw BracketingError("find_root: g(lo) and g(hi) have the same sign");
    }
    double best_x = lo, best_g = std::abs(glo);
    if (std::abs(ghi) < best_g) { best_x = hi; best_g = std::abs(ghi); }
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if (std::abs(gm) < best_g) { best_x = mid; best_g = std::abs(gm); }
        if (best_g <= tol) break;
        if ((glo < 0.0) == (gm < 0.0)) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
            ghi = gm;
        }
        if (hi - lo <= std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(mid))) {
            break;
        }
    }
    // Secant polish from the bisection result.
    double x0 = lo, x1 = hi, g0 = glo, g1 = ghi;
    for (int iter = 0; iter < 10 && best_g > tol; ++iter) {
        const double denom = g1 - g0;
        if (denom == 0.0) break;
        const double x2 = x1 - g1 * (x1 - x0) / denom;
        if (!std::isfinite(x2)) break;
        const double g2 = g(x2);
        if (std::abs(g2) < best_g) { best_x = x2; best_g = std::abs(g2); }
        x0 = x1; g0 = g1;
        x1 = x2; g1 = g2;
    }
    if (best_g > tol) {
        throw std::runtime_error("find_root: tolerance not reached (best residual " +
                                 std::to_string(best_g) + ")");
    }
    return best_x;
}

}  // namespace fatq::numerics
