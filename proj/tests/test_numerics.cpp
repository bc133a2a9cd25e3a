#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "fatq/numerics.hpp"

using namespace fatq::numerics;

namespace {

// Brute-force forward DFT straight from the defining sum, kept independent of
// the library path (no shared helpers, no modular index reduction).
ComplexVec dft_oracle(const std::vector<double>& x) {
    const std::size_t n = x.size();
    ComplexVec out(n);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < n; ++j) {
            const double angle = -2.0 * M_PI * static_cast<double>(k) *
                                 static_cast<double>(j) / static_cast<double>(n);
            out.re[k] += x[j] * std::cos(angle);
            out.im[k] += x[j] * std::sin(angle);
        }
    }
    return out;
}

std::vector<double> idft_oracle(const ComplexVec& f) {
    const std::size_t n = f.size();
    std::vector<double> out(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
            const double angle = 2.0 * M_PI * static_cast<double>(k) *
                                 static_cast<double>(j) / static_cast<double>(n);
            out[j] += f.re[k] * std::cos(angle) - f.im[k] * std::sin(angle);
        }
        out[j] /= static_cast<double>(n);
    }
    return out;
}

std::vector<double> random_vector(RngState& rng, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.next_uniform(lo, hi);
    return v;
}

}  // namespace

TEST_SUITE("numerics") {

TEST_CASE("dft of constant signal is pure dc") {
    const ComplexVec f = dft({1.0, 1.0, 1.0, 1.0});
    CHECK(f.re[0] == doctest::Approx(4.0).epsilon(1e-12));
    for (std::size_t k = 1; k < 4; ++k) {
        CHECK(std::abs(f.re[k]) < 1e-12);
    }
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(std::abs(f.im[k]) < 1e-12);
    }
}

TEST_CASE("dft of alternating signal concentrates at the nyquist bin") {
    const ComplexVec f = dft({1.0, -1.0, 1.0, -1.0});
    const double expected[] = {0.0, 0.0, 4.0, 0.0};
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(f.re[k] == doctest::Approx(expected[k]).epsilon(1e-12));
        CHECK(std::abs(f.im[k]) < 1e-12);
    }
}

TEST_CASE("dft of zeros is zero") {
    const ComplexVec f = dft(std::vector<double>(8, 0.0));
    for (std::size_t k = 0; k < 8; ++k) {
        CHECK(f.re[k] == 0.0);
        CHECK(f.im[k] == 0.0);
    }
}

TEST_CASE("dft rejects empty input") {
    CHECK_THROWS_AS(dft({}), std::invalid_argument);
}

TEST_CASE("dft matches the brute-force oracle on random vectors") {
    RngState rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 1 + rng.next_index(24);
        const std::vector<double> x = random_vector(rng, n, -5.0, 5.0);
        const ComplexVec got = dft(x);
        const ComplexVec want = dft_oracle(x);
        for (std::size_t k = 0; k < n; ++k) {
            CHECK(got.re[k] == doctest::Approx(want.re[k]).epsilon(1e-9));
            CHECK(got.im[k] == doctest::Approx(want.im[k]).epsilon(1e-9));
        }
    }
}

TEST_CASE("idft inverts dft") {
    const std::vector<double> x = {3.0, 1.0, 4.0, 1.0};
    const std::vector<double> back = idft(dft(x));
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(std::abs(back[i] - x[i]) < 1e-12);
    }
}

TEST_CASE("idft of dc spectrum is constant") {
    ComplexVec f(4);
    f.re = {4.0, 0.0, 0.0, 0.0};
    const std::vector<double> x = idft(f);
    for (double v : x) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("idft of masked spectrum stays real and matches direct summation") {
    ComplexVec f(4);
    f.re = {0.0, 2.0, 0.0, 2.0};
    const std::vector<double> got = idft(f);
    const std::vector<double> want = idft_oracle(f);
    const double expected[] = {1.0, 0.0, -1.0, 0.0};
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-12));
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("idft rejects mismatched re/im lengths") {
    ComplexVec f;
    f.re = {1.0, 2.0};
    f.im = {0.0};
    CHECK_THROWS_AS(idft(f), std::invalid_argument);
}

TEST_CASE("round trip holds for random vectors across sizes") {
    RngState rng(1234);
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t n = 1 + rng.next_index(64);
        const std::vector<double> x = random_vector(rng, n, -1000.0, 1000.0);
        const std::vector<double> back = idft(dft(x));
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(back[i] - x[i]) <= 1e-10);
        }
    }
}

TEST_CASE("parseval identity holds") {
    RngState rng(5);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 1 + rng.next_index(48);
        const std::vector<double> x = random_vector(rng, n, -3.0, 3.0);
        const ComplexVec f = dft(x);
        double time_energy = 0.0, freq_energy = 0.0;
        for (double v : x) time_energy += v * v;
        for (std::size_t k = 0; k < n; ++k) {
            freq_energy += f.re[k] * f.re[k] + f.im[k] * f.im[k];
        }
        freq_energy /= static_cast<double>(n);
        CHECK(std::abs(time_energy - freq_energy) <=
              1e-10 * std::max(1.0, std::abs(time_energy)));
    }
}

TEST_CASE("real input spectra are conjugate symmetric") {
    RngState rng(6);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 2 + rng.next_index(31);
        const std::vector<double> x = random_vector(rng, n, -2.0, 2.0);
        const ComplexVec f = dft(x);
        for (std::size_t k = 1; k < n; ++k) {
            CHECK(std::abs(f.re[k] - f.re[n - k]) <= 1e-12 * std::max(1.0, std::abs(f.re[k])));
            CHECK(std::abs(f.im[k] + f.im[n - k]) <= 1e-12 * std::max(1.0, std::abs(f.im[k])));
        }
    }
}

TEST_CASE("laplace samples have the expected mean and variance") {
    RngState rng(7);
    const std::size_t n = 1000000;
    const std::vector<double> s = sample_laplace(rng, 1.0, n);
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : s) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n - 1);
    CHECK(std::abs(mean) < 0.01);
    CHECK(var > 1.98);
    CHECK(var < 2.02);
}

TEST_CASE("laplace sampling rejects a non-positive scale") {
    RngState rng(1);
    CHECK_THROWS_AS(sample_laplace(rng, 0.0, 10), std::invalid_argument);
    CHECK_THROWS_AS(sample_laplace(rng, -1.0, 10), std::invalid_argument);
}

TEST_CASE("identical seeds give identical sample streams") {
    RngState a(42), b(42);
    const std::vector<double> sa = sample_laplace(a, 0.7, 4096);
    const std::vector<double> sb = sample_laplace(b, 0.7, 4096);
    CHECK(sa == sb);

    RngState c(43);
    const std::vector<double> sc = sample_laplace(c, 0.7, 4096);
    CHECK(sa != sc);
}

TEST_CASE("rng state round-trips through a stream") {
    RngState a(99);
    for (int i = 0; i < 37; ++i) a.next_u64();
    std::stringstream buf;
    a.save(buf);
    RngState b(0);
    b.load(buf);
    CHECK(a == b);
    for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("finite differences of the identity give the identity matrix") {
    const VectorFn id = [](const std::vector<double>& v) { return v; };
    const RealMatrix j = finite_diff_jacobian(id, {0.3, -1.2, 4.0});
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t k = 0; k < 3; ++k) {
            CHECK(std::abs(j(i, k) - (i == k ? 1.0 : 0.0)) < 1e-9);
        }
    }
}

TEST_CASE("finite differences recover the product rule") {
    const VectorFn f = [](const std::vector<double>& v) {
        return std::vector<double>{v[0] * v[1]};
    };
    const RealMatrix j = finite_diff_jacobian(f, {2.0, 3.0});
    CHECK(j(0, 0) == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(j(0, 1) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("finite differences report non-finite outputs with the offending index") {
    const VectorFn f = [](const std::vector<double>& v) {
        return std::vector<double>{std::sqrt(v[0])};
    };
    CHECK_THROWS_AS(finite_diff_jacobian(f, {0.0}), std::runtime_error);
}

TEST_CASE("integrate evaluates smooth integrands to tight tolerance") {
    const double third = integrate([](double x) { return x * x; }, 0.0, 1.0);
    CHECK(std::abs(third - 1.0 / 3.0) <= 1e-10);

    const double expo = integrate([](double x) { return std::exp(-x); }, 0.0, 50.0);
    CHECK(std::abs(expo - 1.0) <= 1e-8);
}

TEST_CASE("integrate handles the clipping integrand") {
    // 2 * int_1^2 of Laplace(0,1) density times (x-1)^2.
    const double got = 2.0 * integrate(
        [](double x) {
            const double d = x - 1.0;
            return 0.5 * std::exp(-x) * d * d;
        }, 1.0, 2.0);
    CHECK(std::abs(got - 0.0591) < 1e-4);
    const double closed = std::exp(-1.0) * (2.0 - 5.0 * std::exp(-1.0));
    CHECK(std::abs(got - closed) < 1e-10);
}

TEST_CASE("integrate rejects reversed bounds") {
    CHECK_THROWS_AS(integrate([](double x) { return x; }, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("find_root solves simple brackets") {
    const double r1 = find_root([](double x) { return x - 2.0; }, 0.0, 5.0, 1e-12);
    CHECK(std::abs(r1 - 2.0) < 1e-10);

    const double r2 = find_root([](double x) { return std::cos(x); }, 1.0, 2.0, 1e-12);
    CHECK(std::abs(r2 - M_PI / 2.0) < 1e-10);
}

TEST_CASE("find_root reports missing sign change") {
    CHECK_THROWS_AS(find_root([](double x) { return x * x + 1.0; }, -1.0, 1.0, 1e-8),
                    BracketingError);
}

}  // TEST_SUITE
