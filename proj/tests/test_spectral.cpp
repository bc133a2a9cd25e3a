#include <doctest.h>

#include <cmath>
#include <vector>

#include "fatq/numerics.hpp"
#include "fatq/spectral.hpp"

using namespace fatq::spectral;
using fatq::numerics::RealMatrix;
using fatq::numerics::RngState;
using fatq::numerics::finite_diff_jacobian;

namespace {

FilterMatrix random_filters(RngState& rng, std::size_t c_out, std::size_t n,
                            double lo = -1.0, double hi = 1.0) {
    FilterMatrix w;
    w.c_in = n;  // treat the row as a 1x1 kernel stack for tests
    w.data = RealMatrix(c_out, n);
    for (double& v : w.data.data) v = rng.next_uniform(lo, hi);
    return w;
}

RealMatrix random_mask_values(RngState& rng, std::size_t c_out, std::size_t n) {
    RealMatrix m(c_out, n);
    for (double& v : m.data) v = rng.next_uniform(0.0, 1.0);
    return m;
}

double max_abs_diff(const RealMatrix& a, const RealMatrix& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        d = std::max(d, std::abs(a.data[i] - b.data[i]));
    }
    return d;
}

double max_abs(const RealMatrix& a) {
    double d = 0.0;
    for (double v : a.data) d = std::max(d, std::abs(v));
    return d;
}

double rel_error(const RealMatrix& got, const RealMatrix& want) {
    return max_abs_diff(got, want) / std::max(max_abs(want), 1e-12);
}

double row_l2(const RealMatrix& m, std::size_t i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) s += m(i, j) * m(i, j);
    return std::sqrt(s);
}

}  // namespace

TEST_SUITE("spectral") {

TEST_CASE("flatten keeps filters as contiguous rows in declared order") {
    SUBCASE("single entry") {
        Tensor4 w(1, 1, 1, 1);
        w.at(0, 0, 0, 0) = 5.0;
        const FilterMatrix m = flatten_weights(w);
        CHECK(m.c_out() == 1);
        CHECK(m.n() == 1);
        CHECK(m.data(0, 0) == 5.0);
    }
    SUBCASE("declared (c_in, k_row, k_col) order, last fastest") {
        Tensor4 w(2, 1, 2, 2);
        int v = 0;
        for (std::size_t o = 0; o < 2; ++o) {
            for (std::size_t y = 0; y < 2; ++y) {
                for (std::size_t x = 0; x < 2; ++x) {
                    w.at(o, 0, y, x) = static_cast<double>(v++);
                }
            }
        }
        const FilterMatrix m = flatten_weights(w);
        CHECK(m.data.row(0) == std::vector<double>{0.0, 1.0, 2.0, 3.0});
        CHECK(m.data.row(1) == std::vector<double>{4.0, 5.0, 6.0, 7.0});
    }
    SUBCASE("round trip is bit-exact") {
        RngState rng(41);
        Tensor4 w(3, 2, 3, 3);
        for (double& x : w.data) x = rng.next_uniform(-2.0, 2.0);
        const Tensor4 back = unflatten_weights(flatten_weights(w));
        CHECK(back.data == w.data);
        CHECK(back.c_out == w.c_out);
        CHECK(back.c_in == w.c_in);
    }
}

TEST_CASE("spectrum matches the dft oracle and is conjugate symmetric") {
    FilterMatrix w;
    w.c_in = 4;
    w.data = RealMatrix(2, 4);
    w.data.set_row(0, {1.0, 1.0, 1.0, 1.0});
    w.data.set_row(1, {1.0, -1.0, 1.0, -1.0});
    const SpectrumView view = spectrum(w);
    CHECK(view.freq_re(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(view.norms(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
    for (std::size_t k = 1; k < 4; ++k) CHECK(view.norms(0, k) < 1e-12);
    const double want1[] = {0.0, 0.0, 4.0, 0.0};
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(view.norms(1, k) == doctest::Approx(want1[k]).epsilon(1e-12));
    }

    RngState rng(42);
    const FilterMatrix r = random_filters(rng, 3, 8);
    const SpectrumView rv = spectrum(r);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t k = 1; k <= 3; ++k) {
            CHECK(rv.norms(i, k) == doctest::Approx(rv.norms(i, 8 - k)).epsilon(1e-12));
        }
        for (std::size_t k = 0; k < 8; ++k) {
            CHECK(rv.norms(i, k) ==
                  doctest::Approx(std::hypot(rv.freq_re(i, k), rv.freq_im(i, k)))
                      .epsilon(1e-12));
        }
    }
}

TEST_CASE("zero generator yields the half mask") {
    RngState rng(43);
    const FilterMatrix w = random_filters(rng, 3, 8);
    const Mask m = make_mask(spectrum(w), RealMatrix(3, 3));
    for (double v : m.values.data) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("large positive generator saturates the mask toward one") {
    RngState rng(44);
    const FilterMatrix w = random_filters(rng, 2, 4, 0.5, 1.5);
    RealMatrix gen(2, 2);
    gen(0, 0) = gen(1, 1) = 1e4;
    const Mask m = make_mask(spectrum(w), gen);
    // DC norms are strictly positive for positive weights.
    CHECK(m.values(0, 0) > 1.0 - 1e-9);
    CHECK(m.values(1, 0) > 1.0 - 1e-9);
}

TEST_CASE("generated masks inherit frequency symmetry from the norms") {
    RngState rng(45);
    const FilterMatrix w = random_filters(rng, 3, 8);
    RealMatrix gen(3, 3);
    for (double& v : gen.data) v = rng.next_uniform(-0.5, 0.5);
    const Mask m = make_mask(spectrum(w), gen);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t k = 1; k <= 3; ++k) {
            CHECK(m.values(i, k) == doctest::Approx(m.values(i, 8 - k)).epsilon(1e-12));
        }
        for (std::size_t k = 0; k < 8; ++k) {
            CHECK(m.values(i, k) > 0.0);
            CHECK(m.values(i, k) < 1.0);
        }
    }
    CHECK_THROWS_AS(make_mask(spectrum(w), RealMatrix(2, 2)), std::invalid_argument);
}

TEST_CASE("all-ones mask makes the transform an identity map") {
    RngState rng(46);
    for (std::size_t n : {2u, 4u, 8u, 16u}) {
        const FilterMatrix w = random_filters(rng, 2, n);
        const FilterMatrix wt = transform(w, RealMatrix(2, n, 1.0));
        CHECK(max_abs_diff(wt.data, w.data) <= 1e-10);
    }
}

TEST_CASE("uniform masks scale the signal linearly") {
    RngState rng(47);
    const FilterMatrix w = random_filters(rng, 2, 8);
    for (double c : {0.0, 0.25, 0.5, 1.0}) {
        const FilterMatrix wt = transform(w, RealMatrix(2, 8, c));
        for (std::size_t i = 0; i < w.data.data.size(); ++i) {
            CHECK(std::abs(wt.data.data[i] - c * w.data.data[i]) <= 1e-10);
        }
    }
}

TEST_CASE("masking only the dc bin subtracts the row mean") {
    FilterMatrix w;
    w.c_in = 4;
    w.data = RealMatrix(1, 4);
    w.data.set_row(0, {1.0, 1.0, 1.0, -1.0});
    RealMatrix mask(1, 4, 1.0);
    mask(0, 0) = 0.0;
    const FilterMatrix wt = transform(w, mask);
    const std::vector<double> want = {0.5, 0.5, 0.5, -1.5};
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(wt.data(0, k) == doctest::Approx(want[k]).epsilon(1e-12));
    }
    // The amplitude can grow under partial masks even though the l2 norm cannot.
    CHECK(max_abs(wt.data) > max_abs(w.data));
    CHECK(row_l2(wt.data, 0) <= row_l2(w.data, 0));
}

TEST_CASE("transform rejects mismatched shapes") {
    RngState rng(48);
    const FilterMatrix w = random_filters(rng, 2, 8);
    CHECK_THROWS_AS(transform(w, RealMatrix(2, 4, 1.0)), std::invalid_argument);
}

TEST_CASE("l2 norms never expand under masks in the unit interval") {
    RngState rng(49);
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t n = std::vector<std::size_t>{2, 4, 8, 16}[rng.next_index(4)];
        const FilterMatrix w = random_filters(rng, 2, n, -3.0, 3.0);
        const RealMatrix mask = random_mask_values(rng, 2, n);
        const FilterMatrix wt = transform(w, mask);
        for (std::size_t i = 0; i < 2; ++i) {
            CHECK(row_l2(wt.data, i) <= row_l2(w.data, i) + 1e-12);
        }
    }
}

TEST_CASE("imaginary residue vanishes for frequency-symmetric masks") {
    RngState rng(50);
    const FilterMatrix w = random_filters(rng, 2, 8);
    RealMatrix gen(2, 2);
    for (double& v : gen.data) v = rng.next_uniform(-0.3, 0.3);
    const Mask m = make_mask(spectrum(w), gen);
    CHECK(transform_imag_residue(w, m.values) <= 1e-10);

    // An asymmetric mask leaves a visible residue.
    RealMatrix broken(2, 8, 1.0);
    broken(0, 1) = 0.0;
    CHECK(transform_imag_residue(w, broken) > 1e-6);
}

TEST_CASE("weight jacobian of the all-ones mask is the identity") {
    for (std::size_t n : {2u, 4u, 8u, 16u}) {
        const RealMatrix j = weight_jacobian_row(std::vector<double>(n, 1.0));
        for (std::size_t k1 = 0; k1 < n; ++k1) {
            for (std::size_t k2 = 0; k2 < n; ++k2) {
                CHECK(std::abs(j(k1, k2) - (k1 == k2 ? 1.0 : 0.0)) <= 1e-10);
            }
        }
    }
}

TEST_CASE("weight jacobian frozen example for a dc-only mask") {
    const RealMatrix j = weight_jacobian_row({1.0, 0.0});
    for (std::size_t k1 = 0; k1 < 2; ++k1) {
        for (std::size_t k2 = 0; k2 < 2; ++k2) {
            CHECK(j(k1, k2) == doctest::Approx(0.5).epsilon(1e-15));
        }
    }
}

TEST_CASE("weight jacobian is symmetric and matches finite differences") {
    RngState rng(51);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = std::vector<std::size_t>{1, 2, 4, 8}[rng.next_index(4)];
        FilterMatrix w = random_filters(rng, 1, n);
        const RealMatrix mask = random_mask_values(rng, 1, n);
        const RealMatrix j = weight_jacobian_row(mask.row(0));

        for (std::size_t k1 = 0; k1 < n; ++k1) {
            for (std::size_t k2 = 0; k2 < n; ++k2) {
                CHECK(std::abs(j(k1, k2) - j(k2, k1)) <= 1e-12);
            }
        }

        const auto transform_row = [&](const std::vector<double>& row) {
            FilterMatrix probe = w;
            probe.data.set_row(0, row);
            return transform(probe, mask).data.row(0);
        };
        const RealMatrix fd = finite_diff_jacobian(transform_row, w.data.row(0));
        CHECK(rel_error(j, fd) <= 1e-5);
    }
}

TEST_CASE("mask jacobian frozen example and finite differences") {
    SUBCASE("two-point dc entry averages the weights") {
        const RealMatrix j = mask_jacobian_row({0.7, -0.2});
        CHECK(j(0, 0) == doctest::Approx((0.7 - 0.2) / 2.0).epsilon(1e-12));
    }
    SUBCASE("zero weights give a zero jacobian") {
        const RealMatrix j = mask_jacobian_row(std::vector<double>(6, 0.0));
        for (double v : j.data) CHECK(v == 0.0);
    }
    SUBCASE("matches finite differences over mask entries") {
        RngState rng(52);
        for (int rep = 0; rep < 50; ++rep) {
            const std::size_t n = std::vector<std::size_t>{1, 2, 4, 8}[rng.next_index(4)];
            const FilterMatrix w = random_filters(rng, 1, n);
            const RealMatrix mask = random_mask_values(rng, 1, n);
            const RealMatrix j = mask_jacobian_row(w.data.row(0));

            const auto transform_mask = [&](const std::vector<double>& mask_row) {
                RealMatrix mv(1, n);
                mv.set_row(0, mask_row);
                return transform(w, mv).data.row(0);
            };
            const RealMatrix fd = finite_diff_jacobian(transform_mask, mask.row(0));
            CHECK(rel_error(j, fd) <= 1e-5);
        }
    }
}

TEST_CASE("reduce_gradient sums over the second neuron axis") {
    SUBCASE("identity jacobians reduce to ones") {
        const std::size_t c_out = 3, n = 4;
        std::vector<double> raw(c_out * n * n, 0.0);
        for (std::size_t i = 0; i < c_out; ++i) {
            for (std::size_t j = 0; j < n; ++j) raw[(i * n + j) * n + j] = 1.0;
        }
        const RealMatrix out = reduce_gradient(raw, c_out, n);
        for (double v : out.data) CHECK(v == 1.0);
    }
    SUBCASE("zeros reduce to zeros") {
        const RealMatrix out = reduce_gradient(std::vector<double>(2 * 3 * 3, 0.0), 2, 3);
        for (double v : out.data) CHECK(v == 0.0);
    }
    SUBCASE("random tensor matches the naive triple loop") {
        RngState rng(53);
        const std::size_t c_out = 2, n = 3;
        std::vector<double> raw(c_out * n * n);
        for (double& v : raw) v = rng.next_uniform(-1.0, 1.0);
        const RealMatrix out = reduce_gradient(raw, c_out, n);
        for (std::size_t i = 0; i < c_out; ++i) {
            for (std::size_t j1 = 0; j1 < n; ++j1) {
                double want = 0.0;
                for (std::size_t j2 = 0; j2 < n; ++j2) want += raw[(i * n + j1) * n + j2];
                CHECK(out(i, j1) == doctest::Approx(want).epsilon(1e-12));
            }
        }
    }
    SUBCASE("shape mismatch is rejected") {
        CHECK_THROWS_AS(reduce_gradient(std::vector<double>(10, 0.0), 2, 3),
                        std::invalid_argument);
    }
}

TEST_CASE("backward reduces to the pass-through gradient for the all-ones mask") {
    RngState rng(54);
    const std::size_t c_out = 2, n = 4;
    const FilterMatrix w = random_filters(rng, c_out, n);
    Mask m;
    m.values = RealMatrix(c_out, n, 1.0);
    m.generator = RealMatrix(c_out, c_out);
    RealMatrix upstream(c_out, n);
    for (double& v : upstream.data) v = rng.next_uniform(-1.0, 1.0);
    const BackwardResult res = backward(upstream, w, m, /*norm_path=*/false);
    CHECK(max_abs_diff(res.grad_weights, upstream) <= 1e-10);
}

TEST_CASE("zero upstream zeroes every gradient") {
    RngState rng(55);
    const FilterMatrix w = random_filters(rng, 2, 4);
    RealMatrix gen(2, 2);
    for (double& v : gen.data) v = rng.next_uniform(-0.5, 0.5);
    const Mask m = make_mask(spectrum(w), gen);
    const BackwardResult res = backward(RealMatrix(2, 4), w, m, true);
    for (double v : res.grad_weights.data) CHECK(v == 0.0);
    for (double v : res.grad_mask.data) CHECK(v == 0.0);
    for (double v : res.grad_generator.data) CHECK(v == 0.0);
}

TEST_CASE("backward matches finite differences of the probe loss") {
    RngState rng(56);
    const std::size_t c_out = 2, n = 4;
    for (int rep = 0; rep < 50; ++rep) {
        const FilterMatrix w = random_filters(rng, c_out, n);
        RealMatrix gen(c_out, c_out);
        for (double& v : gen.data) v = rng.next_uniform(-0.6, 0.6);
        const Mask m = make_mask(spectrum(w), gen);
        RealMatrix upstream(c_out, n);
        for (double& v : upstream.data) v = rng.next_uniform(-1.0, 1.0);

        // Probe loss L = sum(upstream .* transform(...)) as a function of the
        // flattened parameter in question; gradients arrive as 1 x P rows.
        const auto loss_of_transform = [&](const FilterMatrix& wt) {
            double loss = 0.0;
            for (std::size_t i = 0; i < wt.data.data.size(); ++i) {
                loss += upstream.data[i] * wt.data.data[i];
            }
            return std::vector<double>{loss};
        };

        const BackwardResult with_norm = backward(upstream, w, m, true);
        const BackwardResult frozen = backward(upstream, w, m, false);

        // Weights, live mask (mask recomputed from the perturbed weights).
        const auto loss_w_live = [&](const std::vector<double>& flat) {
            FilterMatrix probe = w;
            probe.data.data = flat;
            const Mask live = make_mask(spectrum(probe), gen);
            return loss_of_transform(transform(probe, live));
        };
        RealMatrix fd_live = finite_diff_jacobian(loss_w_live, w.data.data);
        RealMatrix grad_live(1, c_out * n);
        grad_live.data = with_norm.grad_weights.data;
        CHECK(rel_error(grad_live, fd_live) <= 1e-5);

        // Weights, frozen mask.
        const auto loss_w_frozen = [&](const std::vector<double>& flat) {
            FilterMatrix probe = w;
            probe.data.data = flat;
            return loss_of_transform(transform(probe, m.values));
        };
        RealMatrix fd_frozen = finite_diff_jacobian(loss_w_frozen, w.data.data);
        RealMatrix grad_frozen(1, c_out * n);
        grad_frozen.data = frozen.grad_weights.data;
        CHECK(rel_error(grad_frozen, fd_frozen) <= 1e-5);

        // Mask entries as free parameters.
        const auto loss_mask = [&](const std::vector<double>& flat) {
            RealMatrix mv(c_out, n);
            mv.data = flat;
            return loss_of_transform(transform(w, mv));
        };
        RealMatrix fd_mask = finite_diff_jacobian(loss_mask, m.values.data);
        RealMatrix grad_mask(1, c_out * n);
        grad_mask.data = with_norm.grad_mask.data;
        CHECK(rel_error(grad_mask, fd_mask) <= 1e-5);

        // Generator entries.
        const auto loss_gen = [&](const std::vector<double>& flat) {
            RealMatrix g(c_out, c_out);
            g.data = flat;
            const Mask live = make_mask(spectrum(w), g);
            return loss_of_transform(transform(w, live));
        };
        RealMatrix fd_gen = finite_diff_jacobian(loss_gen, gen.data);
        RealMatrix grad_gen(1, c_out * c_out);
        grad_gen.data = with_norm.grad_generator.data;
        CHECK(rel_error(grad_gen, fd_gen) <= 1e-5);
    }
}

TEST_CASE("jacobian accessors validate the filter index") {
    RngState rng(57);
    const FilterMatrix w = random_filters(rng, 2, 4);
    Mask m;
    m.values = RealMatrix(2, 4, 0.5);
    m.generator = RealMatrix(2, 2);
    CHECK_THROWS_AS(weight_jacobian(m, 2), std::invalid_argument);
    CHECK_THROWS_AS(mask_jacobian(w, 5), std::invalid_argument);
    CHECK(weight_jacobian(m, 1).rows == 4);
    CHECK(mask_jacobian(w, 0).rows == 4);
}

}  // TEST_SUITE
