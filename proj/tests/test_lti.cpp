#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "infolimit/kernels.hpp"
#include "infolimit/lti.hpp"

using namespace infolimit;
using fixtures::gaussian_matrix;

TEST_CASE("stability_check on boundary and triangular matrices") {
    CHECK(stability_check(Matrix::Zero(1, 1)));
    CHECK_FALSE(stability_check(Matrix::Ones(1, 1)));
    Matrix tri(2, 2);
    tri << 0.5, 1.0, 0.0, 0.5;
    CHECK(stability_check(tri));
    CHECK_FALSE(stability_check(Matrix::Constant(1, 1, 1.0 - 1e-10)));
    CHECK_THROWS_AS(StateSpace(Matrix::Zero(2, 3), Matrix::Zero(2, 1), Matrix::Zero(1, 2), Matrix::Zero(1, 1)),
                    DimensionError);
}

TEST_CASE("stability_check is invariant under orthogonal similarity") {
    Rng rng(101);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index n = 1 + trial % 6;
        const double radius = trial % 2 ? rng.uniform(0.2, 0.95) : rng.uniform(1.05, 1.5);
        const Matrix a = fixtures::schur_matrix(rng, n, radius);
        const Matrix q = Eigen::HouseholderQR<Matrix>(gaussian_matrix(rng, n, n)).householderQ();
        CHECK(stability_check(Matrix(q * a * q.transpose())) == stability_check(a));
    }
}

TEST_CASE("close_loop on the first-order loop puts the pole at -gk") {
    for (double gk : {0.2, 0.5, 0.8}) {
        const ClosedLoop loop = close_loop(fixtures::ar1_loop(gk));
        CHECK(loop.spectral_radius == doctest::Approx(gk).epsilon(1e-14));
        CHECK(loop.dominant_eigenvalue.real() == doctest::Approx(-gk).epsilon(1e-14));
    }
    CHECK_THROWS_AS(close_loop(fixtures::ar1_loop(1.2)), StabilityError);
    try {
        close_loop(fixtures::ar1_loop(1.2));
    } catch (const StabilityError& e) {
        CHECK(e.radius() == doctest::Approx(1.2));
    }
}

TEST_CASE("zero controller leaves the plant dynamics untouched") {
    Rng rng(5);
    LoopSpec spec;
    spec.plant = fixtures::random_system(rng, 3, 0.7, false);
    spec.controller = StateSpace::gain(0.0);
    spec.x0_covariance = Matrix::Identity(3, 3);
    const ClosedLoop loop = close_loop(spec);
    CHECK((loop.loop.a() - spec.plant.a()).norm() == 0.0);
}

TEST_CASE("double feedthrough is rejected") {
    LoopSpec spec;
    spec.plant = StateSpace::gain(1.0);
    spec.controller = StateSpace::gain(1.0);
    CHECK_THROWS_AS(close_loop(spec), WellPosednessError);
}

TEST_CASE("solve_dlyap closed forms") {
    Rng rng(9);
    const Matrix l = gaussian_matrix(rng, 3, 3);
    const Matrix q = l * l.transpose();
    CHECK((solve_dlyap(Matrix::Zero(3, 3), q) - q).norm() <= 1e-14 * q.norm());
    CHECK(solve_dlyap(Matrix::Constant(1, 1, 0.5), Matrix::Ones(1, 1))(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
    CHECK_THROWS_AS(solve_dlyap(Matrix::Ones(1, 1), Matrix::Ones(1, 1)), NotSchurError);
}

TEST_CASE("solve_dlyap residual on random Schur matrices") {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        // Dimensions straddle the switch between the direct and the doubling solver.
        const Eigen::Index n = trial < 90 ? 1 + trial % 8 : 50 + trial % 5;
        const Matrix a = fixtures::schur_matrix(rng, n, rng.uniform(0.05, 0.98));
        const Matrix l = gaussian_matrix(rng, n, n);
        const Matrix q = l * l.transpose();
        const Matrix s = solve_dlyap(a, q);
        const double residual = (s - a * s * a.transpose() - q).norm();
        CHECK(residual <= 1e-10 * (1.0 + q.norm()));
        CHECK((s - s.transpose()).norm() <= 1e-12 * s.norm());
    }
}

TEST_CASE("frequency_response examples") {
    const FrequencyResponse c = frequency_response(StateSpace::gain(2.5), 64);
    for (std::size_t k = 0; k < 64; ++k) CHECK(c.at(0, 0, k) == Complex(2.5, 0.0));

    const double phi = 0.5;
    const StateSpace ar(Matrix::Constant(1, 1, phi), Matrix::Ones(1, 1), Matrix::Constant(1, 1, phi),
                        Matrix::Ones(1, 1));
    const FrequencyResponse h = frequency_response(ar, 64);
    // w = 0 sits at k = N/2.
    CHECK(std::abs(h.at(0, 0, 32) - Complex(2.0, 0.0)) <= 1e-14);

    CHECK_THROWS_AS(frequency_response(ar, 8), DomainError);
    const StateSpace marginal(Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Zero(1, 1));
    CHECK_THROWS_AS(frequency_response(marginal, 64), SingularityError);
}

TEST_CASE("frequency_response is conjugate symmetric") {
    Rng rng(23);
    const StateSpace sys = fixtures::random_system(rng, 4, 0.9, true);
    const std::size_t n = 256;
    const FrequencyResponse h = frequency_response(sys, n);
    for (std::size_t k = 1; k < n; ++k)
        CHECK(std::abs(h.at(0, 0, n - k) - std::conj(h.at(0, 0, k))) <= 1e-12 * (1.0 + std::abs(h.at(0, 0, k))));
}

TEST_CASE("frequency_response matches the DFT of the truncated impulse response") {
    Rng rng(29);
    for (int trial = 0; trial < 5; ++trial) {
        const StateSpace sys = fixtures::random_system(rng, 1 + trial, 0.9, trial % 2 == 0);
        std::vector<double> h(4096);
        h[0] = sys.d()(0, 0);
        Vector x = sys.b().col(0);
        for (std::size_t k = 1; k < h.size(); ++k) {
            h[k] = (sys.c() * x)(0);
            x = sys.a() * x;
        }
        const std::size_t grid = 128;
        const FrequencyResponse resp = frequency_response(sys, grid);
        double worst = 0.0;
        for (std::size_t m = 0; m < grid; ++m) {
            const double w = grid_frequency(m, grid);
            Complex acc = 0.0;
            for (std::size_t k = 0; k < h.size(); ++k) acc += h[k] * std::polar(1.0, -w * static_cast<double>(k));
            worst = std::max(worst, std::abs(acc - resp.at(0, 0, m)));
        }
        CHECK(worst <= 1e-6);
    }
}

TEST_CASE("the channel adds w exactly once") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        LoopSpec spec;
        spec.plant = fixtures::random_system(rng, 1 + trial % 4, 0.6, trial % 2 == 0);
        spec.controller = StateSpace(fixtures::schur_matrix(rng, 1, 0.5), gaussian_matrix(rng, 1, 1),
                                     0.2 * gaussian_matrix(rng, 1, 1), Matrix::Zero(1, 1));
        spec.x0_covariance = Matrix::Identity(spec.plant.states(), spec.plant.states());
        ClosedLoop loop;
        try {
            loop = close_loop(spec);
        } catch (const StabilityError&) {
            continue;
        }
        const FrequencyResponse t = frequency_response(loop.loop, 512);
        double worst = 0.0;
        for (std::size_t k = 0; k < 512; ++k)
            worst = std::max(worst, std::abs(t.at(ClosedLoop::out_y, ClosedLoop::in_w, k) -
                                             (1.0 + t.at(ClosedLoop::out_z, ClosedLoop::in_w, k))));
        CHECK(worst <= 1e-10);
    }
}

TEST_CASE("serial and OpenMP frequency responses agree bitwise") {
    Rng rng(37);
    const StateSpace sys = fixtures::random_system(rng, 5, 0.9, true);
    FrequencyResponse a(4096, 1, 1), b(4096, 1, 1);
    kernels::frequency_response_serial(sys, a);
    kernels::frequency_response_omp(sys, b);
    CHECK(a.raw() == b.raw());
}

TEST_CASE("noise spec validation") {
    NoiseSpec n;
    n.variance = 0.0;
    CHECK_THROWS_AS(n.validate(false), DomainError);
    CHECK_NOTHROW(n.validate(true));
    n.variance = 1.0;
    n.shaping = StateSpace(Matrix::Constant(1, 1, 1.2), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1));
    CHECK_THROWS_AS(n.validate(), StabilityError);
}
