#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include <omp.h>

#include "fixtures.hpp"
#include "infolimit/gauss.hpp"
#include "infolimit/harness.hpp"
#include "infolimit/kernels.hpp"
#include "infolimit/simulate.hpp"

using namespace infolimit;

namespace {

bool same_trace(const Trace& a, const Trace& b) {
    return a.v == b.v && a.w == b.w && a.z == b.z && a.y == b.y && a.u == b.u && a.x0 == b.x0;
}

double cross_path_moment(const Trace& t, Signal a, std::size_t ka, Signal b, std::size_t kb) {
    double acc = 0.0;
    for (std::size_t p = 0; p < t.paths; ++p) acc += t.path(a, p)[ka] * t.path(b, p)[kb];
    return acc / static_cast<double>(t.paths);
}

}  // namespace

TEST_CASE("zero plant traces are v + w") {
    const Trace t = simulate_paths(fixtures::zero_plant_loop(1.0, 64), 1, 99);
    for (std::size_t k = 0; k < 64; ++k) {
        CHECK(t.z[k] == t.v[k]);
        CHECK(t.y[k] == t.v[k] + t.w[k]);
    }
}

TEST_CASE("channel equation holds on every sample") {
    SuiteOptions opt;
    opt.horizon = 200;
    for (std::size_t i = 0; i < 10; ++i) {
        const auto spec = random_loop(opt, i);
        REQUIRE(spec);
        for (NoiseFamily f : {NoiseFamily::gaussian, NoiseFamily::uniform, NoiseFamily::laplace}) {
            const Trace t = simulate_paths(*spec, 4, i + 1, f);
            for (std::size_t k = 0; k < t.y.size(); ++k) CHECK(t.y[k] == t.z[k] + t.w[k]);
        }
    }
}

TEST_CASE("traces are reproducible and independent of the worker count") {
    SuiteOptions opt;
    opt.horizon = 150;
    const LoopSpec spec = *random_loop(opt, 4);
    const Trace a = simulate_paths(spec, 64, 5, NoiseFamily::laplace);
    const Trace b = simulate_paths(spec, 64, 5, NoiseFamily::laplace);
    CHECK(same_trace(a, b));
    CHECK_FALSE(same_trace(a, simulate_paths(spec, 64, 6, NoiseFamily::laplace)));

    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const Trace one = simulate_paths(spec, 64, 5, NoiseFamily::laplace);
    omp_set_num_threads(4);
    const Trace four = simulate_paths(spec, 64, 5, NoiseFamily::laplace);
    omp_set_num_threads(saved);
    CHECK(same_trace(one, four));
    CHECK(same_trace(one, a));

    Trace serial = a;
    kernels::simulate_serial(spec, close_loop(spec), serial);
    CHECK(same_trace(serial, a));

    // Path p does not depend on how many paths are drawn.
    const Trace few = simulate_paths(spec, 3, 5, NoiseFamily::laplace);
    for (std::size_t p = 0; p < 3; ++p) {
        const auto x = few.path(Signal::y, p), y = a.path(Signal::y, p);
        CHECK(std::equal(x.begin(), x.end(), y.begin()));
    }
}

TEST_CASE("stationary moments of the first-order loop match the Lyapunov solution") {
    for (double gk : {0.2, 0.5, 0.8}) {
        const LoopSpec spec = fixtures::ar1_loop(gk, 120);
        const ClosedLoop loop = close_loop(spec);
        const StateSpace& s = loop.loop;
        const Matrix sigma = solve_dlyap(s.a(), s.b() * s.b().transpose());
        const Matrix cy = s.c().row(ClosedLoop::out_y);
        const Matrix dy = s.d().row(ClosedLoop::out_y);
        const double var = (cy * sigma * cy.transpose() + dy * dy.transpose())(0, 0);
        const double lag1 = (cy * (s.a() * sigma * cy.transpose() + s.b() * dy.transpose()))(0, 0);
        CHECK(lag1 / var == doctest::Approx(-gk).epsilon(1e-12));

        const Trace t = simulate_paths(spec, 8000, 17);
        const std::size_t k = t.burn_in + 5;
        REQUIRE(k + 1 < t.horizon);
        const double n = static_cast<double>(t.paths);
        const double v0 = cross_path_moment(t, Signal::y, k, Signal::y, k);
        const double v1 = cross_path_moment(t, Signal::y, k + 1, Signal::y, k + 1);
        const double c01 = cross_path_moment(t, Signal::y, k + 1, Signal::y, k);
        const double rho = c01 / std::sqrt(v0 * v1);
        CHECK(std::abs(rho + gk) <= 3.0 * (1.0 - gk * gk) / std::sqrt(n));
        CHECK(std::abs(v0 - var) <= 3.0 * var * std::sqrt(2.0 / n));
    }
}

TEST_CASE("non-Gaussian drivers are variance matched") {
    LoopSpec spec = fixtures::zero_plant_loop(2.0, 50);
    for (NoiseFamily f : {NoiseFamily::uniform, NoiseFamily::laplace}) {
        const Trace t = simulate_paths(spec, 2000, 3, f);
        double s1 = 0.0, s2 = 0.0;
        for (double x : t.v) {
            s1 += x;
            s2 += x * x;
        }
        const double n = static_cast<double>(t.v.size());
        const double kurtosis = f == NoiseFamily::laplace ? 6.0 : 1.8;
        CHECK(std::abs(s1 / n) <= 3.0 * std::sqrt(2.0 / n));
        CHECK(std::abs(s2 / n - 2.0) <= 3.0 * 2.0 * std::sqrt((kurtosis - 1.0) / n));
    }
    CHECK(parse_noise_family("laplace") == NoiseFamily::laplace);
    CHECK(to_string(NoiseFamily::uniform) == "uniform");
    CHECK_THROWS_AS(parse_noise_family("cauchy"), ConfigError);
}

TEST_CASE("colored noise starts from its stationary law") {
    LoopSpec spec = fixtures::zero_plant_loop(1.0, 10);
    spec.noise_w.shaping = fixtures::shaping_filter(0.8, 0.0);
    const Trace t = simulate_paths(spec, 20000, 8);
    // 1 / (1 - 0.8 e^{-jw}) has variance 1 / (1 - 0.64).
    const double var = 1.0 / (1.0 - 0.64);
    const double n = static_cast<double>(t.paths);
    for (std::size_t k : {0, 5})
        CHECK(std::abs(cross_path_moment(t, Signal::w, k, Signal::w, k) - var) <= 3.0 * var * std::sqrt(2.0 / n));
}

TEST_CASE("Welch estimates") {
    const Trace white = simulate_paths(fixtures::zero_plant_loop(1.0, (1 << 17) + 64), 1, 21);
    const Spectrum sw = welch_psd(white, Signal::w, 1024);
    double mean = 0.0;
    for (double x : sw.values()) mean += x;
    mean /= static_cast<double>(sw.grid_size());
    CHECK(mean >= 0.98);
    CHECK(mean <= 1.02);

    const LoopSpec ar = fixtures::ar1_loop(0.5, 1 << 15);
    const Trace t = simulate_paths(ar, 16, 22);
    const Spectrum est = welch_psd(t, Signal::y, 256);
    const Spectrum exact = signal_psd(close_loop(ar), Signal::y, ar.noise_v, ar.noise_w, 256);
    double worst = 0.0;
    for (std::size_t k = 0; k < 256; ++k)
        if (exact[k] >= 0.1) worst = std::max(worst, std::abs(est[k] - exact[k]) / exact[k]);
    CHECK(worst <= 0.10);

    LoopSpec colored = fixtures::zero_plant_loop(1.0, 1 << 15);
    colored.noise_w.shaping = fixtures::shaping_filter(0.5, -0.3);
    const Trace tc = simulate_paths(colored, 16, 23);
    const Spectrum wc = welch_psd(tc, Signal::w, 256);
    const Spectrum wexact = noise_psd(colored.noise_w, 256);
    worst = 0.0;
    for (std::size_t k = 0; k < 256; ++k) worst = std::max(worst, std::abs(wc[k] - wexact[k]) / wexact[k]);
    CHECK(worst <= 0.10);

    const Trace silent = simulate_paths(fixtures::zero_plant_loop(0.0, 4096), 1, 24);
    const Spectrum zero = welch_psd(silent, Signal::z, 256);
    for (double x : zero.values()) CHECK(x == 0.0);

    CHECK_THROWS_AS(welch_psd(silent, Signal::y, 2048), InsufficientDataError);
    CHECK_THROWS_AS(welch_psd(silent, Signal::y, 100), DomainError);
}

TEST_CASE("plug-in estimates agree with the exact engine") {
    const LoopSpec spec = fixtures::ar1_loop(0.5, 20);
    const InfoSeries exact = lhs_rate(spec);
    const Trace t = simulate_paths(spec, 5000, 31);
    const PluginEstimates est = plugin_info_estimates(t, 20);
    CHECK(est.groups == kJackknifeGroups);
    CHECK(std::abs(est.lhs.value - exact.values.back()) <= 3.0 * est.lhs.se);
    CHECK(est.lhs.se > 0.0);

    LoopSpec quiet = fixtures::ar1_loop(0.5, 20, 0.0);
    quiet.noise_v.variance = 0.0;
    const PluginEstimates none = plugin_info_estimates(simulate_paths(quiet, 2000, 32), 20);
    CHECK(std::abs(none.lhs.value) <= 3.0 * none.lhs.se + 1e-12);

    CHECK_THROWS_AS(plugin_info_estimates(simulate_paths(spec, 100, 33), 20), InsufficientDataError);
}

TEST_CASE("plug-in moments are independent of the worker count") {
    const LoopSpec spec = fixtures::ar1_loop(0.8, 10);
    const Trace t = simulate_paths(spec, 3000, 41);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const PluginEstimates a = plugin_info_estimates(t, 10);
    omp_set_num_threads(4);
    const PluginEstimates b = plugin_info_estimates(t, 10);
    omp_set_num_threads(saved);
    CHECK(a.lhs.value == b.lhs.value);
    CHECK(a.lhs.se == b.lhs.se);
    CHECK(a.directed_increment.value == b.directed_increment.value);

    Rng rng(3);
    const Matrix samples = fixtures::gaussian_matrix(rng, 1000, 17);
    CHECK(kernels::second_moment_serial(samples) == kernels::second_moment_omp(samples));
}

TEST_CASE("trace dump round trip") {
    const Trace t = simulate_paths(fixtures::ar1_loop(0.5, 40), 3, 51, NoiseFamily::uniform);
    std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
    write_trace_binary(ss, t);
    const std::string bytes = ss.str();
    CHECK(bytes.substr(0, 8) == "ILTRACE1");
    CHECK(bytes.size() == 8 + 6 * 8 + 8 * (5 * 3 * 40 + 3));
    const Trace r = read_trace_binary(ss);
    CHECK(same_trace(r, t));
    CHECK(r.seed == 51);
    CHECK(r.v_family == NoiseFamily::uniform);
    CHECK(r.burn_in == t.burn_in);

    std::ostringstream head;
    write_trace_csv_head(head, t, 5);
    const std::string text = head.str();
    CHECK(text.rfind("path,k,v,w,z,y,u\n0,1,", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 6);

    std::istringstream bad("NOTATRACE");
    CHECK_THROWS_AS(read_trace_binary(bad), DomainError);
}
