#include "infolimit/simulate.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>

#include <fftw3.h>

#include "infolimit/kernels.hpp"
#include "infolimit/random.hpp"

namespace infolimit {

namespace {

double draw(Rng& rng, NoiseFamily f) {
    switch (f) {
        case NoiseFamily::gaussian: return rng.gaussian();
        case NoiseFamily::uniform: return std::sqrt(3.0) * (2.0 * rng.uniform() - 1.0);
        case NoiseFamily::laplace: {
            const double c = rng.uniform() - 0.5;
            const double mag = -std::log1p(-2.0 * std::abs(c)) / std::numbers::sqrt2;
            return c < 0 ? -mag : mag;
        }
    }
    return 0.0;
}

Matrix psd_factor(const Matrix& s) {
    if (s.size() == 0 || (s.array() == 0.0).all()) return Matrix::Zero(s.rows(), s.cols());
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

// Noise realization scaled so that its driver has unit variance.
StateSpace scaled_noise(const NoiseSpec& ns) {
    const double s = std::sqrt(ns.variance);
    if (!ns.shaping)
        return StateSpace(Matrix(0, 0), Matrix(0, 1), Matrix(1, 0), Matrix::Constant(1, 1, s));
    return StateSpace(ns.shaping->a(), ns.shaping->b() * s, ns.shaping->c(), ns.shaping->d() * s);
}

struct SimPlan {
    StateSpace plant, controller, nv, nw;
    Matrix x0_factor, v_factor, w_factor;
};

SimPlan make_plan(const LoopSpec& spec, const ClosedLoop& loop) {
    SimPlan p{spec.plant, spec.controller, scaled_noise(spec.noise_v), scaled_noise(spec.noise_w),
              {}, {}, {}};
    const Matrix& p0 = loop.initial_covariance;
    const Eigen::Index np = loop.plant_states;
    const Eigen::Index nl = np + loop.controller_states;
    p.x0_factor = psd_factor(p0.topLeftCorner(np, np));
    p.v_factor = psd_factor(p0.block(nl, nl, loop.v_states, loop.v_states));
    p.w_factor = psd_factor(p0.block(nl + loop.v_states, nl + loop.v_states, loop.w_states,
                                     loop.w_states));
    return p;
}

Vector gaussian_vector(Rng& rng, const Matrix& factor) {
    Vector e(factor.cols());
    for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = rng.gaussian();
    return factor * e;
}

void simulate_path(const SimPlan& plan, Trace& t, std::size_t path) {
    Rng rng(path_seed(t.seed, path));
    const std::size_t n = t.horizon;
    const std::size_t base = path * n;

    Vector xp = gaussian_vector(rng, plan.x0_factor);
    Vector xk = Vector::Zero(plan.controller.states());
    Vector xv = gaussian_vector(rng, plan.v_factor);
    Vector xw = gaussian_vector(rng, plan.w_factor);
    for (std::size_t i = 0; i < t.x0_dim; ++i) t.x0[path * t.x0_dim + i] = xp(static_cast<Eigen::Index>(i));

    const double dp = plan.plant.d()(0, 0);
    const double dk = plan.controller.d()(0, 0);
    const double dv = plan.nv.d()(0, 0);
    const double dw = plan.nw.d()(0, 0);
    Vector tp(xp.size()), tk(xk.size()), tv(xv.size()), tw(xw.size());

    for (std::size_t k = 0; k < n; ++k) {
        const double ev = draw(rng, t.v_family);
        const double ew = rng.gaussian();
        const double v = plan.nv.c().row(0).dot(xv) + dv * ev;
        const double w = plan.nw.c().row(0).dot(xw) + dw * ew;
        const double pc = plan.plant.c().row(0).dot(xp);
        const double kc = plan.controller.c().row(0).dot(xk);
        double u, z, y;
        if (dk == 0.0) {
            u = kc;
            z = pc + dp * u + v;
            y = z + w;
        } else {
            z = pc + v;
            y = z + w;
            u = kc + dk * y;
        }
        t.v[base + k] = v;
        t.w[base + k] = w;
        t.z[base + k] = z;
        t.y[base + k] = y;
        t.u[base + k] = u;

        tp.noalias() = plan.plant.a() * xp;
        tp += plan.plant.b().col(0) * u;
        xp.swap(tp);
        tk.noalias() = plan.controller.a() * xk;
        tk += plan.controller.b().col(0) * y;
        xk.swap(tk);
        tv.noalias() = plan.nv.a() * xv;
        tv += plan.nv.b().col(0) * ev;
        xv.swap(tv);
        tw.noalias() = plan.nw.a() * xw;
        tw += plan.nw.b().col(0) * ew;
        xw.swap(tw);
    }
}

void prepare(const LoopSpec& spec, const ClosedLoop& loop, Trace& t) {
    const std::size_t total = t.paths * t.horizon;
    for (auto* s : {&t.v, &t.w, &t.z, &t.y, &t.u}) s->assign(total, 0.0);
    t.x0_dim = static_cast<std::size_t>(loop.plant_states);
    t.x0.assign(t.paths * t.x0_dim, 0.0);
    t.x0_deterministic = spec.x0_deterministic();
    t.burn_in = static_cast<std::size_t>(std::ceil(10.0 / (1.0 - loop.spectral_radius)));
}

template <class T>
void put(std::ostream& os, T value) {
    static_assert(sizeof(T) == 8);
    std::uint64_t bits = std::bit_cast<std::uint64_t>(value);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char buf[8];
    std::memcpy(buf, &bits, 8);
    os.write(buf, 8);
}

template <class T>
T get(std::istream& is) {
    char buf[8];
    if (!is.read(buf, 8)) throw DomainError("truncated trace file");
    std::uint64_t bits;
    std::memcpy(&bits, buf, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    return std::bit_cast<T>(bits);
}

constexpr char kTraceMagic[8] = {'I', 'L', 'T', 'R', 'A', 'C', 'E', '1'};

}  // namespace

std::string to_string(NoiseFamily f) {
    switch (f) {
        case NoiseFamily::gaussian: return "gaussian";
        case NoiseFamily::uniform: return "uniform";
        case NoiseFamily::laplace: return "laplace";
    }
    return "?";
}

NoiseFamily parse_noise_family(const std::string& name) {
    if (name == "gaussian") return NoiseFamily::gaussian;
    if (name == "uniform") return NoiseFamily::uniform;
    if (name == "laplace") return NoiseFamily::laplace;
    throw ConfigError("v_family", "unknown noise family '" + name +
                                      "' (expected gaussian, uniform or laplace)");
}

const std::vector<double>& Trace::signal(Signal s) const {
    switch (s) {
        case Signal::v: return v;
        case Signal::w: return w;
        case Signal::z: return z;
        case Signal::y: return y;
        case Signal::u: return u;
    }
    return y;
}

std::vector<double>& Trace::signal(Signal s) {
    return const_cast<std::vector<double>&>(std::as_const(*this).signal(s));
}

std::span<const double> Trace::path(Signal s, std::size_t p) const {
    return std::span<const double>(signal(s)).subspan(p * horizon, horizon);
}

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path) { return stream_seed(seed, path); }

namespace kernels {

void simulate_serial(const LoopSpec& spec, const ClosedLoop& loop, Trace& trace) {
    prepare(spec, loop, trace);
    const SimPlan plan = make_plan(spec, loop);
    for (std::size_t p = 0; p < trace.paths; ++p) simulate_path(plan, trace, p);
}

void simulate_omp(const LoopSpec& spec, const ClosedLoop& loop, Trace& trace) {
    prepare(spec, loop, trace);
    const SimPlan plan = make_plan(spec, loop);
    const auto paths = static_cast<std::ptrdiff_t>(trace.paths);
#pragma omp parallel for schedule(dynamic, 4)
    for (std::ptrdiff_t p = 0; p < paths; ++p) simulate_path(plan, trace, static_cast<std::size_t>(p));
}

}  // namespace kernels

Trace simulate_paths(const LoopSpec& spec, std::size_t paths, std::uint64_t seed,
                     NoiseFamily v_family, std::size_t horizon) {
    if (paths == 0) throw DomainError("simulate_paths needs at least one path");
    const ClosedLoop loop = close_loop(spec);
    Trace t;
    t.horizon = horizon == 0 ? spec.horizon : horizon;
    t.paths = paths;
    t.seed = seed;
    t.v_family = v_family;
    kernels::simulate_omp(spec, loop, t);
    return t;
}

Spectrum welch_psd(const Trace& trace, Signal signal, std::size_t segment_length,
                   double overlap_fraction) {
    const std::size_t len = trace.horizon > trace.burn_in ? trace.horizon - trace.burn_in : 0;
    if (segment_length < 16 || !std::has_single_bit(segment_length))
        throw DomainError("segment length must be a power of two >= 16");
    if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0))
        throw DomainError("overlap fraction must lie in [0, 1)");
    const std::size_t hop = std::max<std::size_t>(
        1, segment_length - static_cast<std::size_t>(std::lround(overlap_fraction * segment_length)));
    const std::size_t per_path = len >= segment_length ? (len - segment_length) / hop + 1 : 0;
    const std::size_t segments = per_path * trace.paths;
    if (segments < 8)
        throw InsufficientDataError("welch_psd: only " + std::to_string(segments) +
                                    " segments after burn-in (need 8)");

    const std::size_t L = segment_length;
    std::vector<double> window(L);
    double wsum = 0.0;
    for (std::size_t k = 0; k < L; ++k) {
        window[k] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / L);
        wsum += window[k] * window[k];
    }

    const std::size_t bins = L / 2 + 1;
    double* in = fftw_alloc_real(L);
    fftw_complex* out = fftw_alloc_complex(bins);
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(L), in, out, FFTW_ESTIMATE);
    std::vector<double> acc(bins, 0.0);
    for (std::size_t p = 0; p < trace.paths; ++p) {
        const auto x = trace.path(signal, p).subspan(trace.burn_in);
        for (std::size_t s = 0; s < per_path; ++s) {
            for (std::size_t k = 0; k < L; ++k) in[k] = window[k] * x[s * hop + k];
            fftw_execute(plan);
            for (std::size_t m = 0; m < bins; ++m) acc[m] += out[m][0] * out[m][0] + out[m][1] * out[m][1];
        }
    }
    fftw_destroy_plan(plan);
    fftw_free(out);
    fftw_free(in);

    const double norm = 1.0 / (wsum * static_cast<double>(segments));
    std::vector<double> values(L);
    for (std::size_t k = 0; k < L; ++k) {
        const std::size_t m = (k + L / 2) % L;  // bin of w_k = -pi + 2 pi k / L
        values[k] = acc[std::min(m, L - m)] * norm;
    }
    return Spectrum(std::move(values));
}

Matrix trace_moment_sum(const Trace& t, std::size_t n_sub, std::size_t first, std::size_t last) {
    const auto nx0 = static_cast<Eigen::Index>(t.x0_dim);
    const auto n = static_cast<Eigen::Index>(n_sub);
    const auto rows = static_cast<Eigen::Index>(last - first);
    Matrix samples = Matrix::Zero(rows, nx0 + 4 * n);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::size_t p = first + static_cast<std::size_t>(r);
        if (!t.x0_deterministic)
            for (Eigen::Index i = 0; i < nx0; ++i) samples(r, i) = t.x0[p * t.x0_dim + i];
        const std::size_t base = p * t.horizon;
        for (Eigen::Index k = 0; k < n; ++k) {
            samples(r, nx0 + k) = t.v[base + k];
            samples(r, nx0 + n + k) = t.w[base + k];
            samples(r, nx0 + 2 * n + k) = t.z[base + k];
            samples(r, nx0 + 3 * n + k) = t.y[base + k];
        }
    }
    return kernels::second_moment_omp(samples) * static_cast<double>(rows);
}

PluginEstimates plugin_info_estimates(const Trace& trace, std::size_t n_sub) {
    if (n_sub == 0 || n_sub > trace.horizon)
        throw DomainError("n_sub must lie in 1.." + std::to_string(trace.horizon));
    if (trace.paths < 50 * n_sub)
        throw InsufficientDataError("plug-in estimates need at least 50 * n_sub = " +
                                    std::to_string(50 * n_sub) + " paths, have " +
                                    std::to_string(trace.paths));
    const std::size_t groups = kJackknifeGroups;
    std::vector<Matrix> sums;
    std::vector<std::size_t> sizes;
    for (std::size_t g = 0; g < groups; ++g) {
        const std::size_t lo = g * trace.paths / groups, hi = (g + 1) * trace.paths / groups;
        sums.push_back(trace_moment_sum(trace, n_sub, lo, hi));
        sizes.push_back(hi - lo);
    }
    Matrix total = Matrix::Zero(sums[0].rows(), sums[0].cols());
    for (const Matrix& s : sums) total += s;

    struct Values {
        double lhs, lhs_inc, di, di_inc;
    };
    auto evaluate = [&](const Matrix& moment) {
        try {
            const JointCovariance joint(moment, n_sub, static_cast<Eigen::Index>(trace.x0_dim));
            const InfoSeries lhs = source_information_series(joint);
            const InfoSeries di = directed_information_series(joint);
            return Values{lhs.values.back(), lhs.increments.back(), di.values.back(),
                          di.increments.back()};
        } catch (const SingularCovarianceError& e) {
            throw InsufficientDataError(std::string("empirical covariance is ill-conditioned: ") +
                                        e.what());
        }
    };

    const Values full = evaluate(total / static_cast<double>(trace.paths));
    std::vector<Values> loo;
    for (std::size_t g = 0; g < groups; ++g)
        loo.push_back(evaluate((total - sums[g]) / static_cast<double>(trace.paths - sizes[g])));

    auto jackknife = [&](double point, double Values::*field) {
        double mean = 0.0;
        for (const Values& v : loo) mean += v.*field;
        mean /= static_cast<double>(groups);
        double ss = 0.0;
        for (const Values& v : loo) ss += (v.*field - mean) * (v.*field - mean);
        return Estimate{point, std::sqrt(ss * static_cast<double>(groups - 1) / groups)};
    };

    PluginEstimates out;
    out.n_sub = n_sub;
    out.paths = trace.paths;
    out.groups = groups;
    out.lhs = jackknife(full.lhs, &Values::lhs);
    out.lhs_increment = jackknife(full.lhs_inc, &Values::lhs_inc);
    out.directed = jackknife(full.di, &Values::di);
    out.directed_increment = jackknife(full.di_inc, &Values::di_inc);
    return out;
}

void write_trace_binary(std::ostream& os, const Trace& t) {
    os.write(kTraceMagic, 8);
    put<std::uint64_t>(os, t.horizon);
    put<std::uint64_t>(os, t.paths);
    put<std::uint64_t>(os, t.seed);
    put<std::uint64_t>(os, t.x0_dim);
    put<std::uint64_t>(os, t.burn_in);
    put<std::uint64_t>(os, static_cast<std::uint64_t>(t.v_family));
    for (const auto* s : {&t.v, &t.w, &t.z, &t.y, &t.u, &t.x0})
        for (double x : *s) put<double>(os, x);
}

Trace read_trace_binary(std::istream& is) {
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kTraceMagic, 8) != 0)
        throw DomainError("not a trace file");
    Trace t;
    t.horizon = get<std::uint64_t>(is);
    t.paths = get<std::uint64_t>(is);
    t.seed = get<std::uint64_t>(is);
    t.x0_dim = get<std::uint64_t>(is);
    t.burn_in = get<std::uint64_t>(is);
    const auto family = get<std::uint64_t>(is);
    if (family > static_cast<std::uint64_t>(NoiseFamily::laplace)) throw DomainError("unknown noise family code");
    t.v_family = static_cast<NoiseFamily>(family);
    for (auto* s : {&t.v, &t.w, &t.z, &t.y, &t.u}) {
        s->resize(t.horizon * t.paths);
        for (double& x : *s) x = get<double>(is);
    }
    t.x0.resize(t.paths * t.x0_dim);
    for (double& x : t.x0) x = get<double>(is);
    t.x0_deterministic = std::all_of(t.x0.begin(), t.x0.end(), [](double x) { return x == 0.0; });
    return t;
}

void write_trace_csv_head(std::ostream& os, const Trace& t, std::size_t rows) {
    char buf[256];
    os << "path,k,v,w,z,y,u\n";
    const std::size_t m = t.paths == 0 ? 0 : std::min(rows, t.horizon);
    for (std::size_t k = 0; k < m; ++k) {
        std::snprintf(buf, sizeof buf, "0,%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", k + 1, t.v[k], t.w[k],
                      t.z[k], t.y[k], t.u[k]);
        os << buf;
    }
}

}  // namespace infolimit
