#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include <json.hpp>

#include "infolimit/harness.hpp"
#include "infolimit/random.hpp"

namespace infolimit {

namespace {

Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.gaussian();
    return m;
}

// Random square matrix rescaled to the given spectral radius.
Matrix matrix_with_radius(Rng& rng, Eigen::Index n, double radius) {
    Matrix a = gaussian_matrix(rng, n, n);
    const double r = spectral_radius(a);
    if (r > 1e-12) a *= radius / r;
    return a;
}

// Minimum-phase, stable, biproper shaping filter with D = 1.
std::optional<StateSpace> random_shaping(Rng& rng) {
    for (int attempt = 0; attempt < 20; ++attempt) {
        const Eigen::Index n = rng.integer(1, 2);
        Matrix a = matrix_with_radius(rng, n, rng.uniform(0.1, 0.8));
        Matrix b = gaussian_matrix(rng, n, 1);
        Matrix c = 0.5 * gaussian_matrix(rng, 1, n);
        if (spectral_radius(a - b * c) <= 0.8) return StateSpace(a, b, c, Matrix::Ones(1, 1));
    }
    return std::nullopt;
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

std::optional<LoopSpec> random_loop(const SuiteOptions& options, std::size_t index) {
    Rng rng(stream_seed(options.seed, index));
    const auto lo = static_cast<std::int64_t>(std::max<std::size_t>(options.order_min, 1));
    const auto hi = static_cast<std::int64_t>(std::max<std::size_t>(options.order_max, options.order_min));

    const bool colored_w = options.colored_w_every > 0 && index % options.colored_w_every == options.colored_w_every - 1;
    const bool colored_v = options.colored_v_every > 0 && index % options.colored_v_every == 1 % options.colored_v_every;

    for (int draw = 0; draw < 20; ++draw) {
        const Eigen::Index np = rng.integer(lo, hi);
        const Eigen::Index nc = rng.integer(1, 2);

        LoopSpec spec;
        spec.horizon = options.horizon;
        spec.grid_size = options.grid_size;

        const bool plant_feedthrough = rng.uniform() < 0.5;
        spec.plant = StateSpace(matrix_with_radius(rng, np, rng.uniform(0.1, 0.95) * options.radius_max),
                                gaussian_matrix(rng, np, 1), gaussian_matrix(rng, 1, np),
                                plant_feedthrough ? Matrix(0.5 * gaussian_matrix(rng, 1, 1))
                                                  : Matrix(Matrix::Zero(1, 1)));

        const Matrix ka = matrix_with_radius(rng, nc, rng.uniform(0.1, 0.8));
        const Matrix kb = gaussian_matrix(rng, nc, 1);
        const Matrix kc = gaussian_matrix(rng, 1, nc);
        double gain = rng.uniform(0.2, 1.5);

        const Matrix l = gaussian_matrix(rng, np, np);
        spec.x0_covariance = l * l.transpose() / static_cast<double>(np) +
                             0.1 * Matrix::Identity(np, np);
        spec.noise_v.variance = rng.uniform(0.2, 2.0);
        spec.noise_w.variance = rng.uniform(0.2, 2.0);
        if (colored_v) spec.noise_v.shaping = random_shaping(rng);
        if (colored_w) spec.noise_w.shaping = random_shaping(rng);
        if ((colored_v && !spec.noise_v.shaping) || (colored_w && !spec.noise_w.shaping)) continue;

        for (int shrink = 0; shrink < 40; ++shrink, gain *= 0.7) {
            spec.controller = StateSpace(ka, kb, gain * kc, Matrix::Zero(1, 1));
            try {
                if (close_loop(spec).spectral_radius <= options.radius_max) return spec;
            } catch (const StabilityError&) {
            }
        }
    }
    return std::nullopt;
}

SuiteResult random_suite(const SuiteOptions& options) {
    SuiteResult result;
    result.options = options;
    result.rows.resize(options.count);

    const auto count = static_cast<std::int64_t>(options.count);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t i = 0; i < count; ++i) {
        SuiteRow& row = result.rows[static_cast<std::size_t>(i)];
        row.index = static_cast<std::size_t>(i);
        const std::optional<LoopSpec> spec = random_loop(options, row.index);
        if (!spec) {
            row.skipped = true;
            row.note = "no stable draw within the retry budget";
            continue;
        }
        row.plant_order = static_cast<std::size_t>(spec->plant.states());
        row.controller_order = static_cast<std::size_t>(spec->controller.states());
        row.colored_v = spec->noise_v.shaping.has_value();
        row.colored_w = spec->noise_w.shaping.has_value();
        try {
            const ExactAnalysis analysis = analyze_exact(*spec);
            row.spectral_radius = analysis.loop.spectral_radius;
            row.lhs_rate = analysis.lhs.rate();
            row.di_rate = analysis.directed.rate();
            row.rhs = rhs_terms(analysis.loop, *spec).bound;
            row.slack = row.rhs - row.lhs_rate;
            row.proof = proof_identity_check(*spec, std::min(options.proof_horizon, options.horizon));
            row.verdict = exact_verdict(row.slack, options.tol);
        } catch (const Error& e) {
            row.note = e.what();
            row.verdict = Verdict::inconclusive;
        }
    }

    for (const SuiteRow& row : result.rows) {
        if (row.skipped) {
            ++result.skipped;
            continue;
        }
        if (!row.note.empty()) continue;
        ++result.evaluated;
        if (row.verdict == Verdict::violated) ++result.violations;
        result.min_slack = result.min_slack ? std::min(*result.min_slack, row.slack) : row.slack;
        result.max_chain_residual = std::max(result.max_chain_residual, row.proof.chain_rule);
        result.max_directed_residual = std::max(result.max_directed_residual, row.proof.directed_identity);
    }
    return result;
}

void write_suite_csv(std::ostream& os, const SuiteResult& result) {
    os << "index,skipped,plant_order,controller_order,colored_v,colored_w,spectral_radius,lhs_rate,"
          "di_rate,rhs,slack,chain_residual,directed_residual,monotone_slack,verdict,note\n";
    for (const SuiteRow& r : result.rows) {
        std::string note = r.note;
        std::replace(note.begin(), note.end(), ',', ';');
        std::replace(note.begin(), note.end(), '\n', ' ');
        os << r.index << ',' << (r.skipped ? 1 : 0) << ',' << r.plant_order << ',' << r.controller_order << ','
           << (r.colored_v ? 1 : 0) << ',' << (r.colored_w ? 1 : 0) << ',' << format_double(r.spectral_radius)
           << ',' << format_double(r.lhs_rate) << ',' << format_double(r.di_rate) << ','
           << format_double(r.rhs) << ',' << format_double(r.slack) << ',' << format_double(r.proof.chain_rule)
           << ',' << format_double(r.proof.directed_identity) << ','
           << format_double(r.proof.monotone_slack) << ','
           << (r.skipped ? std::string("SKIPPED") : to_string(r.verdict)) << ',' << note << '\n';
    }
}

std::string suite_summary_json(const SuiteResult& result) {
    using json = nlohmann::ordered_json;
    const SuiteOptions& o = result.options;
    std::size_t colored_w = 0;
    std::size_t inconclusive = 0;
    for (const SuiteRow& r : result.rows) {
        if (!r.skipped && r.colored_w) ++colored_w;
        if (!r.skipped && r.verdict == Verdict::inconclusive) ++inconclusive;
    }
    json j;
    j["options"] = json{{"count", o.count},
                        {"seed", o.seed},
                        {"order_min", o.order_min},
                        {"order_max", o.order_max},
                        {"radius_max", o.radius_max},
                        {"horizon", o.horizon},
                        {"proof_horizon", o.proof_horizon},
                        {"grid_size", o.grid_size},
                        {"colored_w_every", o.colored_w_every},
                        {"colored_v_every", o.colored_v_every}};
    j["evaluated"] = result.evaluated;
    j["skipped"] = result.skipped;
    j["inconclusive"] = inconclusive;
    j["colored_w"] = colored_w;
    j["violations"] = result.violations;
    j["min_slack"] = result.min_slack ? json(*result.min_slack) : json(nullptr);
    j["max_chain_residual"] = result.max_chain_residual;
    j["max_directed_residual"] = result.max_directed_residual;
    j["verdict"] = result.violations > 0 ? "VIOLATED" : inconclusive > 0 ? "INCONCLUSIVE" : "HOLDS";
    return j.dump(2) + "\n";
}

}  // namespace infolimit
