#include "infolimit/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <vector>

namespace infolimit::kernels {

namespace {

// Returns false when e^{jw}I - A is numerically singular.
bool response_at(const StateSpace& sys, std::size_t k, FrequencyResponse& out) {
    const double w = grid_frequency(k, out.grid_size());
    const Complex z = std::polar(1.0, w);
    const Eigen::Index n = sys.states();
    Eigen::MatrixXcd h = sys.d().cast<Complex>();
    if (n > 0) {
        Eigen::MatrixXcd m = -sys.a().cast<Complex>();
        m.diagonal().array() += z;
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(m);
        if (!(lu.rcond() > 1e-13)) return false;
        h.noalias() += sys.c().cast<Complex>() * lu.solve(sys.b().cast<Complex>());
    }
    for (Eigen::Index o = 0; o < h.rows(); ++o)
        for (Eigen::Index i = 0; i < h.cols(); ++i) out.at(o, i, k) = h(o, i);
    return true;
}

[[noreturn]] void throw_singular(const FrequencyResponse& out, std::size_t k) {
    throw SingularityError("e^{jw}I - A is singular at grid frequency w = " +
                           std::to_string(grid_frequency(k, out.grid_size())));
}

void check_unroll(const UnrollProblem& p, const Matrix& out) {
    const auto q = p.c.rows();
    const auto side = p.x0_cross.cols() + q * static_cast<Eigen::Index>(p.horizon);
    if (out.rows() != side || out.cols() != side)
        throw DimensionError("unroll output has wrong size");
}

// State covariances P_t, and the cross terms F_t = A P_t C^T + B D^T, t < n.
struct UnrollTables {
    std::vector<Matrix> markov;  // C A^k
    std::vector<Matrix> cross;   // F_t
    std::vector<Matrix> diag;    // C P_t C^T + D D^T
};

UnrollTables unroll_tables(const UnrollProblem& p) {
    const std::size_t n = p.horizon;
    UnrollTables t;
    t.markov.reserve(n);
    t.cross.reserve(n);
    t.diag.reserve(n);
    const Matrix bbt = p.b * p.b.transpose();
    const Matrix bdt = p.b * p.d.transpose();
    const Matrix ddt = p.d * p.d.transpose();
    Matrix state = p.p0;
    Matrix markov = p.c;
    for (std::size_t s = 0; s < n; ++s) {
        t.markov.push_back(markov);
        const Matrix pct = state * p.c.transpose();
        t.cross.push_back(p.a * pct + bdt);
        t.diag.push_back(p.c * pct + ddt);
        markov = markov * p.a;
        Matrix next = p.a * state * p.a.transpose() + bbt;
        state = 0.5 * (next + next.transpose());
    }
    return t;
}

// Column block j: Cov(o_t, o_j) for t >= j, mirrored into the upper triangle.
void unroll_column(const UnrollProblem& p, const UnrollTables& t, std::size_t j, Matrix& out) {
    const Eigen::Index q = p.c.rows();
    const Eigen::Index nx0 = p.x0_cross.cols();
    const auto n = static_cast<Eigen::Index>(p.horizon);
    const auto jj = static_cast<Eigen::Index>(j);
    Matrix blk(q, q);
    for (Eigen::Index tt = jj; tt < n; ++tt) {
        if (tt == jj)
            blk = t.diag[j];
        else
            blk.noalias() = t.markov[static_cast<std::size_t>(tt - jj - 1)] * t.cross[j];
        for (Eigen::Index r = 0; r < q; ++r)
            for (Eigen::Index c = 0; c < q; ++c) {
                const Eigen::Index row = nx0 + r * n + tt;
                const Eigen::Index col = nx0 + c * n + jj;
                out(row, col) = blk(r, c);
                out(col, row) = blk(r, c);
            }
    }
}

// Row block of Cov(o_t, X0) = C A^t Cov(x_0, X0).
void unroll_x0_row(const UnrollProblem& p, const UnrollTables& t, std::size_t s, Matrix& out) {
    const Eigen::Index q = p.c.rows();
    const Eigen::Index nx0 = p.x0_cross.cols();
    const auto n = static_cast<Eigen::Index>(p.horizon);
    const Matrix blk = t.markov[s] * p.x0_cross;
    for (Eigen::Index r = 0; r < q; ++r)
        for (Eigen::Index c = 0; c < nx0; ++c) {
            const Eigen::Index row = nx0 + r * n + static_cast<Eigen::Index>(s);
            out(row, c) = blk(r, c);
            out(c, row) = blk(r, c);
        }
}

void chunk_moment(const Matrix& samples, Eigen::Index chunk, Matrix& acc) {
    const Eigen::Index begin = chunk * kMomentChunk;
    const Eigen::Index rows = std::min(kMomentChunk, samples.rows() - begin);
    const auto block = samples.middleRows(begin, rows);
    acc.noalias() = block.transpose() * block;
}

Matrix combine(const std::vector<Matrix>& partial, const Matrix& samples) {
    Matrix sum = Matrix::Zero(samples.cols(), samples.cols());
    for (const Matrix& m : partial) sum += m;
    sum /= static_cast<double>(samples.rows());
    return 0.5 * (sum + sum.transpose());
}

}  // namespace

void frequency_response_serial(const StateSpace& sys, FrequencyResponse& out) {
    for (std::size_t k = 0; k < out.grid_size(); ++k)
        if (!response_at(sys, k, out)) throw_singular(out, k);
}

void frequency_response_omp(const StateSpace& sys, FrequencyResponse& out) {
    const auto grid = static_cast<std::ptrdiff_t>(out.grid_size());
    std::atomic<std::ptrdiff_t> first_bad{grid};
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < grid; ++k) {
        if (!response_at(sys, static_cast<std::size_t>(k), out)) {
            std::ptrdiff_t cur = first_bad.load();
            while (k < cur && !first_bad.compare_exchange_weak(cur, k)) {
            }
        }
    }
    if (first_bad.load() < grid) throw_singular(out, static_cast<std::size_t>(first_bad.load()));
}

void unroll_covariance_serial(const UnrollProblem& p, Matrix& out) {
    check_unroll(p, out);
    const UnrollTables t = unroll_tables(p);
    const Eigen::Index nx0 = p.x0_cross.cols();
    out.topLeftCorner(nx0, nx0) = p.x0_covariance;
    for (std::size_t s = 0; s < p.horizon; ++s) unroll_x0_row(p, t, s, out);
    for (std::size_t j = 0; j < p.horizon; ++j) unroll_column(p, t, j, out);
}

void unroll_covariance_omp(const UnrollProblem& p, Matrix& out) {
    check_unroll(p, out);
    const UnrollTables t = unroll_tables(p);
    const Eigen::Index nx0 = p.x0_cross.cols();
    out.topLeftCorner(nx0, nx0) = p.x0_covariance;
    const auto n = static_cast<std::ptrdiff_t>(p.horizon);
#pragma omp parallel
    {
#pragma omp for schedule(static)
        for (std::ptrdiff_t s = 0; s < n; ++s) unroll_x0_row(p, t, static_cast<std::size_t>(s), out);
#pragma omp for schedule(dynamic, 16)
        for (std::ptrdiff_t j = 0; j < n; ++j) unroll_column(p, t, static_cast<std::size_t>(j), out);
    }
}

Matrix second_moment_serial(const Matrix& samples) {
    const Eigen::Index chunks = (samples.rows() + kMomentChunk - 1) / kMomentChunk;
    std::vector<Matrix> partial(static_cast<std::size_t>(chunks));
    for (Eigen::Index c = 0; c < chunks; ++c) chunk_moment(samples, c, partial[c]);
    return combine(partial, samples);
}

Matrix second_moment_omp(const Matrix& samples) {
    const Eigen::Index chunks = (samples.rows() + kMomentChunk - 1) / kMomentChunk;
    std::vector<Matrix> partial(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static)
    for (Eigen::Index c = 0; c < chunks; ++c) chunk_moment(samples, c, partial[c]);
    return combine(partial, samples);
}

}  // namespace infolimit::kernels
