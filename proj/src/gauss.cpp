#include "infolimit/gauss.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "infolimit/kernels.hpp"

namespace infolimit {

namespace {

const double kLog2PiE = std::log(2.0 * std::numbers::pi * std::numbers::e);

constexpr Eigen::Index kPanel = 64;

Vars concat(Vars a, const Vars& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

// Sources of the left-hand side: X0 and V, minus deterministic blocks.
Vars source_vars(const JointCovariance& joint, std::size_t m = Slice::npos) {
    Vars s;
    if (!joint.deterministic(Block::x0)) s.push_back({Block::x0});
    if (!joint.deterministic(Block::v)) s.push_back({Block::v, m});
    return s;
}

std::vector<Eigen::Index> time_range(const JointCovariance& joint, Block b, std::size_t n) {
    std::vector<Eigen::Index> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = joint.at(b, i + 1);
    return idx;
}

// lead..., then blocks interleaved per time step: b0_1, b1_1, b0_2, b1_2, ...
std::vector<Eigen::Index> interleaved(const JointCovariance& joint,
                                      const std::vector<Eigen::Index>& lead,
                                      std::initializer_list<Block> blocks, std::size_t n) {
    std::vector<Eigen::Index> idx = lead;
    for (std::size_t i = 1; i <= n; ++i)
        for (Block b : blocks) idx.push_back(joint.at(b, i));
    return idx;
}

OrderedPivots pivots_of(const JointCovariance& joint, const std::vector<Eigen::Index>& idx,
                        const std::vector<char>& cond) {
    return ordered_log_variances(joint.gather(idx), cond);
}

std::vector<double> log_var_y(const JointCovariance& joint, std::size_t n) {
    return pivots_of(joint, time_range(joint, Block::y, n), {}).log_variance;
}

InfoSeries from_increments(std::vector<double> inc) {
    InfoSeries s;
    s.values.resize(inc.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < inc.size(); ++i) {
        acc += inc[i];
        s.values[i] = acc;
    }
    s.increments = std::move(inc);
    return s;
}

InfoSeries source_series(const JointCovariance& joint, const std::vector<double>& lv_y) {
    const std::size_t n = joint.horizon();
    const bool x0 = !joint.deterministic(Block::x0);
    const bool v = !joint.deterministic(Block::v);
    if (!x0 && !v) return from_increments(std::vector<double>(n, 0.0));

    std::vector<Eigen::Index> lead;
    if (x0)
        for (Eigen::Index k = 0; k < joint.x0_dim(); ++k) lead.push_back(joint.offset(Block::x0) + k);

    // h(S^m): X0 then V_1..V_n.
    std::vector<double> lv_s;
    if (v) {
        std::vector<Eigen::Index> idx = lead;
        const auto vi = time_range(joint, Block::v, n);
        idx.insert(idx.end(), vi.begin(), vi.end());
        lv_s = pivots_of(joint, idx, {}).log_variance;
    } else {
        lv_s = pivots_of(joint, lead, {}).log_variance;
    }
    // h(S^m, Y^m): X0 then (V_i, Y_i) interleaved.
    const std::vector<Eigen::Index> jidx =
        v ? interleaved(joint, lead, {Block::v, Block::y}, n) : interleaved(joint, lead, {Block::y}, n);
    const std::vector<double> lv_j = pivots_of(joint, jidx, {}).log_variance;

    const std::size_t nl = lead.size();
    const std::size_t stride = v ? 2 : 1;
    std::vector<double> inc(n);
    for (std::size_t i = 0; i < n; ++i) {
        double d = lv_y[i] - lv_j[nl + stride * i + (stride - 1)];
        if (v) d += lv_s[nl + i] - lv_j[nl + stride * i];
        if (i == 0)
            for (std::size_t k = 0; k < nl; ++k) d += lv_s[k] - lv_j[k];
        inc[i] = 0.5 * d;
    }
    return from_increments(std::move(inc));
}

// Var(Y_i | Y^{i-1}, Z^i) along (Z_1, Y_1, Z_2, Y_2, ...), Z conditioning-only.
std::vector<double> log_var_y_given_causal_z(const JointCovariance& joint, std::size_t n) {
    const auto idx = interleaved(joint, {}, {Block::z, Block::y}, n);
    std::vector<char> cond(idx.size(), 0);
    for (std::size_t i = 0; i < n; ++i) cond[2 * i] = 1;
    const auto lv = pivots_of(joint, idx, cond).log_variance;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = lv[2 * i + 1];
    return out;
}

InfoSeries directed_series(const JointCovariance& joint, const std::vector<double>& lv_y,
                           std::size_t n) {
    const auto lv_c = log_var_y_given_causal_z(joint, n);
    std::vector<double> inc(n);
    for (std::size_t i = 0; i < n; ++i) inc[i] = 0.5 * (lv_y[i] - lv_c[i]);
    return from_increments(std::move(inc));
}

InfoSeries gap_series(const JointCovariance& joint, const std::vector<double>& lv_y) {
    const std::size_t n = joint.horizon();
    const auto lv_w = pivots_of(joint, time_range(joint, Block::w, n), {}).log_variance;
    std::vector<double> inc(n);
    for (std::size_t i = 0; i < n; ++i) inc[i] = 0.5 * (lv_y[i] - lv_w[i]);
    return from_increments(std::move(inc));
}

double entropy_from(const std::vector<double>& lv) {
    double s = 0.0;
    for (double x : lv) s += kLog2PiE + x;
    return 0.5 * s;
}

}  // namespace

std::string to_string(Block b) {
    switch (b) {
        case Block::x0: return "X0";
        case Block::v: return "V";
        case Block::w: return "W";
        case Block::z: return "Z";
        case Block::y: return "Y";
    }
    return "?";
}

JointCovariance::JointCovariance(Matrix cov, std::size_t horizon, Eigen::Index x0_dim)
    : cov_(std::move(cov)), horizon_(horizon), x0_dim_(x0_dim) {
    const Eigen::Index side = x0_dim + 4 * static_cast<Eigen::Index>(horizon);
    if (cov_.rows() != side || cov_.cols() != side)
        throw DimensionError("joint covariance must have side " + std::to_string(side));
}

Eigen::Index JointCovariance::offset(Block b) const {
    const auto n = static_cast<Eigen::Index>(horizon_);
    switch (b) {
        case Block::x0: return 0;
        case Block::v: return x0_dim_;
        case Block::w: return x0_dim_ + n;
        case Block::z: return x0_dim_ + 2 * n;
        case Block::y: return x0_dim_ + 3 * n;
    }
    return 0;
}

Eigen::Index JointCovariance::size(Block b) const {
    return b == Block::x0 ? x0_dim_ : static_cast<Eigen::Index>(horizon_);
}

bool JointCovariance::deterministic(Block b) const {
    const Eigen::Index o = offset(b), s = size(b);
    return s == 0 || (cov_.block(o, o, s, s).array() == 0.0).all();
}

Eigen::Index JointCovariance::at(Block b, std::size_t i) const {
    if (b == Block::x0 || i == 0 || i > horizon_)
        throw DomainError("time index " + std::to_string(i) + " out of range for block " +
                          to_string(b));
    return offset(b) + static_cast<Eigen::Index>(i - 1);
}

std::vector<Eigen::Index> JointCovariance::indices(const Vars& vars) const {
    std::vector<Eigen::Index> idx;
    for (const Slice& s : vars) {
        const Eigen::Index o = offset(s.block);
        Eigen::Index count = size(s.block);
        if (s.block != Block::x0 && s.count != Slice::npos) {
            if (s.count > horizon_)
                throw DomainError("slice of " + to_string(s.block) + " exceeds horizon");
            count = static_cast<Eigen::Index>(s.count);
        }
        for (Eigen::Index k = 0; k < count; ++k) idx.push_back(o + k);
    }
    return idx;
}

Matrix JointCovariance::gather(std::span<const Eigen::Index> idx) const {
    const auto d = static_cast<Eigen::Index>(idx.size());
    Matrix out(d, d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < d; ++i) out(i, j) = cov_(idx[i], idx[j]);
    return out;
}

OrderedPivots ordered_log_variances(Matrix a, std::span<const char> conditioning_only) {
    const Eigen::Index d = a.rows();
    if (a.cols() != d) throw DimensionError("covariance must be square");
    if (!conditioning_only.empty() && static_cast<Eigen::Index>(conditioning_only.size()) != d)
        throw DimensionError("conditioning mask has wrong length");
    OrderedPivots out;
    out.log_variance.assign(static_cast<std::size_t>(d), std::numeric_limits<double>::quiet_NaN());
    out.skipped.assign(static_cast<std::size_t>(d), 0);
    if (d == 0) return out;
    if (!a.allFinite()) throw SingularCovarianceError("covariance has non-finite entries");

    const double threshold = kPdTolerance * std::max(a.trace(), 0.0);

    // Blocked right-looking Cholesky on the lower triangle. Panel columns are
    // factored left-looking; skipped columns are zeroed so they drop out of
    // every later update.
    for (Eigen::Index k0 = 0; k0 < d; k0 += kPanel) {
        const Eigen::Index kb = std::min(kPanel, d - k0);
        for (Eigen::Index c = k0; c < k0 + kb; ++c) {
            const Eigen::Index rows = d - c;
            if (c > k0)
                a.col(c).tail(rows).noalias() -=
                    a.block(c, k0, rows, c - k0) * a.row(c).segment(k0, c - k0).transpose();
            const double piv = a(c, c);
            if (!(piv > threshold)) {
                if (!conditioning_only.empty() && conditioning_only[c]) {
                    a.col(c).tail(rows).setZero();
                    out.skipped[c] = 1;
                    continue;
                }
                throw SingularCovarianceError(
                    "covariance is not positive definite: conditional variance " +
                    std::to_string(piv) + " of variable " + std::to_string(c) +
                    " is below tolerance " + std::to_string(threshold));
            }
            const double l = std::sqrt(piv);
            a(c, c) = l;
            if (rows > 1) a.col(c).tail(rows - 1) /= l;
            out.log_variance[c] = std::log(piv);
        }
        const Eigen::Index rest = d - k0 - kb;
        if (rest > 0)
            a.bottomRightCorner(rest, rest)
                .selfadjointView<Eigen::Lower>()
                .rankUpdate(a.block(k0 + kb, k0, rest, kb), -1.0);
    }
    return out;
}

double gaussian_entropy(const Matrix& cov) {
    if (cov.rows() != cov.cols()) throw DimensionError("covariance must be square");
    if (cov.rows() > 0 &&
        (cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + cov.cwiseAbs().maxCoeff()))
        throw DomainError("covariance must be symmetric");
    return entropy_from(ordered_log_variances(cov).log_variance);
}

JointCovariance horizon_covariance(const ClosedLoop& loop, std::size_t horizon) {
    if (horizon == 0) throw DomainError("horizon must be at least 1");
    if (horizon > kMaxHorizon)
        throw CapacityError("horizon " + std::to_string(horizon) +
                            " exceeds the dense-unrolling limit " + std::to_string(kMaxHorizon));
    const StateSpace& s = loop.augmented;
    const Eigen::Index np = loop.plant_states;
    // Output rows in block order V, W, Z, Y.
    const std::array<Eigen::Index, 4> rows{ClosedLoop::out_v, ClosedLoop::out_w, ClosedLoop::out_z,
                                           ClosedLoop::out_y};
    Matrix c(4, s.states()), d(4, s.inputs());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        c.row(static_cast<Eigen::Index>(r)) = s.c().row(rows[r]);
        d.row(static_cast<Eigen::Index>(r)) = s.d().row(rows[r]);
    }
    const Matrix& p0 = loop.initial_covariance;
    const Matrix x0_cross = p0.leftCols(np);
    const Matrix x0_cov = p0.topLeftCorner(np, np);
    const kernels::UnrollProblem problem{s.a(), s.b(), c, d, p0, x0_cross, x0_cov, horizon};
    Matrix cov(np + 4 * static_cast<Eigen::Index>(horizon), np + 4 * static_cast<Eigen::Index>(horizon));
    kernels::unroll_covariance_omp(problem, cov);
    return JointCovariance(std::move(cov), horizon, np);
}

JointCovariance horizon_covariance(const LoopSpec& spec, std::size_t horizon) {
    return horizon_covariance(close_loop(spec), horizon == 0 ? spec.horizon : horizon);
}

double entropy(const JointCovariance& joint, const Vars& vars) {
    return gaussian_entropy(joint.gather(joint.indices(vars)));
}

double mutual_information(const JointCovariance& joint, const Vars& a, const Vars& b) {
    return entropy(joint, a) + entropy(joint, b) - entropy(joint, concat(a, b));
}

double conditional_entropy(const JointCovariance& joint, const Vars& target, const Vars& given) {
    const auto gi = joint.indices(given);
    auto idx = gi;
    const auto ti = joint.indices(target);
    idx.insert(idx.end(), ti.begin(), ti.end());
    std::vector<char> cond(idx.size(), 0);
    std::fill(cond.begin(), cond.begin() + static_cast<std::ptrdiff_t>(gi.size()), 1);
    const auto lv = pivots_of(joint, idx, cond).log_variance;
    return entropy_from(std::vector<double>(lv.begin() + static_cast<std::ptrdiff_t>(gi.size()), lv.end()));
}

double conditional_mutual_information(const JointCovariance& joint, const Vars& a, const Vars& b,
                                      const Vars& given) {
    return conditional_entropy(joint, a, given) - conditional_entropy(joint, a, concat(given, b));
}

double InfoSeries::rate() const {
    if (increments.empty()) throw DomainError("empty information series");
    return increments.back();
}

double InfoSeries::average() const {
    if (values.empty()) throw DomainError("empty information series");
    return values.back() / static_cast<double>(values.size());
}

void write_info_series_csv(std::ostream& os, const InfoSeries& series) {
    char buf[96];
    os << "n,cumulative,increment\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i + 1, series.values[i],
                      series.increments[i]);
        os << buf;
    }
}

double directed_information(const JointCovariance& joint, std::size_t n, DirectedForm form) {
    if (n == 0 || n > joint.horizon())
        throw DomainError("directed information horizon must be in 1.." +
                          std::to_string(joint.horizon()));
    const auto lv_y = log_var_y(joint, n);
    if (form == DirectedForm::causal) return directed_series(joint, lv_y, n).values.back();

    // Z^n first, then Y_1..Y_n.
    auto idx = time_range(joint, Block::z, n);
    const auto yi = time_range(joint, Block::y, n);
    idx.insert(idx.end(), yi.begin(), yi.end());
    std::vector<char> cond(idx.size(), 0);
    std::fill(cond.begin(), cond.begin() + static_cast<std::ptrdiff_t>(n), 1);
    const auto lv = pivots_of(joint, idx, cond).log_variance;
    double di = 0.0;
    for (std::size_t i = 0; i < n; ++i) di += 0.5 * (lv_y[i] - lv[n + i]);
    return di;
}

InfoSeries directed_information_series(const JointCovariance& joint) {
    return directed_series(joint, log_var_y(joint, joint.horizon()), joint.horizon());
}

InfoSeries source_information_series(const JointCovariance& joint) {
    return source_series(joint, log_var_y(joint, joint.horizon()));
}

InfoSeries entropy_gap_series(const JointCovariance& joint) {
    return gap_series(joint, log_var_y(joint, joint.horizon()));
}

double ProofResiduals::worst_identity() const { return std::max(chain_rule, directed_identity); }

ProofResiduals proof_identity_check(const JointCovariance& joint) {
    const std::size_t n = joint.horizon();
    ProofResiduals r;
    r.horizon = n;

    const Vars y{{Block::y}};
    const Vars sources = source_vars(joint);
    const bool x0 = !joint.deterministic(Block::x0);
    const bool v = !joint.deterministic(Block::v);

    // (a) chain rule, each side from its own log-determinants.
    const double i_total = sources.empty() ? 0.0 : mutual_information(joint, sources, y);
    const double i_x0 = x0 ? mutual_information(joint, {{Block::x0}}, y) : 0.0;
    const Vars x0_given = x0 ? Vars{{Block::x0}} : Vars{};
    const double i_v = v ? conditional_mutual_information(joint, {{Block::v}}, y, x0_given) : 0.0;
    r.chain_rule = std::abs(i_total - (i_x0 + i_v));

    // (b) DI(Z^n -> Y^n) = h(Y^n) - h(W^n).
    const double h_y = entropy(joint, y);
    const double h_w = entropy(joint, {{Block::w}});
    const double di = directed_information(joint, n);
    r.directed_identity = std::abs(di - (h_y - h_w));

    // (c) I((X0,V^n);Y^n) <= h(Y^n) - h(W^n).
    r.monotone_slack = (h_y - h_w) - i_total;

    // Channel inversion: h(Y_i | Y^{i-1}, Z^i) = h(W_i | W^{i-1}).
    const auto lv_c = log_var_y_given_causal_z(joint, n);
    const auto lv_w = pivots_of(joint, time_range(joint, Block::w, n), {}).log_variance;
    for (std::size_t i = 0; i < n; ++i)
        r.inversion = std::max(r.inversion, 0.5 * std::abs(lv_c[i] - lv_w[i]));

    // Conditioning reduces entropy, term by term.
    const auto lv_y = log_var_y(joint, n);
    auto conditioned = [&](const Vars& given) {
        auto idx = joint.indices(given);
        const std::size_t lead = idx.size();
        const auto yi = time_range(joint, Block::y, n);
        idx.insert(idx.end(), yi.begin(), yi.end());
        std::vector<char> cond(idx.size(), 0);
        std::fill(cond.begin(), cond.begin() + static_cast<std::ptrdiff_t>(lead), 1);
        const auto lv = pivots_of(joint, idx, cond).log_variance;
        return std::vector<double>(lv.begin() + static_cast<std::ptrdiff_t>(lead), lv.end());
    };
    const auto lv_yx = conditioned({{Block::x0}});
    const auto lv_yxv = conditioned({{Block::x0}, {Block::v}});
    r.conditioning_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        r.conditioning_gap =
            std::min({r.conditioning_gap, 0.5 * (lv_y[i] - lv_yx[i]), 0.5 * (lv_yx[i] - lv_yxv[i])});
    return r;
}

ProofResiduals proof_identity_check(const LoopSpec& spec, std::size_t n) {
    return proof_identity_check(horizon_covariance(spec, n));
}

InfoSeries lhs_rate(const LoopSpec& spec) {
    return source_information_series(horizon_covariance(spec));
}

ExactAnalysis analyze_exact(const LoopSpec& spec) {
    ExactAnalysis out;
    out.loop = close_loop(spec);
    const JointCovariance joint = horizon_covariance(out.loop, spec.horizon);
    const auto lv_y = log_var_y(joint, joint.horizon());
    out.lhs = source_series(joint, lv_y);
    out.directed = directed_series(joint, lv_y, joint.horizon());
    out.entropy_gap = gap_series(joint, lv_y);
    out.entropy_y = entropy_from(lv_y);
    out.entropy_w = out.entropy_y - out.entropy_gap.values.back();
    return out;
}

}  // namespace infolimit
