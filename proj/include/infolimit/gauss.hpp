#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "infolimit/lti.hpp"

namespace infolimit {

/// Relative positive-definiteness tolerance: a conditional variance (Cholesky
/// pivot) must exceed kPdTolerance * trace of the covariance it comes from.
inline constexpr double kPdTolerance = 1e-12;

/// Largest horizon the dense covariance unrolling accepts.
inline constexpr std::size_t kMaxHorizon = 4000;

/// Named blocks of the stacked Gaussian vector (X0, V^n, W^n, Z^n, Y^n).
enum class Block { x0, v, w, z, y };

std::string to_string(Block b);

/// Leading part of a block: the first `count` entries (all of them when
/// count == npos). For X0 the count is ignored.
struct Slice {
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
    Block block;
    std::size_t count = npos;
};

using Vars = std::vector<Slice>;

/// Exact covariance of (X0, V_1..V_n, W_1..W_n, Z_1..Z_n, Y_1..Y_n) for one
/// loop, stored block-contiguous in that order.
class JointCovariance {
public:
    JointCovariance(Matrix cov, std::size_t horizon, Eigen::Index x0_dim);

    std::size_t horizon() const noexcept { return horizon_; }
    Eigen::Index x0_dim() const noexcept { return x0_dim_; }
    const Matrix& matrix() const noexcept { return cov_; }

    Eigen::Index offset(Block b) const;
    Eigen::Index size(Block b) const;
    /// True when the block's covariance is identically zero (e.g. X0 with zero
    /// covariance, or v switched off). Such blocks carry no information and
    /// are excluded from source sets.
    bool deterministic(Block b) const;

    /// Index of time step i (1-based) of a time-indexed block.
    Eigen::Index at(Block b, std::size_t i) const;

    std::vector<Eigen::Index> indices(const Vars& vars) const;
    Matrix gather(std::span<const Eigen::Index> idx) const;

private:
    Matrix cov_;
    std::size_t horizon_;
    Eigen::Index x0_dim_;
};

/// Conditional variances along a fixed variable order: entry i is
/// Var(x_i | x_0..x_{i-1}). Variables flagged conditioning-only whose pivot
/// falls below the tolerance are a.s. determined by their predecessors and
/// are skipped (they condition nothing); any other such pivot throws
/// SingularCovarianceError.
struct OrderedPivots {
    std::vector<double> log_variance;  // NaN where skipped
    std::vector<char> skipped;
};

OrderedPivots ordered_log_variances(Matrix cov, std::span<const char> conditioning_only = {});

/// 1/2 ln((2 pi e)^d det cov). Throws SingularCovarianceError unless strictly
/// positive definite.
double gaussian_entropy(const Matrix& cov);

/// Joint covariance of the loop over the spec's horizon (or `horizon` when
/// nonzero). Throws CapacityError above kMaxHorizon.
JointCovariance horizon_covariance(const LoopSpec& spec, std::size_t horizon = 0);
JointCovariance horizon_covariance(const ClosedLoop& loop, std::size_t horizon);

/// Entropy of a variable set, in nats.
double entropy(const JointCovariance& joint, const Vars& vars);

double mutual_information(const JointCovariance& joint, const Vars& a, const Vars& b);

/// I(a; b | given). An empty or deterministic `given` reduces to I(a; b).
double conditional_mutual_information(const JointCovariance& joint, const Vars& a,
                                      const Vars& b, const Vars& given);

/// h(target | given); deterministic parts of `given` are skipped.
double conditional_entropy(const JointCovariance& joint, const Vars& target, const Vars& given);

/// Cumulative information over horizons 1..n with first differences.
struct InfoSeries {
    std::vector<double> values;
    std::vector<double> increments;

    std::size_t size() const noexcept { return values.size(); }
    /// Final increment I_n - I_{n-1}.
    double rate() const;
    /// I_n / n.
    double average() const;
};

/// CSV with header `n,cumulative,increment`.
void write_info_series_csv(std::ostream& os, const InfoSeries& series);

enum class DirectedForm {
    causal,  // sum_i I(Z^i; Y_i | Y^{i-1})
    literal  // sum_i I(Z^n; Y_i | Y^{i-1})
};

/// Directed information from Z to Y over the first n steps.
double directed_information(const JointCovariance& joint, std::size_t n,
                            DirectedForm form = DirectedForm::causal);

/// Causal directed information for every horizon 1..joint.horizon().
InfoSeries directed_information_series(const JointCovariance& joint);

/// I((X0, V^m); Y^m) for m = 1..joint.horizon(). Deterministic X0 / V blocks
/// are dropped from the source set.
InfoSeries source_information_series(const JointCovariance& joint);

/// h(Y_i | Y^{i-1}) - h(W_i | W^{i-1}) summed: the entropy-difference series
/// h(Y^m) - h(W^m).
InfoSeries entropy_gap_series(const JointCovariance& joint);

/// Residuals of the checkable proof steps at horizon n, all in nats.
struct ProofResiduals {
    std::size_t horizon = 0;
    /// |I((X0,V);Y) - I(X0;Y) - I(V;Y|X0)|
    double chain_rule = 0.0;
    /// |DI(Z->Y) - (h(Y) - h(W))|
    double directed_identity = 0.0;
    /// (h(Y) - h(W)) - I((X0,V);Y); nonnegative up to roundoff.
    double monotone_slack = 0.0;
    /// max_i |h(Y_i | Y^{i-1}, Z^i) - h(W_i | W^{i-1})| (channel inversion).
    double inversion = 0.0;
    /// min_i over both gaps of h(Y_i|Y^{i-1}) >= h(Y_i|Y^{i-1},X0) >=
    /// h(Y_i|Y^{i-1},X0,V^n); nonnegative up to roundoff.
    double conditioning_gap = 0.0;

    double worst_identity() const;
};

ProofResiduals proof_identity_check(const LoopSpec& spec, std::size_t n = 100);
ProofResiduals proof_identity_check(const JointCovariance& joint);

/// I((X0,V^n);Y^n) for n = 1..spec.horizon; rate() is the final increment.
InfoSeries lhs_rate(const LoopSpec& spec);

/// Everything the harness needs from one covariance unrolling.
struct ExactAnalysis {
    ClosedLoop loop;
    InfoSeries lhs;
    InfoSeries directed;
    InfoSeries entropy_gap;
    double entropy_y = 0.0;  // h(Y^n)
    double entropy_w = 0.0;  // h(W^n)
};

ExactAnalysis analyze_exact(const LoopSpec& spec);

}  // namespace infolimit
