#pragma once

// Data-parallel kernels. Every kernel has a serial reference and an OpenMP
// variant; the two produce bit-identical results for any worker count (each
// output element is written by exactly one iteration and reductions use a
// fixed partition and combination order).

#include <cstddef>

#include "infolimit/lti.hpp"

namespace infolimit::kernels {

void frequency_response_serial(const StateSpace& sys, FrequencyResponse& out);
void frequency_response_omp(const StateSpace& sys, FrequencyResponse& out);

/// Inputs of the covariance unrolling of x+ = A x + B e, o = C x + D e with
/// e unit white and x_0 ~ (0, P0). Rows of C/D are the recorded outputs;
/// `x0_cross` = Cov(x_0, X0) selects the initial-state block that is stored
/// in front of the outputs.
struct UnrollProblem {
    const Matrix& a;
    const Matrix& b;
    const Matrix& c;
    const Matrix& d;
    const Matrix& p0;
    const Matrix& x0_cross;
    const Matrix& x0_covariance;
    std::size_t horizon;
};

/// Fills `out` (side nx0 + q*n) with the covariance of
/// (X0, o_0[0..n), o_1[0..n), ..., o_{q-1}[0..n)), output-major.
void unroll_covariance_serial(const UnrollProblem& problem, Matrix& out);
void unroll_covariance_omp(const UnrollProblem& problem, Matrix& out);

/// Rows per chunk of the second-moment reduction. Part of the determinism
/// contract: changing it changes the last bits of every estimate.
inline constexpr Eigen::Index kMomentChunk = 64;

/// (1/rows) * X^T X, accumulated in fixed chunks of kMomentChunk rows whose
/// partial sums are combined in chunk order.
Matrix second_moment_serial(const Matrix& samples);
Matrix second_moment_omp(const Matrix& samples);

}  // namespace infolimit::kernels
