#pragma once

#include "infolimit/lti.hpp"
#include "infolimit/random.hpp"

namespace fixtures {

using infolimit::LoopSpec;
using infolimit::Matrix;
using infolimit::StateSpace;

/// Plant x+ = u, z = g x + v; controller u = -k y; pole at -g k.
inline LoopSpec ar1_loop(double gk, std::size_t horizon = 200, double x0_var = 1.0) {
    LoopSpec spec;
    spec.plant = StateSpace(Matrix::Zero(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Zero(1, 1));
    spec.controller = StateSpace::gain(-gk);
    spec.x0_covariance = Matrix::Constant(1, 1, x0_var);
    spec.horizon = horizon;
    return spec;
}

/// z = v, y = v + w.
inline LoopSpec zero_plant_loop(double v_variance = 1.0, std::size_t horizon = 20) {
    LoopSpec spec;
    spec.plant = StateSpace::gain(0.0);
    spec.controller = StateSpace::gain(-0.5);
    spec.noise_v.variance = v_variance;
    spec.horizon = horizon;
    return spec;
}

inline Matrix gaussian_matrix(infolimit::Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.gaussian();
    return m;
}

inline Matrix schur_matrix(infolimit::Rng& rng, Eigen::Index n, double radius) {
    Matrix a = gaussian_matrix(rng, n, n);
    const double r = infolimit::spectral_radius(a);
    if (r > 1e-12) a *= radius / r;
    return a;
}

inline StateSpace random_system(infolimit::Rng& rng, Eigen::Index n, double radius, bool feedthrough) {
    return StateSpace(schur_matrix(rng, n, radius), gaussian_matrix(rng, n, 1), gaussian_matrix(rng, 1, n),
                      feedthrough ? gaussian_matrix(rng, 1, 1) : Matrix::Zero(1, 1));
}

/// First-order minimum-phase shaping filter (1 - b e^{-jw}) / (1 - a e^{-jw}).
inline StateSpace shaping_filter(double a, double b) {
    return StateSpace(Matrix::Constant(1, 1, a), Matrix::Ones(1, 1), Matrix::Constant(1, 1, a - b),
                      Matrix::Ones(1, 1));
}

}  // namespace fixtures
