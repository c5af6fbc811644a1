#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "infolimit/errors.hpp"

namespace infolimit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;

/// Margin below 1 required of the spectral radius for a system to count as
/// asymptotically stable.
inline constexpr double kStabilityMargin = 1e-9;

/// Discrete-time realization x+ = A x + B u, y = C x + D u.
///
/// Dimensions are validated on construction; a default-constructed system is
/// the empty 0x0 map.
class StateSpace {
public:
    StateSpace() = default;
    StateSpace(Matrix a, Matrix b, Matrix c, Matrix d);

    /// Static gain y = d u (no state).
    static StateSpace gain(double d);

    const Matrix& a() const noexcept { return a_; }
    const Matrix& b() const noexcept { return b_; }
    const Matrix& c() const noexcept { return c_; }
    const Matrix& d() const noexcept { return d_; }

    Eigen::Index states() const noexcept { return a_.rows(); }
    Eigen::Index inputs() const noexcept { return b_.cols(); }
    Eigen::Index outputs() const noexcept { return c_.rows(); }

    bool is_siso() const noexcept { return inputs() == 1 && outputs() == 1; }

private:
    Matrix a_ = Matrix(0, 0);
    Matrix b_ = Matrix(0, 0);
    Matrix c_ = Matrix(0, 0);
    Matrix d_ = Matrix(0, 0);
};

/// Scalar noise source: a white sequence of the given per-step variance,
/// optionally colored by a stable SISO shaping filter.
struct NoiseSpec {
    double variance = 1.0;
    std::optional<StateSpace> shaping;

    /// Throws DomainError / StabilityError when the invariants fail.
    /// `allow_zero` admits variance == 0 (source switched off).
    void validate(bool allow_zero = false) const;
};

/// Full description of one feedback experiment.
struct LoopSpec {
    StateSpace plant;
    StateSpace controller;
    NoiseSpec noise_v;
    NoiseSpec noise_w;
    /// Covariance of the plant initial state X0. The zero matrix means X0 = 0.
    Matrix x0_covariance;
    std::size_t horizon = 1000;
    std::size_t grid_size = 8192;

    /// Structural validation (dimensions, SISO, well-posedness, noise specs).
    /// Stability is checked by close_loop.
    void validate() const;

    bool x0_deterministic() const;
};

/// Closed loop of the additive-noise feedback channel:
///   z = P(u) + v,   y = z + w,   u = K(y).
///
/// `loop` has inputs (v, w) and outputs (y, z, u) over state (x_plant,
/// x_controller). `augmented` appends the shaping-filter states and is driven
/// by unit-variance white sequences (e_v, e_w); its outputs are
/// (y, z, u, v, w).
struct ClosedLoop {
    enum Input : Eigen::Index { in_v = 0, in_w = 1 };
    enum Output : Eigen::Index { out_y = 0, out_z = 1, out_u = 2, out_v = 3, out_w = 4 };

    StateSpace loop;
    StateSpace augmented;
    Eigen::Index plant_states = 0;
    Eigen::Index controller_states = 0;
    Eigen::Index v_states = 0;
    Eigen::Index w_states = 0;
    double spectral_radius = 0.0;
    Complex dominant_eigenvalue{0.0, 0.0};

    /// Covariance of the augmented initial state: X0 for the plant, zero for
    /// the controller, stationary covariance for the shaping filters.
    Matrix initial_covariance;
};

/// Eigenvalue of A with the largest modulus (0 for an empty matrix).
Complex dominant_eigenvalue(const Matrix& a);
double spectral_radius(const Matrix& a);

/// True iff spectral radius of A < 1 - kStabilityMargin.
bool stability_check(const StateSpace& sys);
bool stability_check(const Matrix& a);

/// Interconnects plant, controller and noise shaping filters. Throws
/// WellPosednessError when both plant and controller have feedthrough and
/// StabilityError when the closed loop is not asymptotically stable.
ClosedLoop close_loop(const LoopSpec& spec);

/// Solves the discrete Lyapunov equation S = A S A^T + Q.
Matrix solve_dlyap(const Matrix& a, const Matrix& q);

/// Uniform frequency grid w_k = -pi + 2 pi k / grid_size.
double grid_frequency(std::size_t k, std::size_t grid_size);

/// Sampled transfer matrix H(e^{jw}) = C (e^{jw} I - A)^{-1} B + D.
class FrequencyResponse {
public:
    FrequencyResponse(std::size_t grid_size, Eigen::Index outputs, Eigen::Index inputs);

    std::size_t grid_size() const noexcept { return grid_size_; }
    Eigen::Index outputs() const noexcept { return outputs_; }
    Eigen::Index inputs() const noexcept { return inputs_; }

    Complex& at(Eigen::Index out, Eigen::Index in, std::size_t k) {
        return values_[index(out, in, k)];
    }
    const Complex& at(Eigen::Index out, Eigen::Index in, std::size_t k) const {
        return values_[index(out, in, k)];
    }

    const std::vector<Complex>& raw() const noexcept { return values_; }

private:
    std::size_t index(Eigen::Index out, Eigen::Index in, std::size_t k) const {
        return (static_cast<std::size_t>(out * inputs_ + in)) * grid_size_ + k;
    }

    std::size_t grid_size_;
    Eigen::Index outputs_;
    Eigen::Index inputs_;
    std::vector<Complex> values_;
};

/// Requires grid_size >= 16; throws SingularityError if e^{jw}I - A is
/// singular at a grid point.
FrequencyResponse frequency_response(const StateSpace& sys, std::size_t grid_size);

}  // namespace infolimit
