#include "infolimit/lti.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "infolimit/kernels.hpp"

namespace infolimit {

namespace {

bool all_finite(const Matrix& m) { return m.size() == 0 || m.allFinite(); }

std::string dims(const Matrix& m) {
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

}  // namespace

StateSpace::StateSpace(Matrix a, Matrix b, Matrix c, Matrix d)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), d_(std::move(d)) {
    if (a_.rows() != a_.cols())
        throw DimensionError("state matrix A must be square, got " + dims(a_));
    if (b_.rows() != a_.rows())
        throw DimensionError("B has " + dims(b_) + ", expected " +
                             std::to_string(a_.rows()) + " rows");
    if (c_.cols() != a_.rows())
        throw DimensionError("C has " + dims(c_) + ", expected " +
                             std::to_string(a_.rows()) + " columns");
    if (d_.rows() != c_.rows() || d_.cols() != b_.cols())
        throw DimensionError("D has " + dims(d_) + ", expected " +
                             std::to_string(c_.rows()) + "x" + std::to_string(b_.cols()));
    if (!all_finite(a_) || !all_finite(b_) || !all_finite(c_) || !all_finite(d_))
        throw DomainError("state-space matrices must be finite");
}

StateSpace StateSpace::gain(double d) {
    return StateSpace(Matrix(0, 0), Matrix(0, 1), Matrix(1, 0), Matrix::Constant(1, 1, d));
}

void NoiseSpec::validate(bool allow_zero) const {
    if (!std::isfinite(variance) || variance < 0.0 || (!allow_zero && variance == 0.0))
        throw DomainError("noise variance must be positive, got " + std::to_string(variance));
    if (shaping) {
        if (!shaping->is_siso()) throw DimensionError("noise shaping filter must be SISO");
        if (!stability_check(*shaping)) {
            const Complex ev = dominant_eigenvalue(shaping->a());
            throw StabilityError("noise shaping filter is not asymptotically stable", ev);
        }
    }
}

bool LoopSpec::x0_deterministic() const {
    return x0_covariance.size() == 0 || (x0_covariance.array() == 0.0).all();
}

void LoopSpec::validate() const {
    if (!plant.is_siso()) throw DimensionError("plant must be SISO (scalar u and z)");
    if (!controller.is_siso()) throw DimensionError("controller must be SISO (scalar y and u)");
    if (plant.d()(0, 0) * controller.d()(0, 0) != 0.0)
        throw WellPosednessError(
            "algebraic loop: plant and controller both have direct feedthrough");
    noise_v.validate(/*allow_zero=*/true);
    noise_w.validate();
    if (x0_covariance.size() != 0) {
        if (x0_covariance.rows() != plant.states() || x0_covariance.cols() != plant.states())
            throw DimensionError("x0_covariance must be " + std::to_string(plant.states()) +
                                 "x" + std::to_string(plant.states()));
        if (!x0_covariance.allFinite()) throw DomainError("x0_covariance must be finite");
        if ((x0_covariance - x0_covariance.transpose()).cwiseAbs().maxCoeff() >
            1e-12 * (1.0 + x0_covariance.cwiseAbs().maxCoeff()))
            throw DomainError("x0_covariance must be symmetric");
        Eigen::SelfAdjointEigenSolver<Matrix> es(x0_covariance, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-12 * (1.0 + es.eigenvalues().cwiseAbs().maxCoeff()))
            throw DomainError("x0_covariance must be positive semidefinite");
    }
    if (horizon == 0) throw DomainError("horizon must be positive");
    if (grid_size < 16) throw DomainError("grid_size must be at least 16");
}

Complex dominant_eigenvalue(const Matrix& a) {
    if (a.rows() != a.cols()) throw DimensionError("A must be square, got " + dims(a));
    if (a.rows() == 0) return {0.0, 0.0};
    Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
    const auto& ev = es.eigenvalues();
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < ev.size(); ++i)
        if (std::abs(ev(i)) > std::abs(ev(best))) best = i;
    return ev(best);
}

double spectral_radius(const Matrix& a) { return std::abs(dominant_eigenvalue(a)); }

bool stability_check(const Matrix& a) { return spectral_radius(a) < 1.0 - kStabilityMargin; }

bool stability_check(const StateSpace& sys) { return stability_check(sys.a()); }

ClosedLoop close_loop(const LoopSpec& spec) {
    spec.validate();

    const StateSpace& p = spec.plant;
    const StateSpace& k = spec.controller;
    const Eigen::Index np = p.states();
    const Eigen::Index nk = k.states();
    const double dp = p.d()(0, 0);
    const double dk = k.d()(0, 0);

    // With dp * dk = 0:  y = Cp xp + dp Ck xk + v + w,  u = Ck xk + dk y.
    const Eigen::Index nl = np + nk;
    Matrix al(nl, nl), bl(nl, 2), cl(3, nl), dl(3, 2);
    al.topLeftCorner(np, np) = p.a() + p.b() * dk * p.c();
    al.topRightCorner(np, nk) = p.b() * k.c();
    al.bottomLeftCorner(nk, np) = k.b() * p.c();
    al.bottomRightCorner(nk, nk) = k.a() + k.b() * dp * k.c();
    bl.topRows(np).col(0) = p.b() * dk;
    bl.topRows(np).col(1) = p.b() * dk;
    bl.bottomRows(nk).col(0) = k.b();
    bl.bottomRows(nk).col(1) = k.b();

    Matrix cy(1, nl);
    cy << p.c(), dp * k.c();
    cl.row(ClosedLoop::out_y) = cy;
    cl.row(ClosedLoop::out_z) = cy;
    Matrix cu(1, nl);
    cu << dk * p.c(), k.c();
    cl.row(ClosedLoop::out_u) = cu;
    dl << 1.0, 1.0,  // y = z + w
        1.0, 0.0,    // z
        dk, dk;      // u

    ClosedLoop out;
    out.loop = StateSpace(al, bl, cl, dl);
    out.plant_states = np;
    out.controller_states = nk;

    // Noise realizations driven by unit white e: x+ = As x + Bs s e, n = Cs x + Ds s e.
    auto shaping_parts = [](const NoiseSpec& ns) {
        const double s = std::sqrt(ns.variance);
        if (!ns.shaping) return StateSpace(Matrix(0, 0), Matrix(0, 1), Matrix(1, 0),
                                           Matrix::Constant(1, 1, s));
        const StateSpace& f = *ns.shaping;
        return StateSpace(f.a(), f.b() * s, f.c(), f.d() * s);
    };
    const StateSpace sv = shaping_parts(spec.noise_v);
    const StateSpace sw = shaping_parts(spec.noise_w);
    const Eigen::Index nv = sv.states();
    const Eigen::Index nw = sw.states();
    out.v_states = nv;
    out.w_states = nw;

    const Eigen::Index n = nl + nv + nw;
    Matrix a = Matrix::Zero(n, n), b = Matrix::Zero(n, 2), c = Matrix::Zero(5, n),
           d = Matrix::Zero(5, 2);
    a.topLeftCorner(nl, nl) = al;
    a.block(0, nl, nl, nv) = bl.col(0) * sv.c();
    a.block(0, nl + nv, nl, nw) = bl.col(1) * sw.c();
    a.block(nl, nl, nv, nv) = sv.a();
    a.block(nl + nv, nl + nv, nw, nw) = sw.a();
    b.topRows(nl).col(0) = bl.col(0) * sv.d()(0, 0);
    b.topRows(nl).col(1) = bl.col(1) * sw.d()(0, 0);
    b.block(nl, 0, nv, 1) = sv.b();
    b.block(nl + nv, 1, nw, 1) = sw.b();

    c.topLeftCorner(3, nl) = cl;
    c.block(0, nl, 3, nv) = dl.col(0) * sv.c();
    c.block(0, nl + nv, 3, nw) = dl.col(1) * sw.c();
    c.block(ClosedLoop::out_v, nl, 1, nv) = sv.c();
    c.block(ClosedLoop::out_w, nl + nv, 1, nw) = sw.c();
    d.topRows(3).col(0) = dl.col(0) * sv.d()(0, 0);
    d.topRows(3).col(1) = dl.col(1) * sw.d()(0, 0);
    d(ClosedLoop::out_v, 0) = sv.d()(0, 0);
    d(ClosedLoop::out_w, 1) = sw.d()(0, 0);
    out.augmented = StateSpace(a, b, c, d);

    out.dominant_eigenvalue = dominant_eigenvalue(a);
    out.spectral_radius = std::abs(out.dominant_eigenvalue);
    if (out.spectral_radius >= 1.0 - kStabilityMargin) {
        std::ostringstream os;
        os.precision(6);
        os << "closed loop is not asymptotically stable: eigenvalue "
           << out.dominant_eigenvalue.real() << (out.dominant_eigenvalue.imag() < 0 ? "-" : "+")
           << std::abs(out.dominant_eigenvalue.imag()) << "j, |lambda| = " << out.spectral_radius;
        throw StabilityError(os.str(), out.dominant_eigenvalue);
    }

    out.initial_covariance = Matrix::Zero(n, n);
    if (!spec.x0_deterministic()) out.initial_covariance.topLeftCorner(np, np) = spec.x0_covariance;
    if (nv > 0)
        out.initial_covariance.block(nl, nl, nv, nv) =
            solve_dlyap(sv.a(), sv.b() * sv.b().transpose());
    if (nw > 0)
        out.initial_covariance.block(nl + nv, nl + nv, nw, nw) =
            solve_dlyap(sw.a(), sw.b() * sw.b().transpose());
    return out;
}

Matrix solve_dlyap(const Matrix& a, const Matrix& q) {
    if (a.rows() != a.cols()) throw DimensionError("A must be square, got " + dims(a));
    if (q.rows() != a.rows() || q.cols() != a.cols())
        throw DimensionError("Q has " + dims(q) + ", expected " + dims(a));
    if (!stability_check(a))
        throw NotSchurError("solve_dlyap: spectral radius of A is " +
                            std::to_string(spectral_radius(a)) + " (must be < 1)");
    const Eigen::Index n = a.rows();
    if (n == 0) return Matrix(0, 0);

    Matrix s;
    if (n <= 48) {
        // (I - A (x) A) vec(S) = vec(Q), column-major vec.
        const Eigen::Index nn = n * n;
        Matrix k = Matrix::Identity(nn, nn);
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index l = 0; l < n; ++l)
                    for (Eigen::Index m = 0; m < n; ++m)
                        k(j * n + i, l * n + m) -= a(i, m) * a(j, l);
        Eigen::PartialPivLU<Matrix> lu(k);
        Vector rhs = Eigen::Map<const Vector>(q.data(), nn);
        Vector x = lu.solve(rhs);
        for (int refine = 0; refine < 2; ++refine) {
            Eigen::Map<const Matrix> sm(x.data(), n, n);
            Matrix r = q - (sm - a * sm * a.transpose());
            x += lu.solve(Eigen::Map<const Vector>(r.data(), nn));
        }
        s = Eigen::Map<const Matrix>(x.data(), n, n);
    } else {
        // Smith doubling: S_{k+1} = S_k + A_k S_k A_k^T, A_{k+1} = A_k^2.
        s = q;
        Matrix ak = a;
        for (int it = 0; it < 64; ++it) {
            s += ak * s * ak.transpose();
            ak = ak * ak;
            if (ak.norm() < 1e-18) break;
        }
    }
    return 0.5 * (s + s.transpose());
}

double grid_frequency(std::size_t k, std::size_t grid_size) {
    return -std::numbers::pi +
           2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(grid_size);
}

FrequencyResponse::FrequencyResponse(std::size_t grid_size, Eigen::Index outputs,
                                     Eigen::Index inputs)
    : grid_size_(grid_size),
      outputs_(outputs),
      inputs_(inputs),
      values_(grid_size * static_cast<std::size_t>(outputs * inputs)) {}

FrequencyResponse frequency_response(const StateSpace& sys, std::size_t grid_size) {
    if (grid_size < 16) throw DomainError("frequency grid must have at least 16 points");
    FrequencyResponse out(grid_size, sys.outputs(), sys.inputs());
    kernels::frequency_response_omp(sys, out);
    return out;
}

}  // namespace infolimit
