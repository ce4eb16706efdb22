// master.hpp — time-local non-Markovian master equation and its Markov reference
//
//   d rho/dt = -i[H, rho] + [L, rho O1^+] + [O1 rho, L^+] + [L^+, rho O2^+] + [O2 rho, L],
//   L = Jm,
//   O1 = F11 Jm + F12 Jz Jm,        O2 = F21 Jp + F22 Jp Jz,
//   O1^+ = F11* Jp + F12* Jp Jz,    O2^+ = F21* Jm + F22* Jz Jm.
//
// Every operator involved has a single non-zero band in the Dicke basis, so the
// right-hand side is evaluated in O(dim^2) with BandOp products.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lmgsq/bath.hpp"
#include "lmgsq/coefficients.hpp"
#include "lmgsq/errors.hpp"
#include "lmgsq/spin_algebra.hpp"

namespace lmgsq {

struct DensityMatrix {
    Matrix rho;
    double t = 0.0;

    double trace_error() const { return std::abs(rho.trace() - cplx{1.0, 0.0}); }
    double hermiticity_error() const { return (rho - rho.adjoint()).cwiseAbs().maxCoeff(); }
    double purity() const { return (rho * rho).trace().real(); }
    double min_eigenvalue() const {
        const Matrix h = 0.5 * (rho + rho.adjoint());
        Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }
};

struct Obars {
    BandOp o1, o2, o1_dag, o2_dag;
};

/// Builds the four operators term by term, then checks the two
/// dagger lines against numerical adjoints; a mismatch is a hard error.
inline Obars assemble_obar(const CoeffState& F, const CollectiveOps& ops) {
    const Vector& c = ops.lowering.weights;    // Jm band, == Jp band
    const Vector& zc = ops.jz_lowering.weights; // Jz Jm band, == Jp Jz band
    Obars o;
    o.o1 = {1, F.F11 * c + F.F12 * zc};
    o.o2 = {-1, F.F21 * c + F.F22 * zc};
    o.o1_dag = {-1, std::conj(F.F11) * c + std::conj(F.F12) * zc};
    o.o2_dag = {1, std::conj(F.F21) * c + std::conj(F.F22) * zc};

    const BandOp a1 = o.o1.adjoint();
    const BandOp a2 = o.o2.adjoint();
    const double scale = 1.0 + F.max_abs() * (1.0 + c.cwiseAbs().maxCoeff() + zc.cwiseAbs().maxCoeff());
    const double tol = 1e-13 * scale;
    if (a1.offset != o.o1_dag.offset || (a1.weights - o.o1_dag.weights).cwiseAbs().maxCoeff() > tol ||
        a2.offset != o.o2_dag.offset || (a2.weights - o.o2_dag.weights).cwiseAbs().maxCoeff() > tol) {
        throw Error("O-bar dagger operators disagree with numerical adjoints");
    }
    return o;
}

/// Structured evaluation of the master-equation right-hand side.
inline Matrix master_rhs(const Matrix& rho, const RealVector& h_diag, const CollectiveOps& ops, const Obars& o) {
    const BandOp& L = ops.lowering;
    const BandOp& Ld = ops.raising;

    // -i[H, rho]: H diagonal
    Matrix d(rho.rows(), rho.cols());
    for (Eigen::Index j = 0; j < rho.cols(); ++j) {
        for (Eigen::Index i = 0; i < rho.rows(); ++i) {
            d(i, j) = -I * (h_diag(i) - h_diag(j)) * rho(i, j);
        }
    }
    // [L, rho O1^+]
    const Matrix r_o1d = o.o1_dag.rmul(rho);
    d += L.lmul(r_o1d) - L.rmul(r_o1d);
    // [O1 rho, L^+]
    const Matrix o1_r = o.o1.lmul(rho);
    d += Ld.rmul(o1_r) - Ld.lmul(o1_r);
    // [L^+, rho O2^+]
    const Matrix r_o2d = o.o2_dag.rmul(rho);
    d += Ld.lmul(r_o2d) - Ld.rmul(r_o2d);
    // [O2 rho, L]
    const Matrix o2_r = o.o2.lmul(rho);
    d += L.rmul(o2_r) - L.lmul(o2_r);
    return d;
}

inline Matrix master_rhs(const Matrix& rho, const EffectiveHamiltonian& H, const CollectiveOps& ops, const Obars& o) {
    return master_rhs(rho, H.diagonal(ops.basis), ops, o);
}

/// Literal dense-matrix form of the same equation (reference for tests).
inline Matrix master_rhs_dense(const Matrix& rho, const Matrix& H, const Matrix& L, const Matrix& O1,
                               const Matrix& O2, const Matrix& O1d, const Matrix& O2d) {
    auto comm = [](const Matrix& x, const Matrix& y) -> Matrix { return x * y - y * x; };
    const Matrix Ld = L.adjoint();
    return -I * comm(H, rho) + comm(L, rho * O1d) + comm(O1 * rho, Ld) + comm(Ld, rho * O2d) + comm(O2 * rho, L);
}

struct PropagationConfig {
    double t_max = 1.0;
    double dt = 1e-3;
    int sample_stride = 1;

    void validate() const {
        check_step(dt, t_max);
        if (sample_stride < 1) throw InvalidParameter("sample_stride must be >= 1");
    }
};

struct PropagationSample {
    double t = 0.0;
    DensityMatrix rho;
    CoeffState F;
    double trace_error = 0.0;
    double hermiticity_error = 0.0;
    double min_eigenvalue = 0.0;
};

struct PropagationResult {
    std::vector<PropagationSample> samples;
    double dt = 0.0;
    double max_trace_error = 0.0;
    double max_hermiticity_error = 0.0;
    /// Last sample time before the minimum eigenvalue first drops below -1e-6.
    double trusted_until = 0.0;
    std::vector<std::string> warnings;
};

inline constexpr double kTrustedEigenvalueFloor = -1e-6;
inline constexpr double kTraceDriftWarning = 1e-6;

namespace detail {

inline void record_sample(PropagationResult& out, double t, const Matrix& rho, const CoeffState& F,
                          bool& trusted) {
    PropagationSample s;
    s.t = t;
    s.rho = {rho, t};
    s.F = F;
    s.trace_error = s.rho.trace_error();
    s.hermiticity_error = s.rho.hermiticity_error();
    s.min_eigenvalue = s.rho.min_eigenvalue();
    out.max_trace_error = std::max(out.max_trace_error, s.trace_error);
    out.max_hermiticity_error = std::max(out.max_hermiticity_error, s.hermiticity_error);
    if (trusted && s.min_eigenvalue < kTrustedEigenvalueFloor) trusted = false;
    if (trusted) out.trusted_until = t;
    out.samples.push_back(std::move(s));
}

inline void finish(PropagationResult& out) {
    if (out.max_trace_error > kTraceDriftWarning) {
        out.warnings.push_back("trace drift " + std::to_string(out.max_trace_error) + " exceeds 1e-6");
    }
}

inline void check_initial(const Matrix& rho0, const CollectiveOps& ops) {
    if (rho0.rows() != ops.dim() || rho0.cols() != ops.dim()) {
        throw InvalidDimension("initial density matrix has the wrong dimension");
    }
    const DensityMatrix d{rho0, 0.0};
    if (d.hermiticity_error() > 1e-10 || d.trace_error() > 1e-8) {
        throw InvalidParameter("initial density matrix must be Hermitian with unit trace");
    }
}

} // namespace detail

/// Co-integrates F and rho with shared RK4 stages.
inline PropagationResult propagate(const Matrix& rho0, const EffectiveHamiltonian& H, const CollectiveOps& ops,
                                   const CoeffParams& p, const PropagationConfig& cfg) {
    cfg.validate();
    p.bath.validate();
    detail::check_initial(rho0, ops);
    const RealVector h = H.diagonal(ops.basis);
    const int steps = step_count(cfg.dt, cfg.t_max);
    const double dt = cfg.dt;

    PropagationResult out;
    out.dt = dt;
    out.samples.reserve(steps / cfg.sample_stride + 1);
    Matrix rho = rho0;
    CoeffState F;
    bool trusted = true;
    detail::record_sample(out, 0.0, rho, F, trusted);

    for (int n = 1; n <= steps; ++n) {
        const CoeffState f1 = coeff_rhs(F, p);
        const Matrix r1 = master_rhs(rho, h, ops, assemble_obar(F, ops));
        const CoeffState F2 = F + (0.5 * dt) * f1;
        const CoeffState f2 = coeff_rhs(F2, p);
        const Matrix r2 = master_rhs(rho + (0.5 * dt) * r1, h, ops, assemble_obar(F2, ops));
        const CoeffState F3 = F + (0.5 * dt) * f2;
        const CoeffState f3 = coeff_rhs(F3, p);
        const Matrix r3 = master_rhs(rho + (0.5 * dt) * r2, h, ops, assemble_obar(F3, ops));
        const CoeffState F4 = F + dt * f3;
        const CoeffState f4 = coeff_rhs(F4, p);
        const Matrix r4 = master_rhs(rho + dt * r3, h, ops, assemble_obar(F4, ops));
        F = F + (dt / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4);
        rho += (dt / 6.0) * (r1 + 2.0 * r2 + 2.0 * r3 + r4);
        if (!F.all_finite() || !rho.allFinite()) {
            throw Divergence("master equation produced a non-finite value", n * dt);
        }
        if (n % cfg.sample_stride == 0 || n == steps) detail::record_sample(out, n * dt, rho, F, trusted);
    }
    detail::finish(out);
    return out;
}

/// Constant coefficients of the Caldeira-Leggett limit: the t -> inf,
/// gamma -> inf memory integrals, zeroth order in system frequencies.
inline CoeffState markov_coefficients(const BathParams& bath) {
    CoeffState F;
    F.F11 = 0.5 * bath.Gamma * cplx{bath.kT, -bath.gamma};
    F.F21 = 0.5 * bath.Gamma * bath.kT;
    return F;
}

/// Lindblad evolution with the constant Markov-limit coefficients.
inline PropagationResult markov_reference(const Matrix& rho0, const EffectiveHamiltonian& H,
                                          const CollectiveOps& ops, const BathParams& bath,
                                          const PropagationConfig& cfg) {
    cfg.validate();
    bath.validate();
    detail::check_initial(rho0, ops);
    const RealVector h = H.diagonal(ops.basis);
    const CoeffState F = markov_coefficients(bath);
    const Obars o = assemble_obar(F, ops);
    const int steps = step_count(cfg.dt, cfg.t_max);
    const double dt = cfg.dt;

    PropagationResult out;
    out.dt = dt;
    Matrix rho = rho0;
    bool trusted = true;
    detail::record_sample(out, 0.0, rho, F, trusted);
    for (int n = 1; n <= steps; ++n) {
        const Matrix r1 = master_rhs(rho, h, ops, o);
        const Matrix r2 = master_rhs(rho + (0.5 * dt) * r1, h, ops, o);
        const Matrix r3 = master_rhs(rho + (0.5 * dt) * r2, h, ops, o);
        const Matrix r4 = master_rhs(rho + dt * r3, h, ops, o);
        rho += (dt / 6.0) * (r1 + 2.0 * r2 + 2.0 * r3 + r4);
        if (!rho.allFinite()) throw Divergence("Lindblad reference produced a non-finite value", n * dt);
        if (n % cfg.sample_stride == 0 || n == steps) detail::record_sample(out, n * dt, rho, F, trusted);
    }
    detail::finish(out);
    return out;
}

} // namespace lmgsq
