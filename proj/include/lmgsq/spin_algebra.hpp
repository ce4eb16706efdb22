// spin_algebra.hpp — collective spin operators on the fixed-J Dicke subspace

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "lmgsq/errors.hpp"

namespace lmgsq {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr cplx I{0.0, 1.0};

// Basis index k = 0..N labels |J, m_k> with m_k = J - k (descending in m).
class DickeBasis {
public:
    explicit DickeBasis(int n_spins) : n_(n_spins) {
        if (n_spins < 1) {
            throw InvalidDimension("spin number N must be >= 1, got " + std::to_string(n_spins));
        }
    }

    int n_spins() const noexcept { return n_; }
    /// 2J, kept as an integer so half-integer J stays exact.
    int twice_j() const noexcept { return n_; }
    double j() const noexcept { return 0.5 * n_; }
    int dim() const noexcept { return n_ + 1; }
    double casimir() const noexcept { return j() * (j() + 1.0); }

    /// m of basis index k; (N - 2k)/2 is exact in binary floating point.
    double m(int k) const noexcept { return 0.5 * (n_ - 2 * k); }

private:
    int n_;
};

/// Matrix with a single non-zero (sub/super)diagonal. offset = +1 has entries
/// (j+1, j) (lowering), offset = -1 has entries (j, j+1) (raising), offset = 0
/// is diagonal. weights(j) holds the entry for index j.
struct BandOp {
    int offset = 0;
    Vector weights;

    Eigen::Index dim() const { return weights.size() + (offset == 0 ? 0 : 1); }

    Eigen::Index row(Eigen::Index j) const { return offset == 1 ? j + 1 : j; }
    Eigen::Index col(Eigen::Index j) const { return offset == -1 ? j + 1 : j; }

    BandOp adjoint() const { return {-offset, weights.conjugate()}; }

    /// this * X
    Matrix lmul(const Matrix& x) const {
        Matrix y = Matrix::Zero(x.rows(), x.cols());
        for (Eigen::Index j = 0; j < weights.size(); ++j) {
            y.row(row(j)) = weights(j) * x.row(col(j));
        }
        return y;
    }

    /// X * this
    Matrix rmul(const Matrix& x) const {
        Matrix y = Matrix::Zero(x.rows(), x.cols());
        for (Eigen::Index j = 0; j < weights.size(); ++j) {
            y.col(col(j)) = x.col(row(j)) * weights(j);
        }
        return y;
    }

    Vector apply(const Vector& v) const {
        Vector y = Vector::Zero(v.size());
        for (Eigen::Index j = 0; j < weights.size(); ++j) {
            y(row(j)) = weights(j) * v(col(j));
        }
        return y;
    }

    Matrix dense() const {
        const Eigen::Index n = dim();
        Matrix m = Matrix::Zero(n, n);
        for (Eigen::Index j = 0; j < weights.size(); ++j) {
            m(row(j), col(j)) = weights(j);
        }
        return m;
    }
};

struct CollectiveOps {
    DickeBasis basis{1};
    Matrix Jz, Jp, Jm, Jx, Jy, J2;

    RealVector jz_diag;  // m_k
    BandOp lowering;     // Jm in banded form
    BandOp raising;      // Jp in banded form
    BandOp jz_lowering;  // Jz * Jm
    BandOp raising_jz;   // Jp * Jz

    int dim() const { return basis.dim(); }
    double j() const { return basis.j(); }
};

/// Coefficient of Jm|J,m> = c |J,m-1>.
inline double lowering_coefficient(const DickeBasis& basis, double m) {
    const double v = basis.casimir() - m * (m - 1.0);
    return v > 0.0 ? std::sqrt(v) : 0.0;
}

inline CollectiveOps build_collective_operators(const DickeBasis& basis) {
    const int n = basis.dim();
    CollectiveOps ops;
    ops.basis = basis;
    ops.jz_diag.resize(n);
    for (int k = 0; k < n; ++k) ops.jz_diag(k) = basis.m(k);

    Vector c(n - 1), jz_c(n - 1);
    for (int k = 0; k + 1 < n; ++k) {
        c(k) = lowering_coefficient(basis, basis.m(k));
        jz_c(k) = basis.m(k + 1) * c(k);
    }
    ops.lowering = {1, c};
    ops.raising = {-1, c};
    ops.jz_lowering = {1, jz_c};
    ops.raising_jz = {-1, jz_c};

    ops.Jz = ops.jz_diag.cast<cplx>().asDiagonal();
    ops.Jm = ops.lowering.dense();
    ops.Jp = ops.Jm.adjoint();
    ops.Jx = 0.5 * (ops.Jp + ops.Jm);
    ops.Jy = (ops.Jp - ops.Jm) / (2.0 * I);
    ops.J2 = ops.Jx * ops.Jx + ops.Jy * ops.Jy + ops.Jz * ops.Jz;
    return ops;
}

/// H = a Jz + b Jz^2, diagonal in the Dicke basis.
struct EffectiveHamiltonian {
    double a = 0.0;
    double b = 0.0;
    /// Constant dropped in the reduction; shifts energies only.
    double energy_offset = 0.0;

    RealVector diagonal(const DickeBasis& basis) const {
        RealVector d(basis.dim());
        for (int k = 0; k < basis.dim(); ++k) {
            const double m = basis.m(k);
            d(k) = a * m + b * m * m;
        }
        return d;
    }

    Matrix matrix(const DickeBasis& basis) const {
        return diagonal(basis).cast<cplx>().asDiagonal();
    }
};

/// Isotropic LMG Hamiltonian -(2 lambda/N)(J^2 - Jz^2) - 2h Jz + lambda
/// rewritten as a Jz + b Jz^2 with a = -2h, b = 2 lambda / N.
inline EffectiveHamiltonian lmg_reduction(double lambda, double h, int n_spins) {
    const DickeBasis basis(n_spins);
    EffectiveHamiltonian H;
    H.a = -2.0 * h;
    H.b = 2.0 * lambda / n_spins;
    H.energy_offset = -(2.0 * lambda / n_spins) * basis.casimir() + lambda;
    return H;
}

struct StateVector {
    Vector amplitudes;
    bool normalized = false;

    double norm() const { return amplitudes.norm(); }
};

/// Coherent spin state pointing along (theta, phi). The m = J amplitude is
/// real and nonnegative:
///   psi_k = sqrt(C(N,k)) cos^(N-k)(theta/2) sin^k(theta/2) e^{i k phi}.
inline StateVector coherent_spin_state(const DickeBasis& basis, double theta, double phi) {
    const int n = basis.n_spins();
    StateVector s;
    s.amplitudes.resize(basis.dim());
    const double c = std::cos(0.5 * theta);
    const double sn = std::sin(0.5 * theta);
    for (int k = 0; k <= n; ++k) {
        // log-binomial keeps large N finite
        const double log_binom = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
        const double mag = std::exp(0.5 * log_binom) * std::pow(c, n - k) * std::pow(sn, k);
        s.amplitudes(k) = mag * std::polar(1.0, k * phi);
    }
    s.amplitudes /= s.amplitudes.norm();
    s.normalized = true;
    return s;
}

inline Matrix projector(const StateVector& s) {
    return s.amplitudes * s.amplitudes.adjoint();
}

} // namespace lmgsq
