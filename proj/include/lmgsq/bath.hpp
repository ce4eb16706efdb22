// bath.hpp — Lorentz-Drude bath, high-temperature correlation kernels and
// colored complex Gaussian noise on a time grid

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "lmgsq/errors.hpp"
#include "lmgsq/parallel.hpp"
#include "lmgsq/spin_algebra.hpp"

namespace lmgsq {

struct BathParams {
    double Gamma = 0.0;  // damping rate
    double gamma = 1.0;  // cutoff, inverse memory time
    double kT = 0.0;     // k_B T with hbar = 1

    void validate() const {
        if (!(gamma > 0.0) || !std::isfinite(gamma)) {
            throw InvalidParameter("bath cutoff gamma must be > 0, got " + std::to_string(gamma));
        }
        if (!(Gamma >= 0.0) || !std::isfinite(Gamma)) {
            throw InvalidParameter("damping rate Gamma must be >= 0, got " + std::to_string(Gamma));
        }
        if (!(kT >= 0.0) || !std::isfinite(kT)) {
            throw InvalidParameter("temperature kT must be >= 0, got " + std::to_string(kT));
        }
    }
};

/// J(w) = (Gamma/pi) w / (1 + w^2/gamma^2)
inline double spectral_density(double omega, const BathParams& p) {
    if (!(p.gamma > 0.0)) {
        throw InvalidParameter("bath cutoff gamma must be > 0, got " + std::to_string(p.gamma));
    }
    return (p.Gamma / std::numbers::pi) * omega / (1.0 + omega * omega / (p.gamma * p.gamma));
}

enum class KernelIndex { alpha1 = 1, alpha2 = 2 };

/// Ornstein-Uhlenbeck envelope Lambda(t,s) = (gamma/2) exp(-gamma |t-s|).
inline double ou_envelope(double t, double s, double gamma) {
    return 0.5 * gamma * std::exp(-gamma * std::abs(t - s));
}

// High-temperature kernels:
//   alpha2(t,s) = kT Gamma Lambda(t,s)
//   alpha1(t,s) = kT Gamma Lambda(t,s) + i Gamma dLambda/dt(t,s)
// with dLambda/dt = -gamma sign(t-s) Lambda and the derivative taken as 0 at t = s.
struct CorrelationKernel {
    KernelIndex index = KernelIndex::alpha1;
    BathParams params;

    cplx operator()(double t, double s) const {
        const double lam = ou_envelope(t, s, params.gamma);
        const double re = params.kT * params.Gamma * lam;
        if (index == KernelIndex::alpha2) return {re, 0.0};
        const double dt = t - s;
        const double sign = dt > 0.0 ? 1.0 : (dt < 0.0 ? -1.0 : 0.0);
        return {re, -params.Gamma * params.gamma * sign * lam};
    }

    /// Value seen inside memory integrals, s -> t from below.
    cplx one_sided(double tau) const {
        const double env = 0.5 * params.gamma * params.Gamma * std::exp(-params.gamma * tau);
        if (index == KernelIndex::alpha2) return {params.kT * env, 0.0};
        return cplx{params.kT, -params.gamma} * env;
    }

    /// Same as one_sided(0): alpha_i(t, t^-).
    cplx boundary() const { return one_sided(0.0); }
};

inline cplx correlation_value(const CorrelationKernel& k, double t, double s) { return k(t, s); }

/// Diagnostic only: the finite-temperature integral representation
///   alpha1(tau) = int_0^wc dw (n(w)+1) J(w) e^{-i w tau}
///   alpha2(tau) = int_0^wc dw n(w) J(w) e^{+i w tau}
/// with the frequency cutoff wc = 50 gamma. Dynamics never use this.
inline cplx finite_temperature_correlation(const CorrelationKernel& k, double tau,
                                           double rel_tol = 1e-6) {
    const BathParams& p = k.params;
    p.validate();
    if (p.kT <= 0.0 && k.index == KernelIndex::alpha2) return {0.0, 0.0};
    const double cutoff = 50.0 * p.gamma;
    auto occupation_weight = [&](double w) {
        // (n+1) J or n J, regular at w -> 0
        if (p.kT <= 0.0) return spectral_density(w, p);
        const double x = w / p.kT;
        if (w == 0.0) return p.Gamma * p.kT / std::numbers::pi;
        const double n = 1.0 / std::expm1(x);
        return (k.index == KernelIndex::alpha1 ? n + 1.0 : n) * spectral_density(w, p);
    };
    const double phase_sign = k.index == KernelIndex::alpha1 ? -1.0 : 1.0;
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    const double re = GK::integrate([&](double w) { return occupation_weight(w) * std::cos(w * tau); },
                                    0.0, cutoff, 20, rel_tol);
    const double im = GK::integrate(
        [&](double w) { return phase_sign * occupation_weight(w) * std::sin(w * tau); }, 0.0, cutoff, 20,
        rel_tol);
    return {re, im};
}

/// Uniform grid t_k = k * step, k = 0..nodes-1.
struct TimeGrid {
    double step = 0.0;
    int nodes = 0;

    double time(int k) const { return k * step; }
    double t_max() const { return (nodes - 1) * step; }
};

/// C(i,j) = alpha(t_i, t_j) = M[z*_{t_i} z_{t_j}].
inline Matrix covariance_matrix(const CorrelationKernel& k, const TimeGrid& grid) {
    Matrix c(grid.nodes, grid.nodes);
    for (int i = 0; i < grid.nodes; ++i) {
        for (int j = 0; j < grid.nodes; ++j) c(i, j) = k(grid.time(i), grid.time(j));
    }
    return c;
}

/// Which time ordering of alpha1 the sampled z* path carries.
enum class NoisePairing {
    /// M[z*_t z_s] = conj(alpha1(t,s)), the pairing under which the noise average
    /// of the linear trajectories reproduces the master equation.
    unravelling,
    /// M[z*_t z_s] = alpha1(t,s) taken literally.
    literal,
};

/// Covariance of the sampled z* path, C(i,j) = M[z*_{t_i} z_{t_j}].
inline Matrix noise_covariance(const CorrelationKernel& k, const TimeGrid& grid, NoisePairing pairing) {
    Matrix c = covariance_matrix(k, grid);
    if (pairing == NoisePairing::unravelling) c = c.conjugate();
    return c;
}

enum class NoiseFactorization {
    /// Cholesky with diagonal jitter 1e-12 .. 1e-8 of the largest diagonal; fails
    /// on kernels that are not positive semidefinite on the grid.
    cholesky,
    /// Eigen-decomposition C = V D V^H split as ket = V D^{1/2}, bra = V conj(D^{1/2})
    /// with the principal complex root. Reduces to an ordinary factor for PSD
    /// kernels; otherwise ket and bra noises differ and only the ket-bra pairing
    /// reproduces C.
    split_spectral,
};

struct NoiseFactor {
    Matrix ket;
    Matrix bra;
    bool split = false;
    double jitter = 0.0;
};

inline NoiseFactor factorize_covariance(const Matrix& c, NoiseFactorization method) {
    const Eigen::Index n = c.rows();
    const double max_diag = c.diagonal().real().cwiseAbs().maxCoeff();
    NoiseFactor out;
    if (max_diag == 0.0 && c.cwiseAbs().maxCoeff() == 0.0) {
        out.ket = out.bra = Matrix::Zero(n, n);
        return out;
    }
    if (method == NoiseFactorization::cholesky) {
        for (double rel = 0.0; rel <= 1e-8 * 1.0000001; rel = (rel == 0.0 ? 1e-12 : rel * 10.0)) {
            Matrix shifted = c;
            shifted.diagonal().array() += rel * max_diag;
            Eigen::LLT<Matrix> llt(shifted);
            if (llt.info() == Eigen::Success) {
                out.ket = llt.matrixL();
                out.bra = out.ket;
                out.jitter = rel * max_diag;
                return out;
            }
        }
        Eigen::SelfAdjointEigenSolver<Matrix> es(c, Eigen::EigenvaluesOnly);
        const double lo = es.eigenvalues().minCoeff();
        throw KernelNotPositive("noise covariance is not positive semidefinite on the grid (min eigenvalue " +
                                    std::to_string(lo) + ", max diagonal " + std::to_string(max_diag) + ")",
                                lo);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(c);
    const RealVector& ev = es.eigenvalues();
    Vector root_ket(n), root_bra(n);
    bool negative = false;
    for (Eigen::Index k = 0; k < n; ++k) {
        const cplx r = std::sqrt(cplx{ev(k), 0.0});
        root_ket(k) = r;
        root_bra(k) = std::conj(r);
        negative = negative || ev(k) < 0.0;
    }
    out.ket = es.eigenvectors() * root_ket.asDiagonal();
    out.bra = es.eigenvectors() * root_bra.asDiagonal();
    out.split = negative;
    return out;
}

/// Per-realization random stream keyed by (seed, realization, stream tag).
inline std::mt19937_64 realization_stream(std::uint64_t seed, std::uint64_t realization, std::uint32_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(realization), static_cast<std::uint32_t>(realization >> 32),
                      tag};
    return std::mt19937_64(seq);
}

/// i.i.d. circular complex normals with M[|e|^2] = 1.
inline Vector standard_complex_normals(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> normal(0.0, std::numbers::sqrt2 / 2.0);
    Vector e(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double re = normal(rng);
        const double im = normal(rng);
        e(k) = {re, im};
    }
    return e;
}

/// One realization of the two noises; *_bra equal *_ket unless the factor is split.
struct NoisePath {
    Vector z_star_ket, z_star_bra;
    Vector w_star_ket, w_star_bra;
};

inline constexpr std::uint32_t kStreamZ = 0x7a;
inline constexpr std::uint32_t kStreamW = 0x77;

/// Draws realization `index` from precomputed factors; deterministic in (seed, index).
inline NoisePath draw_noise_path(const NoiseFactor& z_factor, const NoiseFactor& w_factor, std::uint64_t seed,
                                 std::uint64_t index) {
    NoisePath p;
    auto rz = realization_stream(seed, index, kStreamZ);
    const Vector ez = standard_complex_normals(rz, z_factor.ket.cols());
    p.z_star_ket = z_factor.ket * ez;
    p.z_star_bra = z_factor.split ? Vector(z_factor.bra * ez) : p.z_star_ket;
    auto rw = realization_stream(seed, index, kStreamW);
    const Vector ew = standard_complex_normals(rw, w_factor.ket.cols());
    p.w_star_ket = w_factor.ket * ew;
    p.w_star_bra = w_factor.split ? Vector(w_factor.bra * ew) : p.w_star_ket;
    return p;
}

struct NoisePathEnsemble {
    TimeGrid grid;
    std::uint64_t seed = 0;
    NoiseFactorization method = NoiseFactorization::cholesky;
    std::vector<NoisePath> paths;
};

/// Samples `count` realizations of z* (kernel alpha1) and w* (kernel alpha2) on the grid.
inline NoisePathEnsemble sample_noise_ensemble(const BathParams& bath, const TimeGrid& grid, int count,
                                               std::uint64_t seed,
                                               NoiseFactorization method = NoiseFactorization::cholesky,
                                               unsigned threads = 1,
                                               NoisePairing pairing = NoisePairing::literal) {
    bath.validate();
    if (grid.nodes < 2 || !(grid.step > 0.0)) {
        throw InvalidParameter("noise grid needs >= 2 nodes and a positive step");
    }
    if (count < 1) throw InvalidParameter("realization count must be >= 1");
    const NoiseFactor fz = factorize_covariance(noise_covariance({KernelIndex::alpha1, bath}, grid, pairing), method);
    const NoiseFactor fw =
        factorize_covariance(covariance_matrix({KernelIndex::alpha2, bath}, grid), method);
    NoisePathEnsemble ens{grid, seed, method, std::vector<NoisePath>(static_cast<std::size_t>(count))};
    parallel_for(ens.paths.size(), threads,
                 [&](std::size_t r) { ens.paths[r] = draw_noise_path(fz, fw, seed, r); });
    return ens;
}

} // namespace lmgsq
