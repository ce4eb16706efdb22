// trajectory.hpp — linear NMQSD trajectories and ensemble reconstruction of rho
//
//   d psi/dt = -i H psi + L z*_t psi - L^+ O1 psi + L^+ w*_t psi - L O2 psi,  L = Jm,
//
// with the same noise-independent O-bar operators as the master equation, so
// that M[|psi><psi|] reproduces rho. When the alpha1 covariance is not positive
// semidefinite on the grid, ket and bra are driven by the two halves of a split
// factorization (see NoiseFactorization::split_spectral) and each realization
// contributes |psi_ket><psi_bra|.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lmgsq/bath.hpp"
#include "lmgsq/coefficients.hpp"
#include "lmgsq/master.hpp"
#include "lmgsq/parallel.hpp"
#include "lmgsq/spin_algebra.hpp"

namespace lmgsq {

inline Vector trajectory_rhs(const Vector& psi, const RealVector& h_diag, const CollectiveOps& ops, const Obars& o,
                             cplx z_star, cplx w_star) {
    const BandOp& L = ops.lowering;
    const BandOp& Ld = ops.raising;
    Vector d = (-I * h_diag.cast<cplx>()).cwiseProduct(psi);
    d += z_star * L.apply(psi);
    d -= Ld.apply(o.o1.apply(psi));
    d += w_star * Ld.apply(psi);
    d -= L.apply(o.o2.apply(psi));
    return d;
}

struct TrajectoryConfig {
    PropagationConfig propagation;
    int realizations = 1000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    /// cholesky fails on non-positive kernels; split_spectral always succeeds.
    NoiseFactorization factorization = NoiseFactorization::split_spectral;
    NoisePairing pairing = NoisePairing::unravelling;
    /// Hermitian observables whose per-realization spread is tracked.
    std::vector<Matrix> observables;
};

/// Ensemble sums at one sample time.
struct EnsembleAccumulator {
    Matrix rho_sum;
    Eigen::MatrixXd rho_sq_sum;  // sum |rho_r(i,j)|^2 of the Hermitian part
    std::vector<double> obs_sum, obs_sq_sum;

    void reset(Eigen::Index dim, std::size_t n_obs) {
        rho_sum = Matrix::Zero(dim, dim);
        rho_sq_sum = Eigen::MatrixXd::Zero(dim, dim);
        obs_sum.assign(n_obs, 0.0);
        obs_sq_sum.assign(n_obs, 0.0);
    }
    void add(const EnsembleAccumulator& o) {
        rho_sum += o.rho_sum;
        rho_sq_sum += o.rho_sq_sum;
        for (std::size_t k = 0; k < obs_sum.size(); ++k) {
            obs_sum[k] += o.obs_sum[k];
            obs_sq_sum[k] += o.obs_sq_sum[k];
        }
    }
};

struct TrajectoryRun {
    TrajectoryConfig config;
    int realizations = 0;
    std::uint64_t seed = 0;
    TimeGrid noise_grid;
    bool split_noise = false;
    std::vector<double> sample_times;
    std::vector<EnsembleAccumulator> sums;
};

namespace detail {

/// Per-step RK4 stage operators, identical to the stages used by propagate().
inline std::vector<std::array<Obars, 4>> stage_obars(const CoeffParams& p, const CollectiveOps& ops, double dt,
                                                     int steps) {
    std::vector<std::array<Obars, 4>> out;
    out.reserve(steps);
    CoeffState F;
    for (int n = 0; n < steps; ++n) {
        const CoeffState f1 = coeff_rhs(F, p);
        const CoeffState F2 = F + (0.5 * dt) * f1;
        const CoeffState f2 = coeff_rhs(F2, p);
        const CoeffState F3 = F + (0.5 * dt) * f2;
        const CoeffState f3 = coeff_rhs(F3, p);
        const CoeffState F4 = F + dt * f3;
        const CoeffState f4 = coeff_rhs(F4, p);
        out.push_back({assemble_obar(F, ops), assemble_obar(F2, ops), assemble_obar(F3, ops),
                       assemble_obar(F4, ops)});
        F = F + (dt / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4);
    }
    return out;
}

inline Vector rk4_trajectory_step(const Vector& psi, const RealVector& h, const CollectiveOps& ops,
                                  const std::array<Obars, 4>& st, const Vector& z, const Vector& w, int n,
                                  double dt) {
    const int i0 = 2 * n, ih = 2 * n + 1, i1 = 2 * n + 2;
    const Vector k1 = trajectory_rhs(psi, h, ops, st[0], z(i0), w(i0));
    const Vector k2 = trajectory_rhs(psi + (0.5 * dt) * k1, h, ops, st[1], z(ih), w(ih));
    const Vector k3 = trajectory_rhs(psi + (0.5 * dt) * k2, h, ops, st[2], z(ih), w(ih));
    const Vector k4 = trajectory_rhs(psi + dt * k3, h, ops, st[3], z(i1), w(i1));
    return psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

} // namespace detail

inline constexpr std::size_t kTrajectoryChunk = 64;

/// Runs the ensemble. Noise is sampled on the half-step grid (spacing dt/2) so
/// RK4 midpoints see exact path values. Aggregation is a fixed-order reduction
/// over chunks of kTrajectoryChunk realizations, so results are bitwise
/// independent of the thread count.
inline TrajectoryRun run_trajectories(const StateVector& psi0, const EffectiveHamiltonian& H,
                                      const CollectiveOps& ops, const CoeffParams& p, const TrajectoryConfig& cfg) {
    cfg.propagation.validate();
    p.bath.validate();
    if (cfg.realizations < 1) throw InvalidParameter("realization count must be >= 1");
    if (psi0.amplitudes.size() != ops.dim()) throw InvalidDimension("initial state has the wrong dimension");

    const double dt = cfg.propagation.dt;
    const int steps = step_count(dt, cfg.propagation.t_max);
    const int stride = cfg.propagation.sample_stride;
    const RealVector h = H.diagonal(ops.basis);
    const auto stages = detail::stage_obars(p, ops, dt, steps);

    TrajectoryRun run;
    run.config = cfg;
    run.realizations = cfg.realizations;
    run.seed = cfg.seed;
    run.noise_grid = {0.5 * dt, 2 * steps + 1};
    for (int n = 0; n <= steps; ++n) {
        if (n % stride == 0 || n == steps) run.sample_times.push_back(n * dt);
    }
    const std::size_t n_samples = run.sample_times.size();
    const std::size_t n_obs = cfg.observables.size();

    const NoiseFactor fz = factorize_covariance(
        noise_covariance({KernelIndex::alpha1, p.bath}, run.noise_grid, cfg.pairing), cfg.factorization);
    const NoiseFactor fw =
        factorize_covariance(covariance_matrix({KernelIndex::alpha2, p.bath}, run.noise_grid), cfg.factorization);
    run.split_noise = fz.split || fw.split;

    const std::size_t n_chunks = (cfg.realizations + kTrajectoryChunk - 1) / kTrajectoryChunk;
    std::vector<std::vector<EnsembleAccumulator>> partial(n_chunks);

    parallel_for(n_chunks, cfg.threads, [&](std::size_t c) {
        auto& acc = partial[c];
        acc.resize(n_samples);
        for (auto& a : acc) a.reset(ops.dim(), n_obs);
        const std::size_t r0 = c * kTrajectoryChunk;
        const std::size_t r1 = std::min<std::size_t>(r0 + kTrajectoryChunk, cfg.realizations);
        for (std::size_t r = r0; r < r1; ++r) {
            const NoisePath noise = draw_noise_path(fz, fw, cfg.seed, r);
            Vector ket = psi0.amplitudes;
            Vector bra = psi0.amplitudes;
            std::size_t s = 0;
            auto accumulate = [&] {
                const Matrix outer = ket * bra.adjoint();
                const Matrix herm = 0.5 * (outer + outer.adjoint());
                acc[s].rho_sum += herm;
                acc[s].rho_sq_sum += herm.cwiseAbs2();
                for (std::size_t k = 0; k < n_obs; ++k) {
                    const double v = bra.dot(cfg.observables[k] * ket).real();
                    acc[s].obs_sum[k] += v;
                    acc[s].obs_sq_sum[k] += v * v;
                }
                ++s;
            };
            accumulate();
            for (int n = 0; n < steps; ++n) {
                ket = detail::rk4_trajectory_step(ket, h, ops, stages[n], noise.z_star_ket, noise.w_star_ket, n, dt);
                if (run.split_noise) {
                    bra = detail::rk4_trajectory_step(bra, h, ops, stages[n], noise.z_star_bra, noise.w_star_bra, n,
                                                      dt);
                } else {
                    bra = ket;
                }
                if (!ket.allFinite() || !bra.allFinite()) {
                    throw Divergence("trajectory " + std::to_string(r) + " produced a non-finite value", (n + 1) * dt);
                }
                if ((n + 1) % stride == 0 || n + 1 == steps) accumulate();
            }
        }
    });

    run.sums.resize(n_samples);
    for (auto& a : run.sums) a.reset(ops.dim(), n_obs);
    for (const auto& chunk : partial) {
        for (std::size_t s = 0; s < n_samples; ++s) run.sums[s].add(chunk[s]);
    }
    return run;
}

struct EnsembleSample {
    double t = 0.0;
    DensityMatrix rho;
    Eigen::MatrixXd stderr_;  // per-entry standard error
};

inline std::vector<EnsembleSample> ensemble_density(const TrajectoryRun& run) {
    if (run.realizations < 100) throw InvalidParameter("ensemble statistics need >= 100 realizations");
    const double n = run.realizations;
    std::vector<EnsembleSample> out;
    out.reserve(run.sample_times.size());
    for (std::size_t s = 0; s < run.sample_times.size(); ++s) {
        const Matrix mean = run.sums[s].rho_sum / n;
        Eigen::MatrixXd var = (run.sums[s].rho_sq_sum / n - mean.cwiseAbs2()) * (n / (n - 1.0));
        var = var.cwiseMax(0.0);
        out.push_back({run.sample_times[s], {mean, run.sample_times[s]}, (var / n).cwiseSqrt()});
    }
    return out;
}

struct ObservableEstimate {
    double t = 0.0;
    double mean = 0.0;
    double stderr_ = 0.0;
};

/// Mean and standard error of Re<psi_bra|A|psi_ket> for tracked observable k.
inline std::vector<ObservableEstimate> ensemble_observable(const TrajectoryRun& run, std::size_t k) {
    if (k >= run.config.observables.size()) throw InvalidParameter("observable index out of range");
    const double n = run.realizations;
    std::vector<ObservableEstimate> out;
    for (std::size_t s = 0; s < run.sample_times.size(); ++s) {
        const double mean = run.sums[s].obs_sum[k] / n;
        const double var = std::max(0.0, (run.sums[s].obs_sq_sum[k] / n - mean * mean) * (n / std::max(1.0, n - 1.0)));
        out.push_back({run.sample_times[s], mean, std::sqrt(var / n)});
    }
    return out;
}

} // namespace lmgsq
