// observables.hpp — spin moments, squeezing parameter and moment-equation residuals

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "lmgsq/coefficients.hpp"
#include "lmgsq/master.hpp"
#include "lmgsq/spin_algebra.hpp"

namespace lmgsq {

/// Operator products whose expectations make up a MomentSet, formed once per basis.
struct MomentOperators {
    Matrix Jx, Jy, Jz, Jx2, Jy2, Jz2, JyJz_ss, Jz3, Jz4;
    Matrix Jm, Jm2, JzJm, Jz2Jm, Jz3Jm, JzJm2, Jz2Jm2;

    explicit MomentOperators(const CollectiveOps& ops) {
        Jx = ops.Jx;
        Jy = ops.Jy;
        Jz = ops.Jz;
        Jx2 = Jx * Jx;
        Jy2 = Jy * Jy;
        Jz2 = Jz * Jz;
        JyJz_ss = 0.5 * (Jy * Jz + Jz * Jy);
        Jz3 = Jz2 * Jz;
        Jz4 = Jz2 * Jz2;
        Jm = ops.Jm;
        Jm2 = Jm * Jm;
        JzJm = Jz * Jm;
        Jz2Jm = Jz2 * Jm;
        Jz3Jm = Jz3 * Jm;
        JzJm2 = Jz * Jm2;
        Jz2Jm2 = Jz2 * Jm2;
    }
};

/// tr(rho A)
inline cplx expectation(const Matrix& rho, const Matrix& a) { return rho.cwiseProduct(a.transpose()).sum(); }

struct MomentSet {
    cplx Jx, Jy, Jz, Jx2, Jy2, Jz2, JyJz_ss, Jz3, Jz4;
    cplx Jm, Jm2, JzJm, Jz2Jm, Jz3Jm, JzJm2, Jz2Jm2;

    /// Largest imaginary part among the Hermitian moments.
    double hermitian_imag() const {
        return std::max({std::abs(Jx.imag()), std::abs(Jy.imag()), std::abs(Jz.imag()), std::abs(Jx2.imag()),
                         std::abs(Jy2.imag()), std::abs(Jz2.imag()), std::abs(JyJz_ss.imag()),
                         std::abs(Jz3.imag()), std::abs(Jz4.imag())});
    }
};

inline MomentSet compute_moments(const Matrix& rho, const MomentOperators& m) {
    MomentSet s;
    s.Jx = expectation(rho, m.Jx);
    s.Jy = expectation(rho, m.Jy);
    s.Jz = expectation(rho, m.Jz);
    s.Jx2 = expectation(rho, m.Jx2);
    s.Jy2 = expectation(rho, m.Jy2);
    s.Jz2 = expectation(rho, m.Jz2);
    s.JyJz_ss = expectation(rho, m.JyJz_ss);
    s.Jz3 = expectation(rho, m.Jz3);
    s.Jz4 = expectation(rho, m.Jz4);
    s.Jm = expectation(rho, m.Jm);
    s.Jm2 = expectation(rho, m.Jm2);
    s.JzJm = expectation(rho, m.JzJm);
    s.Jz2Jm = expectation(rho, m.Jz2Jm);
    s.Jz3Jm = expectation(rho, m.Jz3Jm);
    s.JzJm2 = expectation(rho, m.JzJm2);
    s.Jz2Jm2 = expectation(rho, m.Jz2Jm2);
    return s;
}

inline MomentSet compute_moments(const Matrix& rho, const CollectiveOps& ops) {
    return compute_moments(rho, MomentOperators(ops));
}

struct SqueezingPoint {
    double t = 0.0;
    double xi2 = 0.0;
    double min_variance = 0.0;
    double mean_spin_x = 0.0;
    /// Azimuth of the mean spin in the x-y plane; xi2 assumes it is ~0.
    double mean_spin_angle = 0.0;
    bool defined = true;
};

/// xi^2 = N <dJ^2_min> / <Jx>^2 with the smaller principal variance of the y-z block.
inline SqueezingPoint squeezing_parameter(const MomentSet& m, int n_spins, double t = 0.0) {
    SqueezingPoint p;
    p.t = t;
    const double y2 = m.Jy2.real();
    const double z2 = m.Jz2.real();
    const double yz = m.JyJz_ss.real();
    p.min_variance = 0.5 * ((y2 + z2) - std::sqrt((y2 - z2) * (y2 - z2) + 4.0 * yz * yz));
    p.mean_spin_x = m.Jx.real();
    p.mean_spin_angle = std::atan2(m.Jy.real(), m.Jx.real());
    if (p.mean_spin_x * p.mean_spin_x > 1e-20) {
        p.xi2 = n_spins * p.min_variance / (p.mean_spin_x * p.mean_spin_x);
    } else {
        p.defined = false;
        p.xi2 = std::numeric_limits<double>::quiet_NaN();
    }
    return p;
}

/// Samples with xi2 below 1 - kSqueezingMargin count as squeezed; the margin
/// absorbs round-off in xi2(0) = 1.
inline constexpr double kSqueezingMargin = 1e-10;

struct SqueezingSummary {
    bool squeezed = false;
    double min_xi2 = std::numeric_limits<double>::quiet_NaN();
    double argmin_t = std::numeric_limits<double>::quiet_NaN();
    double onset_t = std::numeric_limits<double>::quiet_NaN();
    double end_t = std::numeric_limits<double>::quiet_NaN();
    double duration = 0.0;
};

/// Summary of the first contiguous squeezing window, the run of samples with
/// 0 <= xi2 < 1. The window ends at the first sample that leaves it (or at the
/// last sample); min_xi2 is taken inside the window. Without a window, min_xi2
/// is the minimum over all defined samples.
inline SqueezingSummary summarize_squeezing(const std::vector<SqueezingPoint>& series) {
    SqueezingSummary out;
    auto in_window = [](const SqueezingPoint& p) {
        return p.defined && std::isfinite(p.xi2) && p.xi2 >= 0.0 && p.xi2 < 1.0 - kSqueezingMargin;
    };
    std::size_t k = 0;
    while (k < series.size() && !in_window(series[k])) ++k;
    if (k == series.size()) {
        for (const auto& p : series) {
            if (p.defined && std::isfinite(p.xi2) && !(p.xi2 >= out.min_xi2)) {
                out.min_xi2 = p.xi2;
                out.argmin_t = p.t;
            }
        }
        return out;
    }
    out.squeezed = true;
    out.onset_t = series[k].t;
    out.min_xi2 = series[k].xi2;
    out.argmin_t = series[k].t;
    for (; k < series.size() && in_window(series[k]); ++k) {
        out.end_t = series[k].t;
        if (series[k].xi2 < out.min_xi2) {
            out.min_xi2 = series[k].xi2;
            out.argmin_t = series[k].t;
        }
    }
    if (k < series.size()) out.end_t = series[k].t;
    out.duration = out.end_t - out.onset_t;
    return out;
}

// ---------------------------------------------------------------------------
// Closed moment equations. Index order everywhere: d<Jm>, d<Jz>, d<Jm^2>,
// d<Jz^2>, d<Jz Jm>.

inline constexpr int kMomentEquations = 5;
inline const std::array<std::string, kMomentEquations> kMomentEquationNames{"Jm", "Jz", "Jm2", "Jz2", "JzJm"};

using MomentRates = std::array<cplx, kMomentEquations>;

/// The five tracked moments in equation order.
inline MomentRates tracked_moments(const MomentSet& m) { return {m.Jm, m.Jz, m.Jm2, m.Jz2, m.JzJm}; }

/// Closed right-hand sides written in terms of F and lower moments, term by term
/// (C = J(J+1)); no algebraic regrouping.
inline MomentRates closed_moment_rates(const MomentSet& m, const CoeffState& F, double a, double b, double J) {
    const double C = J * (J + 1.0);
    const cplx F11 = F.F11, F12 = F.F12, F21 = F.F21, F22 = F.F22;
    const cplx F11c = std::conj(F11), F12c = std::conj(F12), F21c = std::conj(F21), F22c = std::conj(F22);
    const cplx Jm = m.Jm, Jz = m.Jz, Jz2 = m.Jz2, Jz3 = m.Jz3, Jz4 = m.Jz4;
    const cplx JzJm = m.JzJm, Jz2Jm = m.Jz2Jm, Jz3Jm = m.Jz3Jm;
    const cplx Jm2 = m.Jm2, JzJm2 = m.JzJm2, Jz2Jm2 = m.Jz2Jm2;

    MomentRates r;
    // d<Jm>
    r[0] = -I * (a + b) * Jm - 2.0 * I * b * JzJm +
           (2.0 * F11 * JzJm - 2.0 * F21c * (JzJm + Jm) - 2.0 * F22c * (JzJm + Jz2Jm));
    // d<Jz>
    r[1] = 2.0 * (-F11c * (C - Jz2 + Jz) - F12c * (-C + (C - 1.0) * Jz + 2.0 * Jz2 - Jz3) +
                  F21c * (C - Jz2 - Jz) + F22c * (C + (C - 1.0) * Jz - 2.0 * Jz2 - Jz3))
                     .real();
    // d<Jm^2>
    r[2] = -I * (2.0 * a + 4.0 * b) * Jm2 - 4.0 * I * b * JzJm2 + F11 * (4.0 * JzJm2 + 2.0 * Jm2) +
           F12 * (4.0 * Jz2Jm2 + 6.0 * JzJm2 + 2.0 * Jm2) - F21c * (4.0 * JzJm2 + 6.0 * Jm2) -
           F22c * (4.0 * Jz2Jm2 + 6.0 * JzJm2);
    // d<Jz^2>
    r[3] = 2.0 * (-F11c * (-C + (2.0 * C - 1.0) * Jz + 3.0 * Jz2 - 2.0 * Jz3) -
                  F12c * (C - (3.0 * C - 1.0) * Jz + (2.0 * C - 4.0) * Jz2 + 5.0 * Jz3 - 2.0 * Jz4) +
                  F21c * (C + (2.0 * C - 1.0) * Jz - 3.0 * Jz2 - 2.0 * Jz3) +
                  F22c * (C * Jz + (2.0 * C - 1.0) * Jz2 - 3.0 * Jz3 - 2.0 * Jz4))
                     .real();
    // d<Jz Jm>
    r[4] = -I * a * JzJm - I * b * (JzJm + 2.0 * Jz2Jm) +
           (-F11 * (C * Jm + JzJm - 3.0 * Jz2Jm) - F11c * (C * Jm + JzJm - Jz2Jm) -
            F12 * (C * JzJm + Jz2Jm - 3.0 * Jz3Jm) - F12c * (-C * Jm + (C - 1.0) * JzJm + 2.0 * Jz2Jm - Jz3Jm) +
            F21 * ((C - 2.0) * Jm - 3.0 * JzJm - Jz2Jm) + F21c * ((C - 2.0) * Jm - 5.0 * JzJm - 3.0 * Jz2Jm) +
            F22 * ((C - 2.0) * Jm + (C - 5.0) * JzJm - 4.0 * Jz2Jm - Jz3Jm) +
            F22c * ((C - 2.0) * JzJm - 5.0 * Jz2Jm - 3.0 * Jz3Jm));
    return r;
}

/// d<A>/dt = tr[A rho_dot] evaluated directly from the master equation.
inline MomentRates exact_moment_rates(const Matrix& rho, const RealVector& h_diag, const CollectiveOps& ops,
                                      const CoeffState& F, const MomentOperators& mo) {
    const Matrix d = master_rhs(rho, h_diag, ops, assemble_obar(F, ops));
    return {expectation(d, mo.Jm), expectation(d, mo.Jz).real(), expectation(d, mo.Jm2),
            expectation(d, mo.Jz2).real(), expectation(d, mo.JzJm)};
}

struct ResidualSeries {
    std::vector<double> t;
    std::array<std::vector<double>, kMomentEquations> residual;
    std::array<double, kMomentEquations> max{};
    std::array<double, kMomentEquations> mean{};
};

/// Second-order finite difference of uniformly spaced values: centered in the
/// interior, one-sided three-point stencils at the ends.
template <typename T>
std::vector<T> finite_difference(const std::vector<T>& y, double h) {
    const std::size_t n = y.size();
    std::vector<T> d(n);
    if (n < 3) throw InvalidParameter("finite differences need at least 3 samples");
    d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h);
    for (std::size_t k = 1; k + 1 < n; ++k) d[k] = (y[k + 1] - y[k - 1]) / (2.0 * h);
    d[n - 1] = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * h);
    return d;
}

namespace detail {

/// Number of leading samples on the grid spacing set by the first two; a
/// shorter final stride (t_max not a multiple of it) is left out.
inline std::size_t uniform_prefix(const std::vector<PropagationSample>& samples) {
    if (samples.size() < 3) throw InvalidParameter("residuals need at least 3 samples");
    const double h = samples[1].t - samples[0].t;
    std::size_t n = 2;
    while (n < samples.size() && std::abs(samples[n].t - samples[n - 1].t - h) <= 1e-9 * h) ++n;
    if (n < 3) throw InvalidParameter("residuals need at least 3 uniformly spaced samples");
    return n;
}

} // namespace detail

/// |finite-difference of the measured moment - closed right-hand side| per
/// equation and sample.
inline ResidualSeries closed_moment_residuals(const std::vector<PropagationSample>& samples, const CollectiveOps& ops,
                                         double a, double b) {
    const std::size_t n = detail::uniform_prefix(samples);
    const double h = samples[1].t - samples[0].t;
    const MomentOperators mo(ops);
    std::vector<MomentSet> moments;
    moments.reserve(n);
    for (std::size_t k = 0; k < n; ++k) moments.push_back(compute_moments(samples[k].rho.rho, mo));

    ResidualSeries out;
    for (std::size_t k = 0; k < n; ++k) out.t.push_back(samples[k].t);
    for (int e = 0; e < kMomentEquations; ++e) {
        std::vector<cplx> y;
        y.reserve(n);
        for (const auto& m : moments) y.push_back(tracked_moments(m)[e]);
        const std::vector<cplx> dy = finite_difference(y, h);
        double sum = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const cplx rhs = closed_moment_rates(moments[k], samples[k].F, a, b, ops.j())[e];
            const double res = std::abs(dy[k] - rhs);
            out.residual[e].push_back(res);
            out.max[e] = std::max(out.max[e], res);
            sum += res;
        }
        out.mean[e] = sum / n;
    }
    return out;
}

/// Same residual with tr[A rho_dot] in place of the closed right-hand sides.
inline ResidualSeries master_identity_residuals(const std::vector<PropagationSample>& samples,
                                                const CollectiveOps& ops, const EffectiveHamiltonian& H) {
    const std::size_t n = detail::uniform_prefix(samples);
    const double h = samples[1].t - samples[0].t;
    const MomentOperators mo(ops);
    const RealVector hd = H.diagonal(ops.basis);
    ResidualSeries out;
    std::array<std::vector<cplx>, kMomentEquations> y, rhs;
    for (std::size_t k = 0; k < n; ++k) {
        const auto& s = samples[k];
        out.t.push_back(s.t);
        const MomentRates m = tracked_moments(compute_moments(s.rho.rho, mo));
        const MomentRates r = exact_moment_rates(s.rho.rho, hd, ops, s.F, mo);
        for (int e = 0; e < kMomentEquations; ++e) {
            y[e].push_back(m[e]);
            rhs[e].push_back(r[e]);
        }
    }
    for (int e = 0; e < kMomentEquations; ++e) {
        const std::vector<cplx> dy = finite_difference(y[e], h);
        double sum = 0.0;
        for (std::size_t k = 0; k < dy.size(); ++k) {
            const double res = std::abs(dy[k] - rhs[e][k]);
            out.residual[e].push_back(res);
            out.max[e] = std::max(out.max[e], res);
            sum += res;
        }
        out.mean[e] = sum / dy.size();
    }
    return out;
}

} // namespace lmgsq
