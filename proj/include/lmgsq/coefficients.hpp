// coefficients.hpp — memory-integrated O-operator coefficients F_ij(t)
//
// The O operators are truncated to
//   O1(t,s) = f11(t,s) Jm + f12(t,s) Jz Jm,   O2(t,s) = f21(t,s) Jp + f22(t,s) Jp Jz
// and enter the master equation through F_ij(t) = int_0^t ds alpha_i(t,s) f_ij(t,s).
// For s < t the kernels are alpha_i(t,s) = alpha_i(t,t^-) exp(-gamma (t-s)), and the
// f equations have coefficients that depend on t only through F(t). Differentiating
// under the integral therefore closes the system on F alone:
//   dF_ij/dt = alpha_i(t,t^-) f_ij(t,t) - gamma F_ij + R_ij(F),
// where R_ij is the right-hand side of the f_ij equation with every f_kj replaced by
// F_kj. The boundary values are f11(t,t) = f21(t,t) = 1, f12(t,t) = f22(t,t) = 0.
//
// The f equations (C = J(J+1), K = 3(3J/2 - 1/2)):
//   df11 = f11 {ia + ib + J(J-1/2) F12 - 2 F21 + (J(J-1/2) - 2) F22}
//        + f12 (ibJ - J F11 + (J/2) F12 - J F21 - (5/2) J F22)
//   df12 = f11 {2ib - 2 F11 + F12 - 2 F21 - 5 F22}
//        + f12 {ia + ib + (C - K) F12 - 2 F21 + (C - 2 - K) F22}
//   df21 = -f21 {ia + ib + C F12 - 2 F21 + (C - 2) F22}
//   df22 = -f21 {2ib - 2 F11 + F12 - 2 F21 - 5 F22}
//        - f22 {ia + ib + C F12 - 2 F21 + (C - 2) F22}

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "lmgsq/bath.hpp"
#include "lmgsq/errors.hpp"
#include "lmgsq/spin_algebra.hpp"

namespace lmgsq {

struct CoeffState {
    cplx F11{}, F12{}, F21{}, F22{};

    CoeffState& operator+=(const CoeffState& o) {
        F11 += o.F11;
        F12 += o.F12;
        F21 += o.F21;
        F22 += o.F22;
        return *this;
    }
    friend CoeffState operator+(CoeffState a, const CoeffState& b) { return a += b; }
    friend CoeffState operator*(double s, CoeffState a) {
        a.F11 *= s;
        a.F12 *= s;
        a.F21 *= s;
        a.F22 *= s;
        return a;
    }
    bool all_finite() const {
        auto ok = [](cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); };
        return ok(F11) && ok(F12) && ok(F21) && ok(F22);
    }
    double max_abs() const {
        return std::max({std::abs(F11), std::abs(F12), std::abs(F21), std::abs(F22)});
    }
};

struct CoeffParams {
    double a = 0.0;
    double b = 0.0;
    double J = 0.5;
    BathParams bath;

    static CoeffParams from(const EffectiveHamiltonian& H, const DickeBasis& basis, const BathParams& bath) {
        return {H.a, H.b, basis.j(), bath};
    }
};

/// Linear maps of the f equations for a given F. For index 1 the pair is
/// (f11, f12); for index 2 it is (f21, f22). d/dt (x, y) = M (x, y).
struct CoeffLinearMaps {
    cplx m1_xx, m1_xy, m1_yx, m1_yy;
    cplx m2_xx, m2_xy, m2_yx, m2_yy;
};

inline CoeffLinearMaps coefficient_linear_maps(const CoeffState& F, const CoeffParams& p) {
    const double J = p.J;
    const double C = J * (J + 1.0);
    const double K = 3.0 * (1.5 * J - 0.5);
    const cplx iab = I * (p.a + p.b);
    const cplx ib = I * p.b;

    CoeffLinearMaps m;
    // df11 = f11 {...} + f12 (...)
    m.m1_xx = iab + J * (J - 0.5) * F.F12 - 2.0 * F.F21 + (J * (J - 0.5) - 2.0) * F.F22;
    m.m1_xy = ib * J - J * F.F11 + 0.5 * J * F.F12 - J * F.F21 - 2.5 * J * F.F22;
    // df12 = f11 {...} + f12 {...}
    m.m1_yx = 2.0 * ib - 2.0 * F.F11 + F.F12 - 2.0 * F.F21 - 5.0 * F.F22;
    m.m1_yy = iab + (C - K) * F.F12 - 2.0 * F.F21 + (C - 2.0 - K) * F.F22;

    const cplx shared2 = iab + C * F.F12 - 2.0 * F.F21 + (C - 2.0) * F.F22;
    // df21 = -f21 {...}
    m.m2_xx = -shared2;
    m.m2_xy = 0.0;
    // df22 = -f21 {...} - f22 {...}
    m.m2_yx = -(2.0 * ib - 2.0 * F.F11 + F.F12 - 2.0 * F.F21 - 5.0 * F.F22);
    m.m2_yy = -shared2;
    return m;
}

inline CoeffState coeff_rhs(const CoeffState& F, const CoeffParams& p) {
    const CoeffLinearMaps m = coefficient_linear_maps(F, p);
    const CorrelationKernel k1{KernelIndex::alpha1, p.bath};
    const CorrelationKernel k2{KernelIndex::alpha2, p.bath};
    const double g = p.bath.gamma;
    CoeffState d;
    d.F11 = k1.boundary() - g * F.F11 + m.m1_xx * F.F11 + m.m1_xy * F.F12;
    d.F12 = -g * F.F12 + m.m1_yx * F.F11 + m.m1_yy * F.F12;
    d.F21 = k2.boundary() - g * F.F21 + m.m2_xx * F.F21 + m.m2_xy * F.F22;
    d.F22 = -g * F.F22 + m.m2_yx * F.F21 + m.m2_yy * F.F22;
    return d;
}

struct CoeffSample {
    double t = 0.0;
    CoeffState F;
};

using CoeffSeries = std::vector<CoeffSample>;

inline void check_step(double dt, double t_max) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidParameter("time step dt must be > 0");
    if (!(t_max >= dt)) throw InvalidParameter("t_max must be >= dt");
}

inline int step_count(double dt, double t_max) { return static_cast<int>(std::llround(t_max / dt)); }

inline CoeffState rk4_coeff_step(const CoeffState& F, const CoeffParams& p, double dt) {
    const CoeffState k1 = coeff_rhs(F, p);
    const CoeffState k2 = coeff_rhs(F + (0.5 * dt) * k1, p);
    const CoeffState k3 = coeff_rhs(F + (0.5 * dt) * k2, p);
    const CoeffState k4 = coeff_rhs(F + dt * k3, p);
    return F + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Fixed-step RK4 from F = 0, every step stored.
inline CoeffSeries evolve_coefficients(const CoeffParams& p, double t_max, double dt) {
    p.bath.validate();
    check_step(dt, t_max);
    const int steps = step_count(dt, t_max);
    CoeffSeries out;
    out.reserve(steps + 1);
    CoeffState F;
    out.push_back({0.0, F});
    for (int n = 1; n <= steps; ++n) {
        F = rk4_coeff_step(F, p, dt);
        if (!F.all_finite()) throw Divergence("coefficient ODE produced a non-finite value", n * dt);
        out.push_back({n * dt, F});
    }
    return out;
}

/// Brute-force two-time reference. Every f_ij(t, s_k) is carried explicitly on
/// the triangular (t, s) grid, advanced in t by Heun's method starting from the
/// boundary value at t = s_k, and F(t) is the trapezoidal quadrature of
/// alpha_i(t,s) f_ij(t,s) over s in [0, t]. Cost is O(n^2) in the grid size.
inline CoeffSeries coefficient_quadrature_oracle(const CoeffParams& p, double t_max, double dt) {
    p.bath.validate();
    check_step(dt, t_max);
    const int steps = step_count(dt, t_max);
    const CorrelationKernel k1{KernelIndex::alpha1, p.bath};
    const CorrelationKernel k2{KernelIndex::alpha2, p.bath};

    struct Pair {
        cplx x, y;
    };
    // f1[k] = (f11, f12)(t_n, s_k), f2[k] = (f21, f22)(t_n, s_k), k = 0..n
    std::vector<Pair> f1, f2;
    f1.reserve(steps + 1);
    f2.reserve(steps + 1);

    auto quadrature = [&](const std::vector<Pair>& g1, const std::vector<Pair>& g2, int n) {
        CoeffState F;
        if (n == 0) return F;
        for (int k = 0; k <= n; ++k) {
            const double w = (k == 0 || k == n) ? 0.5 * dt : dt;
            const double tau = (n - k) * dt;
            const cplx a1 = k1.one_sided(tau);
            const cplx a2 = k2.one_sided(tau);
            F.F11 += w * a1 * g1[k].x;
            F.F12 += w * a1 * g1[k].y;
            F.F21 += w * a2 * g2[k].x;
            F.F22 += w * a2 * g2[k].y;
        }
        return F;
    };
    auto derivative1 = [](const CoeffLinearMaps& m, const Pair& f) {
        return Pair{m.m1_xx * f.x + m.m1_xy * f.y, m.m1_yx * f.x + m.m1_yy * f.y};
    };
    auto derivative2 = [](const CoeffLinearMaps& m, const Pair& f) {
        return Pair{m.m2_xx * f.x + m.m2_xy * f.y, m.m2_yx * f.x + m.m2_yy * f.y};
    };

    CoeffSeries out;
    out.reserve(steps + 1);
    f1.push_back({1.0, 0.0});
    f2.push_back({1.0, 0.0});
    CoeffState F = quadrature(f1, f2, 0);
    out.push_back({0.0, F});

    std::vector<Pair> d1, d2, p1, p2;
    for (int n = 0; n < steps; ++n) {
        const CoeffLinearMaps m = coefficient_linear_maps(F, p);
        d1.resize(n + 1);
        d2.resize(n + 1);
        p1.resize(n + 2);
        p2.resize(n + 2);
        for (int k = 0; k <= n; ++k) {
            d1[k] = derivative1(m, f1[k]);
            d2[k] = derivative2(m, f2[k]);
            p1[k] = {f1[k].x + dt * d1[k].x, f1[k].y + dt * d1[k].y};
            p2[k] = {f2[k].x + dt * d2[k].x, f2[k].y + dt * d2[k].y};
        }
        p1[n + 1] = {1.0, 0.0};
        p2[n + 1] = {1.0, 0.0};
        const CoeffState F_pred = quadrature(p1, p2, n + 1);
        const CoeffLinearMaps mp = coefficient_linear_maps(F_pred, p);
        for (int k = 0; k <= n; ++k) {
            const Pair e1 = derivative1(mp, p1[k]);
            const Pair e2 = derivative2(mp, p2[k]);
            f1[k] = {f1[k].x + 0.5 * dt * (d1[k].x + e1.x), f1[k].y + 0.5 * dt * (d1[k].y + e1.y)};
            f2[k] = {f2[k].x + 0.5 * dt * (d2[k].x + e2.x), f2[k].y + 0.5 * dt * (d2[k].y + e2.y)};
        }
        f1.push_back({1.0, 0.0});
        f2.push_back({1.0, 0.0});
        F = quadrature(f1, f2, n + 1);
        if (!F.all_finite()) throw Divergence("quadrature oracle produced a non-finite value", (n + 1) * dt);
        out.push_back({(n + 1) * dt, F});
    }
    return out;
}

/// The f boundary values on the diagonal t = s (exposed for tests).
inline CoeffState coefficient_boundary() { return {1.0, 0.0, 1.0, 0.0}; }

} // namespace lmgsq
