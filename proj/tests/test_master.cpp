// test_master.cpp — O-bar assembly, master-equation right-hand side, propagation

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "lmgsq/master.hpp"
#include "lmgsq/observables.hpp"

using namespace lmgsq;

namespace {

cplx random_complex(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return {n(rng), n(rng)};
}

Matrix random_density(std::mt19937_64& rng, int dim) {
    Matrix a(dim, dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) a(i, j) = random_complex(rng);
    }
    Matrix rho = a * a.adjoint();
    return rho / rho.trace();
}

CoeffState random_coefficients(std::mt19937_64& rng) {
    return {random_complex(rng), random_complex(rng), random_complex(rng), random_complex(rng)};
}

} // namespace

TEST(AssembleObar, ZeroAndSingleTerm) {
    const auto ops = build_collective_operators(DickeBasis(2));
    const Obars z = assemble_obar(CoeffState{}, ops);
    EXPECT_EQ(z.o1.dense().cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(z.o2_dag.dense().cwiseAbs().maxCoeff(), 0.0);
    CoeffState F;
    F.F11 = 1.0;
    const Obars o = assemble_obar(F, ops);
    EXPECT_EQ((o.o1.dense() - ops.Jm).cwiseAbs().maxCoeff(), 0.0);
}

TEST(AssembleObar, TermsAndAdjoints) {
    std::mt19937_64 rng(5);
    const auto ops = build_collective_operators(DickeBasis(9));
    for (int k = 0; k < 20; ++k) {
        const CoeffState F = random_coefficients(rng);
        const Obars o = assemble_obar(F, ops);
        const Matrix O1 = F.F11 * ops.Jm + F.F12 * ops.Jz * ops.Jm;
        const Matrix O2 = F.F21 * ops.Jp + F.F22 * ops.Jp * ops.Jz;
        const Matrix O1d = std::conj(F.F11) * ops.Jp + std::conj(F.F12) * ops.Jp * ops.Jz;
        const Matrix O2d = std::conj(F.F21) * ops.Jm + std::conj(F.F22) * ops.Jz * ops.Jm;
        EXPECT_LT((o.o1.dense() - O1).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((o.o2.dense() - O2).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((o.o1_dag.dense() - O1d).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((o.o2_dag.dense() - O2d).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((O1.adjoint() - O1d).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(MasterRhs, MatchesDenseForm) {
    std::mt19937_64 rng(11);
    const DickeBasis b(6);
    const auto ops = build_collective_operators(b);
    const EffectiveHamiltonian H{0.8, -0.6};
    for (int k = 0; k < 10; ++k) {
        const Matrix rho = random_density(rng, b.dim());
        const CoeffState F = random_coefficients(rng);
        const Obars o = assemble_obar(F, ops);
        const Matrix dense = master_rhs_dense(rho, H.matrix(b), ops.Jm, o.o1.dense(), o.o2.dense(),
                                              o.o1_dag.dense(), o.o2_dag.dense());
        EXPECT_LT((master_rhs(rho, H, ops, o) - dense).cwiseAbs().maxCoeff(), 1e-11);
    }
}

TEST(MasterRhs, TraceFreeAndHermitian) {
    std::mt19937_64 rng(12);
    const DickeBasis b(5);
    const auto ops = build_collective_operators(b);
    const EffectiveHamiltonian H{1.0, -1.0};
    for (int k = 0; k < 100; ++k) {
        const Matrix rho = random_density(rng, b.dim());
        const Matrix d = master_rhs(rho, H, ops, assemble_obar(random_coefficients(rng), ops));
        EXPECT_LT(std::abs(d.trace()), 1e-12);
        EXPECT_LT((d - d.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(MasterRhs, UnitaryDiagonalIsStationary) {
    const DickeBasis b(4);
    const auto ops = build_collective_operators(b);
    Matrix rho = Matrix::Zero(5, 5);
    rho.diagonal() << 0.1, 0.2, 0.3, 0.25, 0.15;
    const Matrix d = master_rhs(rho, EffectiveHamiltonian{1.0, 2.0}, ops, assemble_obar(CoeffState{}, ops));
    EXPECT_EQ(d.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Propagate, LarmorPrecession) {
    const DickeBasis b(8);
    const auto ops = build_collective_operators(b);
    const EffectiveHamiltonian H{1.0, 0.0};
    const CoeffParams p = CoeffParams::from(H, b, {0.0, 1.0, 10.0});
    const auto r = propagate(projector(coherent_spin_state(b, std::numbers::pi / 2, 0.0)), H, ops, p, {3.0, 1e-3, 50});
    for (const auto& s : r.samples) {
        const cplx jx = expectation(s.rho.rho, ops.Jx);
        const cplx jy = expectation(s.rho.rho, ops.Jy);
        EXPECT_NEAR(jx.real(), b.j() * std::cos(s.t), 1e-9);
        EXPECT_NEAR(jy.real(), b.j() * std::sin(s.t), 1e-9);
        EXPECT_NEAR(std::abs(expectation(s.rho.rho, ops.Jp)), b.j(), 1e-9);
        EXPECT_NEAR(s.rho.purity(), 1.0, 1e-10);
    }
}

TEST(Propagate, OneAxisTwistingSqueezes) {
    const DickeBasis b(20);
    const auto ops = build_collective_operators(b);
    const EffectiveHamiltonian H{0.0, -1.0};
    const auto r = propagate(projector(coherent_spin_state(b, std::numbers::pi / 2, 0.0)), H, ops,
                             CoeffParams::from(H, b, {0.0, 1.0, 0.0}), {0.1, 1e-4, 10});
    double lowest = 1.0;
    for (const auto& s : r.samples) lowest = std::min(lowest, squeezing_parameter(compute_moments(s.rho.rho, ops), 20).xi2);
    EXPECT_LT(lowest, 0.5);
}

TEST(Propagate, Invariants) {
    const DickeBasis b(20);
    const auto ops = build_collective_operators(b);
    const EffectiveHamiltonian H{1.0, -1.0};
    const CoeffParams p = CoeffParams::from(H, b, {0.01, 1.0, 10.0});
    const auto r = propagate(projector(coherent_spin_state(b, std::numbers::pi / 2, 0.0)), H, ops, p, {0.5, 5e-4, 20});
    EXPECT_LT(r.max_trace_error, 1e-8);
    EXPECT_LT(r.max_hermiticity_error, 1e-10);
    EXPECT_TRUE(r.warnings.empty());
    for (const auto& s : r.samples) {
        EXPECT_LT(std::abs(expectation(s.rho.rho, ops.J2) - b.casimir()), 1e-8);
    }
    EXPECT_EQ(r.samples.back().t, 0.5);
    EXPECT_GT(r.trusted_until, 0.0);
}

TEST(Propagate, SamplesIncludeFinalStep) {
    const DickeBasis b(2);
    const auto ops = build_collective_operators(b);
    const EffectiveHamiltonian H{1.0, 0.0};
    const auto r = propagate(projector(coherent_spin_state(b, 1.0, 0.0)), H, ops,
                             CoeffParams::from(H, b, {0.01, 1.0, 1.0}), {0.07, 0.01, 3});
    ASSERT_EQ(r.samples.size(), 4u);
    EXPECT_NEAR(r.samples[2].t, 0.06, 1e-15);
    EXPECT_NEAR(r.samples[3].t, 0.07, 1e-15);
}

TEST(Propagate, StepHalvingIsFourthOrder) {
    const DickeBasis b(10);
    const auto ops = build_collective_operators(b);
    const EffectiveHamiltonian H{1.0, -1.0};
    const CoeffParams p = CoeffParams::from(H, b, {0.01, 1.0, 10.0});
    const Matrix rho0 = projector(coherent_spin_state(b, std::numbers::pi / 3, 0.0));
    auto jz_at_end = [&](double dt) {
        const auto r = propagate(rho0, H, ops, p, {0.5, dt, 1000000});
        return expectation(r.samples.back().rho.rho, ops.Jz).real();
    };
    const double e1 = jz_at_end(0.02) - jz_at_end(0.01);
    const double e2 = jz_at_end(0.01) - jz_at_end(0.005);
    EXPECT_NEAR(e1 / e2, 16.0, 16.0 * 0.3);
}

TEST(Propagate, MomentDuality) {
    // finite-difference d<A>/dt from samples == tr[A rhs(rho)]
    const DickeBasis b(4);
    const auto ops = build_collective_operators(b);
    const EffectiveHamiltonian H{0.5, -0.3};
    const CoeffParams p = CoeffParams::from(H, b, {0.05, 1.0, 5.0});
    const auto r = propagate(projector(coherent_spin_state(b, 1.2, 0.3)), H, ops, p, {0.01, 1e-5, 1});
    const auto res = master_identity_residuals(r.samples, ops, H);
    EXPECT_LT(res.max[0], 1e-8);  // Jm
    EXPECT_LT(res.max[1], 1e-8);  // Jz
}

TEST(Propagate, Errors) {
    const DickeBasis b(3);
    const auto ops = build_collective_operators(b);
    const EffectiveHamiltonian H{1.0, 0.0};
    const CoeffParams p = CoeffParams::from(H, b, {0.01, 1.0, 1.0});
    const Matrix rho0 = projector(coherent_spin_state(b, 1.0, 0.0));
    EXPECT_THROW(propagate(rho0, H, ops, p, {1.0, 0.0, 1}), InvalidParameter);
    EXPECT_THROW(propagate(rho0, H, ops, p, {1.0, 0.1, 0}), InvalidParameter);
    EXPECT_THROW(propagate(Matrix::Identity(3, 3), H, ops, p, {1.0, 0.1, 1}), InvalidDimension);
    EXPECT_THROW(propagate(2.0 * rho0, H, ops, p, {1.0, 0.1, 1}), InvalidParameter);
    const CoeffParams wild = CoeffParams::from(H, b, {50.0, 1.0, 1000.0});
    EXPECT_THROW(propagate(rho0, H, ops, wild, {50.0, 0.05, 1}), Divergence);
}

TEST(MarkovReference, UnitaryLimitAndPositivity) {
    const DickeBasis b(6);
    const auto ops = build_collective_operators(b);
    const EffectiveHamiltonian H{1.0, -1.0};
    const Matrix rho0 = projector(coherent_spin_state(b, std::numbers::pi / 4, 0.0));
    const BathParams free{0.0, 1.0, 10.0};
    const auto u1 = markov_reference(rho0, H, ops, free, {1.0, 1e-3, 100});
    const auto u2 = propagate(rho0, H, ops, CoeffParams::from(H, b, free), {1.0, 1e-3, 100});
    for (std::size_t k = 0; k < u1.samples.size(); ++k) {
        EXPECT_LT((u1.samples[k].rho.rho - u2.samples[k].rho.rho).cwiseAbs().maxCoeff(), 1e-12);
    }
    const auto m = markov_reference(rho0, H, ops, {0.05, 10.0, 3.0}, {5.0, 1e-3, 100});
    for (const auto& s : m.samples) EXPECT_GE(s.min_eigenvalue, -1e-10);
    const CoeffState F = markov_coefficients({0.05, 10.0, 3.0});
    EXPECT_NEAR(std::abs(F.F11 - 0.5 * 0.05 * cplx(3.0, -10.0)), 0.0, 1e-16);
    EXPECT_NEAR(std::abs(F.F21 - 0.5 * 0.05 * 3.0), 0.0, 1e-16);
}
