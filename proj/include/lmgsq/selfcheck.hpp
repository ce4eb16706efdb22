// selfcheck.hpp — quick invariant suite behind `lmgsq selfcheck`

#pragma once

#include <string>
#include <vector>

#include "lmgsq/config.hpp"
#include "lmgsq/csv.hpp"
#include "lmgsq/experiment.hpp"
#include "lmgsq/master.hpp"
#include "lmgsq/observables.hpp"
#include "lmgsq/spin_algebra.hpp"

namespace lmgsq {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

inline std::vector<CheckResult> run_selfcheck(unsigned threads = 1) {
    std::vector<CheckResult> out;
    auto record = [&](std::string name, bool ok, std::string detail) {
        out.push_back({std::move(name), ok, std::move(detail)});
    };

    {
        double worst_comm = 0.0, worst_casimir = 0.0;
        for (int n : {1, 2, 4, 10, 20, 64}) {
            const DickeBasis basis(n);
            const CollectiveOps ops = build_collective_operators(basis);
            const Matrix comm = ops.Jx * ops.Jy - ops.Jy * ops.Jx - I * ops.Jz;
            worst_comm = std::max(worst_comm, comm.cwiseAbs().maxCoeff());
            const Matrix c = ops.J2 - basis.casimir() * Matrix::Identity(basis.dim(), basis.dim());
            worst_casimir = std::max(worst_casimir, c.cwiseAbs().maxCoeff());
        }
        record("operator_algebra", worst_comm < 1e-12 && worst_casimir < 1e-10,
               "|[Jx,Jy]-iJz| " + format_double(worst_comm) + ", |J2-J(J+1)| " + format_double(worst_casimir));
    }

    {
        ExperimentConfig c;
        c.N = 10;
        c.a = 1.0;
        c.b = -1.0;
        c.gamma = 1.0;
        c.Jt_max = 2.0;
        c.dt = 1e-3;
        c.sample_stride = 10;
        const DickeBasis basis(c.N);
        const CollectiveOps ops = build_collective_operators(basis);
        const EffectiveHamiltonian H = c.hamiltonian();
        const PropagationResult r =
            propagate(initial_density(c, basis), H, ops, CoeffParams::from(H, basis, c.bath()),
                      {c.resolved_t_max(), *c.dt, *c.sample_stride});
        double casimir = 0.0;
        for (const auto& s : r.samples) {
            casimir = std::max(casimir, std::abs(expectation(s.rho.rho, ops.J2) - basis.casimir()));
        }
        record("master_invariants",
               r.max_trace_error < 1e-8 && r.max_hermiticity_error < 1e-10 && casimir < 1e-8,
               "trace " + format_double(r.max_trace_error) + ", hermiticity " +
                   format_double(r.max_hermiticity_error) + ", <J2> " + format_double(casimir));

        const SqueezingPoint q0 = squeezing_parameter(compute_moments(r.samples.front().rho.rho, ops), c.N);
        record("xi2_at_start", std::abs(q0.xi2 - 1.0) < 1e-10, "xi2(0) - 1 = " + format_double(q0.xi2 - 1.0));

        c.threads = threads;
        const RunReport rep = run_experiment(c);
        const std::string text = to_csv(rep.table);
        const bool same = to_csv(parse_csv(text)) == text;
        const RunReport again = run_experiment(experiment_from_keys(keys_from_metadata(rep.table.meta)));
        record("csv_round_trip", same, same ? "identical" : "re-serialized text differs");
        record("rerun_from_metadata", to_csv(again.table) == text,
               to_csv(again.table) == text ? "bit-identical" : "rerun differs");
    }
    return out;
}

} // namespace lmgsq
