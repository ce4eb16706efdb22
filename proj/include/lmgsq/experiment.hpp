// experiment.hpp — single runs and parameter sweeps producing CSV tables

#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "lmgsq/coefficients.hpp"
#include "lmgsq/config.hpp"
#include "lmgsq/csv.hpp"
#include "lmgsq/master.hpp"
#include "lmgsq/observables.hpp"
#include "lmgsq/parallel.hpp"
#include "lmgsq/trajectory.hpp"

namespace lmgsq {

inline const std::vector<std::string>& observable_columns() {
    static const std::vector<std::string> cols{
        "t",   "Jt",   "xi2",     "min_variance", "Jx",        "Jy",          "Jz",          "Jy2",
        "Jz2", "JyJz_ss", "purity", "min_eig",    "spin_angle", "residual_Jm", "residual_Jz", "residual_Jm2",
        "residual_Jz2", "residual_JzJm"};
    return cols;
}

inline const std::vector<std::string>& coefficient_columns() {
    static const std::vector<std::string> cols{"t",      "Jt",     "F11_re", "F11_im", "F12_re",
                                               "F12_im", "F21_re", "F21_im", "F22_re", "F22_im"};
    return cols;
}

struct RunReport {
    CsvTable table;
    double trusted_until = 0.0;
    std::vector<std::string> warnings;
    std::vector<SqueezingPoint> squeezing;
};

inline Matrix initial_density(const ExperimentConfig& c, const DickeBasis& basis) {
    if (c.initial.amplitudes.empty()) return projector(coherent_spin_state(basis, c.initial.theta, c.initial.phi));
    StateVector s;
    s.amplitudes = Eigen::Map<const Vector>(c.initial.amplitudes.data(), basis.dim());
    const double n = s.amplitudes.norm();
    if (!(n > 0.0)) throw ConfigError("initial.amplitudes", "state has zero norm");
    s.amplitudes /= n;
    s.normalized = true;
    return projector(s);
}

namespace detail {

inline void observable_rows(RunReport& rep, const std::vector<PropagationSample>& samples, const CollectiveOps& ops,
                            const EffectiveHamiltonian& H, int n_spins) {
    const MomentOperators mo(ops);
    const double J = ops.j();
    std::vector<double> res_t;
    std::array<std::vector<double>, kMomentEquations> res;
    if (samples.size() >= 3) {
        const ResidualSeries r = closed_moment_residuals(samples, ops, H.a, H.b);
        res_t = r.t;
        res = r.residual;
    }
    for (std::size_t k = 0; k < samples.size(); ++k) {
        const auto& s = samples[k];
        const MomentSet m = compute_moments(s.rho.rho, mo);
        const SqueezingPoint q = squeezing_parameter(m, n_spins, s.t);
        rep.squeezing.push_back(q);
        std::vector<double> row{s.t,
                                J * s.t,
                                q.xi2,
                                q.min_variance,
                                m.Jx.real(),
                                m.Jy.real(),
                                m.Jz.real(),
                                m.Jy2.real(),
                                m.Jz2.real(),
                                m.JyJz_ss.real(),
                                s.rho.purity(),
                                s.min_eigenvalue,
                                q.mean_spin_angle};
        for (int e = 0; e < kMomentEquations; ++e) {
            row.push_back(k < res_t.size() ? res[e][k] : std::numeric_limits<double>::quiet_NaN());
        }
        rep.table.rows.push_back(std::move(row));
    }
}

inline std::vector<std::string> metadata(const ExperimentConfig& c) {
    std::vector<std::string> meta{std::string("lmgsq ") + kCodeVersion};
    for (const auto& [k, v] : experiment_to_keys(c)) meta.push_back("config " + k + " = " + v);
    return meta;
}

} // namespace detail

/// Runs one experiment in memory. Throws ConfigError, Divergence or
/// KernelNotPositive.
inline RunReport run_experiment(const ExperimentConfig& c) {
    c.validate();
    const DickeBasis basis(c.N);
    const CollectiveOps ops = build_collective_operators(basis);
    const EffectiveHamiltonian H = c.hamiltonian();
    const BathParams bath = c.bath();
    const CoeffParams p = CoeffParams::from(H, basis, bath);
    const PropagationConfig pc{c.resolved_t_max(), c.resolved_dt(), c.resolved_stride()};

    RunReport rep;
    rep.table.meta = detail::metadata(c);

    if (c.mode == Mode::coefficients) {
        rep.table.header = coefficient_columns();
        const CoeffSeries series = evolve_coefficients(p, pc.t_max, pc.dt);
        for (std::size_t n = 0; n < series.size(); ++n) {
            if (n % pc.sample_stride != 0 && n + 1 != series.size()) continue;
            const auto& s = series[n];
            rep.table.rows.push_back({s.t, basis.j() * s.t, s.F.F11.real(), s.F.F11.imag(), s.F.F12.real(),
                                      s.F.F12.imag(), s.F.F21.real(), s.F.F21.imag(), s.F.F22.real(),
                                      s.F.F22.imag()});
        }
        rep.trusted_until = pc.t_max;
    } else {
        rep.table.header = observable_columns();
        const Matrix rho0 = initial_density(c, basis);
        std::vector<PropagationSample> samples;
        if (c.mode == Mode::master || c.mode == Mode::markov) {
            PropagationResult r = c.mode == Mode::master ? propagate(rho0, H, ops, p, pc)
                                                         : markov_reference(rho0, H, ops, bath, pc);
            rep.trusted_until = r.trusted_until;
            rep.warnings = r.warnings;
            samples = std::move(r.samples);
        } else {
            TrajectoryConfig tc;
            tc.propagation = pc;
            tc.realizations = c.realizations;
            tc.seed = c.seed;
            tc.threads = c.threads;
            tc.pairing = c.pairing;
            StateVector psi0;
            if (c.initial.amplitudes.empty()) {
                psi0 = coherent_spin_state(basis, c.initial.theta, c.initial.phi);
            } else {
                psi0.amplitudes = Eigen::Map<const Vector>(c.initial.amplitudes.data(), basis.dim());
                psi0.amplitudes /= psi0.amplitudes.norm();
            }
            const TrajectoryRun run = run_trajectories(psi0, H, ops, p, tc);
            const CoeffSeries F = evolve_coefficients(p, pc.t_max, pc.dt);
            bool trusted = true;
            PropagationResult r;
            for (const auto& e : ensemble_density(run)) {
                const auto n = static_cast<std::size_t>(std::llround(e.t / pc.dt));
                detail::record_sample(r, e.t, e.rho.rho, F[n].F, trusted);
            }
            rep.trusted_until = r.trusted_until;
            samples = std::move(r.samples);
        }
        detail::observable_rows(rep, samples, ops, H, c.N);
    }
    rep.table.meta.push_back("trusted_until = " + format_double(rep.trusted_until));
    rep.table.meta.push_back("trusted_Jt_until = " + format_double(basis.j() * rep.trusted_until));
    for (const auto& w : rep.warnings) rep.table.meta.push_back("warning " + w);
    return rep;
}

/// Recovers the config keys echoed in a CSV metadata block.
inline KeyMap keys_from_metadata(const std::vector<std::string>& meta) {
    KeyMap k;
    for (const auto& line : meta) {
        if (line.rfind("config ", 0) != 0) continue;
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        k[line.substr(7, eq - 7)] = line.substr(eq + 3);
    }
    return k;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRun {
    std::vector<double> values;  // one per axis
    ExperimentConfig config;
    bool ok = false;
    std::string error;
    bool diverged = false;
    RunReport report;
    SqueezingSummary summary;
};

struct SweepResult {
    std::vector<SweepRun> runs;
    CsvTable long_table;
    CsvTable summary_table;
    std::size_t failures = 0;
};

inline std::vector<SweepRun> expand_sweep(const SweepConfig& s) {
    if (s.axes.empty() || s.axes.size() > 2) throw ConfigError("sweep.param", "one or two swept parameters");
    if (s.run_count() > s.cap) throw ConfigError("sweep.cap", "sweep exceeds the run cap");
    std::vector<SweepRun> runs;
    const std::size_t n0 = s.axes[0].values.size();
    const std::size_t n1 = s.axes.size() > 1 ? s.axes[1].values.size() : 1;
    for (std::size_t i = 0; i < n0; ++i) {
        for (std::size_t j = 0; j < n1; ++j) {
            SweepRun r;
            r.config = s.base;
            r.values.push_back(s.axes[0].values[i]);
            apply_sweep_value(r.config, s.axes[0].param, s.axes[0].values[i]);
            if (s.axes.size() > 1) {
                r.values.push_back(s.axes[1].values[j]);
                apply_sweep_value(r.config, s.axes[1].param, s.axes[1].values[j]);
            }
            runs.push_back(std::move(r));
        }
    }
    return runs;
}

/// Runs every point on a worker pool. Failures are recorded per run and the
/// sweep carries on.
inline SweepResult run_sweep(const SweepConfig& s) {
    SweepResult out;
    out.runs = expand_sweep(s);
    parallel_for(out.runs.size(), s.threads, [&](std::size_t k) {
        SweepRun& r = out.runs[k];
        try {
            r.report = run_experiment(r.config);
            r.summary = summarize_squeezing(r.report.squeezing);
            r.ok = true;
        } catch (const Divergence& e) {
            r.error = e.what();
            r.diverged = true;
        } catch (const Error& e) {
            r.error = e.what();
        }
    });

    std::vector<std::string> axis_names;
    for (const auto& a : s.axes) axis_names.push_back(a.param);
    const std::vector<std::string> base_meta = detail::metadata(s.base);
    out.long_table.meta = base_meta;
    out.summary_table.meta = base_meta;
    for (std::size_t k = 0; k < s.axes.size(); ++k) {
        std::string line = "sweep " + s.axes[k].param + " =";
        for (double v : s.axes[k].values) line += " " + format_double(v);
        out.long_table.meta.push_back(line);
        out.summary_table.meta.push_back(line);
    }

    out.long_table.header = {"run"};
    for (const auto& n : axis_names) out.long_table.header.push_back(n);
    const auto& cols = s.base.mode == Mode::coefficients ? coefficient_columns() : observable_columns();
    out.long_table.header.insert(out.long_table.header.end(), cols.begin(), cols.end());

    out.summary_table.header = {"run"};
    for (const auto& n : axis_names) out.summary_table.header.push_back(n);
    for (const char* c : {"ok", "min_xi2", "argmin_t", "argmin_Jt", "onset_t", "onset_Jt", "duration_t",
                          "duration_Jt", "trusted_until"}) {
        out.summary_table.header.push_back(c);
    }

    for (std::size_t k = 0; k < out.runs.size(); ++k) {
        const SweepRun& r = out.runs[k];
        if (!r.ok) {
            ++out.failures;
            out.summary_table.meta.push_back("run " + std::to_string(k) + " failed: " + r.error);
        }
        for (const auto& row : r.report.table.rows) {
            std::vector<double> line{static_cast<double>(k)};
            line.insert(line.end(), r.values.begin(), r.values.end());
            line.insert(line.end(), row.begin(), row.end());
            out.long_table.rows.push_back(std::move(line));
        }
        const double J = 0.5 * r.config.N;
        const SqueezingSummary& m = r.summary;
        std::vector<double> line{static_cast<double>(k)};
        line.insert(line.end(), r.values.begin(), r.values.end());
        const double nan = std::numeric_limits<double>::quiet_NaN();
        const double onset = m.squeezed ? m.onset_t : nan;
        const double dur = m.squeezed ? m.duration : (r.ok ? 0.0 : nan);
        line.insert(line.end(), {r.ok ? 1.0 : 0.0, m.min_xi2, m.argmin_t, J * m.argmin_t, onset, J * onset, dur,
                                 J * dur, r.ok ? r.report.trusted_until : nan});
        out.summary_table.rows.push_back(std::move(line));
    }
    return out;
}

} // namespace lmgsq
