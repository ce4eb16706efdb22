// lmgsq.cpp — command-line driver: run, sweep, plots, selfcheck
//
// exit codes: 0 success, 1 config error, 2 numerical divergence,
//             3 partial sweep failure

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lmgsq/config.hpp"
#include "lmgsq/csv.hpp"
#include "lmgsq/experiment.hpp"
#include "lmgsq/plots.hpp"
#include "lmgsq/selfcheck.hpp"

namespace fs = std::filesystem;
using namespace lmgsq;

namespace {

enum Exit { kOk = 0, kConfig = 1, kDivergence = 2, kPartial = 3 };

struct Common {
    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
};

KeyMap gather_keys(const Common& c) {
    KeyMap keys = c.config.empty() ? KeyMap{} : load_keys(c.config);
    apply_env_overrides(keys);
    if (c.seed) keys["run.seed"] = std::to_string(*c.seed);
    if (c.threads) {
        keys["run.threads"] = std::to_string(*c.threads);
        keys["sweep.threads"] = std::to_string(*c.threads);
    }
    return keys;
}

std::string stem_of(const std::string& file) {
    const fs::path p(file);
    return p.has_extension() ? p.stem().string() : p.filename().string();
}

int cmd_run(const Common& c) {
    const ExperimentConfig cfg = experiment_from_keys(gather_keys(c));
    const RunReport rep = run_experiment(cfg);
    const fs::path path = fs::path(c.out) / cfg.output;
    write_file_atomic(path, to_csv(rep.table));
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << path.string() << ": " << rep.table.rows.size() << " samples, trusted until t = "
              << format_double(rep.trusted_until) << "\n";
    return kOk;
}

int cmd_sweep(const Common& c) {
    const SweepConfig sweep = sweep_from_keys(gather_keys(c));
    const SweepResult res = run_sweep(sweep);
    const std::string stem = stem_of(sweep.base.output);
    const fs::path long_path = fs::path(c.out) / (stem + "_long.csv");
    const fs::path summary_path = fs::path(c.out) / (stem + "_summary.csv");
    write_file_atomic(long_path, to_csv(res.long_table));
    write_file_atomic(summary_path, to_csv(res.summary_table));
    std::cout << res.runs.size() << " runs, " << res.failures << " failed\n";
    std::cout << long_path.string() << "\n" << summary_path.string() << "\n";
    for (std::size_t k = 0; k < res.runs.size(); ++k) {
        if (!res.runs[k].ok) std::cerr << "run " << k << ": " << res.runs[k].error << "\n";
    }
    if (res.failures == 0) return kOk;
    if (res.failures == res.runs.size()) {
        for (const auto& r : res.runs) {
            if (r.diverged) return kDivergence;
        }
        return kConfig;
    }
    return kPartial;
}

int cmd_plots(const Common& c) {
    for (const auto& p : emit_plot_scripts(c.out)) std::cout << p.string() << "\n";
    return kOk;
}

int cmd_selfcheck(const Common& c) {
    const unsigned threads = c.threads.value_or(1);
    const auto results = run_selfcheck(threads);
    bool ok = true;
    for (const auto& r : results) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << "  " << r.detail << "\n";
        ok = ok && r.passed;
    }
    return ok ? kOk : kDivergence;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Squeezing dynamics of a collective spin in a non-Markovian finite-temperature bath"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "key=value or JSON config file");
        sub->add_option("--out", common.out, "output directory");
        sub->add_option("--seed", common.seed, "random seed (oracle mode)");
        sub->add_option("--threads", common.threads, "worker threads, 0 = all cores");
    };
    CLI::App* run = app.add_subcommand("run", "single experiment to CSV");
    CLI::App* sweep = app.add_subcommand("sweep", "parameter sweep to long and summary CSVs");
    CLI::App* plots = app.add_subcommand("plots", "write figure configs and plot scripts");
    CLI::App* check = app.add_subcommand("selfcheck", "run the invariant suite");
    for (auto* s : {run, sweep, plots, check}) add_common(s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*run) return cmd_run(common);
        if (*sweep) return cmd_sweep(common);
        if (*plots) return cmd_plots(common);
        if (*check) return cmd_selfcheck(common);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const InvalidParameter& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const InvalidDimension& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const Divergence& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return kDivergence;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDivergence;
    }
    return kOk;
}
