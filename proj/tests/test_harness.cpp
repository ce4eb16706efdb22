// test_harness.cpp — configuration, CSV output, sweeps and the command-line driver

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "lmgsq/config.hpp"
#include "lmgsq/csv.hpp"
#include "lmgsq/experiment.hpp"
#include "lmgsq/plots.hpp"

namespace fs = std::filesystem;
using namespace lmgsq;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("lmgsq_test_" + std::to_string(::getpid())) / name;
    fs::create_directories(p);
    return p;
}

void write(const fs::path& p, const std::string& s) {
    std::ofstream out(p);
    out << s;
}

const char* kSmall = R"(# small master run
[system]
N = 4
a = 1.0
b = -1.0
[bath]
Gamma = 0.01
gamma = 1.0
kT = 2.0
[run]
t_max = 0.2
dt = 1e-3
sample_stride = 10
)";

int run_cli(const std::string& args) {
    const char* cli = std::getenv("LMGSQ_CLI");
    if (!cli) return -1;
    const int status = std::system((std::string(cli) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST(Config, KeyValueAndJsonAgree) {
    const KeyMap kv = parse_key_value(kSmall);
    EXPECT_EQ(kv.at("system.N"), "4");
    EXPECT_EQ(kv.at("run.dt"), "1e-3");
    const KeyMap js = parse_json_config(R"({"system": {"N": 4, "a": 1.0, "b": -1.0},
        "bath": {"Gamma": 0.01, "gamma": 1.0, "kT": 2.0},
        "run": {"t_max": 0.2, "dt": 1e-3, "sample_stride": 10}})");
    const auto a = experiment_from_keys(kv);
    const auto b = experiment_from_keys(js);
    EXPECT_EQ(experiment_to_keys(a), experiment_to_keys(b));
    EXPECT_EQ(a.N, 4);
    EXPECT_EQ(a.resolved_stride(), 10);
}

TEST(Config, DefaultsAndDerivedValues) {
    KeyMap k{{"system.a", "1"}, {"system.b", "-1"}};
    const auto c = experiment_from_keys(k);
    EXPECT_EQ(c.N, 20);
    EXPECT_DOUBLE_EQ(c.resolved_t_max(), 0.5);  // Jt = 5 at J = 10
    EXPECT_DOUBLE_EQ(c.resolved_dt(), 1e-3 / 21.0);
    EXPECT_EQ(c.mode, Mode::master);

    KeyMap l{{"system.lambda", "-10"}, {"system.h", "-0.5"}};
    const auto d = experiment_from_keys(l);
    EXPECT_DOUBLE_EQ(d.hamiltonian().a, 1.0);
    EXPECT_DOUBLE_EQ(d.hamiltonian().b, -1.0);
}

TEST(Config, ErrorsNameTheField) {
    auto field_of = [](const KeyMap& k) -> std::string {
        try {
            experiment_from_keys(k);
        } catch (const ConfigError& e) {
            return e.field();
        }
        return "";
    };
    EXPECT_EQ(field_of({{"system.a", "1"}}), "system.b");
    EXPECT_EQ(field_of({}), "system.a");
    EXPECT_EQ(field_of({{"system.a", "1"}, {"system.b", "1"}, {"system.lambda", "1"}, {"system.h", "0"}}), "system.a");
    EXPECT_EQ(field_of({{"system.a", "1"}, {"system.b", "1"}, {"bath.gamma", "0"}}), "bath.gamma");
    EXPECT_EQ(field_of({{"system.a", "1"}, {"system.b", "1"}, {"bath.kT", "x"}}), "bath.kT");
    EXPECT_EQ(field_of({{"system.a", "1"}, {"system.b", "1"}, {"system.colour", "red"}}), "system.colour");
    EXPECT_EQ(field_of({{"system.a", "1"}, {"system.b", "1"}, {"run.mode", "fast"}}), "run.mode");
    EXPECT_EQ(field_of({{"system.a", "1"}, {"system.b", "1"}, {"run.mode", "oracle"}, {"oracle.realizations", "10"}}),
              "oracle.realizations");
    EXPECT_EQ(field_of({{"system.a", "1"}, {"system.b", "1"}, {"system.N", "2"}, {"initial.amplitudes", "1,0"}}),
              "initial.amplitudes");
}

TEST(Config, EnvironmentOverrides) {
    EXPECT_EQ(env_name("bath.Gamma"), "LMGSQ_BATH_Gamma");
    ::setenv("LMGSQ_BATH_Gamma", "0.25", 1);
    KeyMap k = parse_key_value(kSmall);
    apply_env_overrides(k);
    ::unsetenv("LMGSQ_BATH_Gamma");
    EXPECT_DOUBLE_EQ(experiment_from_keys(k).Gamma, 0.25);
}

TEST(Csv, RoundTrip) {
    CsvTable t;
    t.meta = {"lmgsq test", "config a = 1"};
    t.header = {"t", "x"};
    t.rows = {{0.0, 0.1}, {1e-300, -3.0000000000000004}, {2.5, std::numeric_limits<double>::quiet_NaN()}};
    const CsvTable u = parse_csv(to_csv(t));
    EXPECT_EQ(u.meta, t.meta);
    EXPECT_EQ(u.header, t.header);
    ASSERT_EQ(u.rows.size(), 3u);
    EXPECT_EQ(u.rows[1][0], 1e-300);
    EXPECT_EQ(u.rows[1][1], -3.0000000000000004);
    EXPECT_TRUE(std::isnan(u.rows[2][1]));
    EXPECT_THROW(t.column("nope"), Error);
}

TEST(Csv, AtomicWriteLeavesNoTemporaries) {
    const fs::path dir = scratch("atomic");
    write_file_atomic(dir / "a.csv", "one\n");
    write_file_atomic(dir / "a.csv", "two\n");
    EXPECT_EQ(read_text_file((dir / "a.csv").string()), "two\n");
    int files = 0;
    for (const auto& e : fs::directory_iterator(dir)) files += e.is_regular_file();
    EXPECT_EQ(files, 1);
}

TEST(Experiment, RerunFromMetadataIsBitExact) {
    const auto cfg = experiment_from_keys(parse_key_value(kSmall));
    const RunReport first = run_experiment(cfg);
    const CsvTable echoed = parse_csv(to_csv(first.table));
    const RunReport second = run_experiment(experiment_from_keys(keys_from_metadata(echoed.meta)));
    EXPECT_EQ(to_csv(first.table), to_csv(second.table));
    EXPECT_EQ(first.table.header, observable_columns());
    EXPECT_NEAR(first.table.values("xi2").front(), 1.0, 1e-10);
}

TEST(Experiment, MarkovEqualsMasterWithoutCoupling) {
    KeyMap k = parse_key_value(kSmall);
    k["bath.Gamma"] = "0";
    const RunReport m = run_experiment(experiment_from_keys(k));
    k["run.mode"] = "markov";
    const RunReport r = run_experiment(experiment_from_keys(k));
    const auto x = m.table.values("Jx"), y = r.table.values("Jx");
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t n = 0; n < x.size(); ++n) EXPECT_NEAR(x[n], y[n], 1e-10);
}

TEST(Experiment, CoefficientMode) {
    KeyMap k = parse_key_value(kSmall);
    k["run.mode"] = "coefficients";
    const RunReport r = run_experiment(experiment_from_keys(k));
    EXPECT_EQ(r.table.header, coefficient_columns());
    EXPECT_EQ(r.table.rows.size(), 21u);
    EXPECT_EQ(r.table.rows.front()[2], 0.0);
}

TEST(Experiment, OracleModeRuns) {
    KeyMap k = parse_key_value(kSmall);
    k["system.N"] = "2";
    k["run.mode"] = "oracle";
    k["oracle.realizations"] = "128";
    k["run.t_max"] = "0.05";
    const auto cfg = experiment_from_keys(k);
    const RunReport a = run_experiment(cfg);
    const RunReport b = run_experiment(cfg);
    EXPECT_EQ(to_csv(a.table), to_csv(b.table));
    EXPECT_NEAR(a.table.values("Jx").front(), 1.0, 1e-12);
}

TEST(Sweep, ExpansionCapAndRanges) {
    KeyMap k = parse_key_value(kSmall);
    k["sweep.param"] = "gamma";
    k["sweep.values"] = "0.5, 1, 2";
    k["sweep.param2"] = "a_over_b";
    k["sweep.range2"] = "-1:1:0.5";
    const SweepConfig s = sweep_from_keys(k);
    EXPECT_EQ(s.run_count(), 15u);
    const auto runs = expand_sweep(s);
    EXPECT_DOUBLE_EQ(*runs[1].config.a, 0.5);  // a = -0.5 * b, b = -1
    EXPECT_DOUBLE_EQ(runs[5].config.gamma, 1.0);
    k["sweep.cap"] = "10";
    EXPECT_THROW(sweep_from_keys(k), ConfigError);
    k.erase("sweep.cap");
    k["sweep.param2"] = "colour";
    EXPECT_THROW(sweep_from_keys(k), ConfigError);
}

TEST(Sweep, FailuresAreRecordedPerRun) {
    KeyMap k = parse_key_value(kSmall);
    k["sweep.param"] = "gamma";
    k["sweep.values"] = "1,-1";
    const SweepResult r = run_sweep(sweep_from_keys(k));
    EXPECT_EQ(r.failures, 1u);
    EXPECT_TRUE(r.runs[0].ok);
    EXPECT_FALSE(r.runs[1].ok);
    EXPECT_EQ(r.summary_table.rows.size(), 2u);
    EXPECT_EQ(r.summary_table.rows[1][r.summary_table.column("ok")], 0.0);
}

TEST(Plots, EmitsConfigsAndScripts) {
    const fs::path dir = scratch("plots");
    const auto files = emit_plot_scripts(dir);
    EXPECT_GE(files.size(), 8u);
    for (const auto& f : files) EXPECT_TRUE(fs::exists(f)) << f;
    // every emitted config parses
    for (const auto& p : plot_files()) {
        if (p.name.ends_with(".ini")) EXPECT_NO_THROW(experiment_from_keys(parse_key_value(p.content))) << p.name;
    }
}

TEST(Cli, ExitCodes) {
    if (!std::getenv("LMGSQ_CLI")) GTEST_SKIP() << "LMGSQ_CLI not set";
    const fs::path dir = scratch("cli");
    write(dir / "ok.ini", kSmall);
    EXPECT_EQ(run_cli("run --config " + (dir / "ok.ini").string() + " --out " + dir.string()), 0);
    EXPECT_TRUE(fs::exists(dir / "run.csv"));

    write(dir / "bad.ini", std::string(kSmall) + "[bath]\ncolour = red\n");
    EXPECT_EQ(run_cli("run --config " + (dir / "bad.ini").string() + " --out " + dir.string()), 1);
    EXPECT_EQ(run_cli("run --config " + (dir / "missing.ini").string()), 1);
    EXPECT_EQ(run_cli("frobnicate"), 1);

    write(dir / "wild.ini", "[system]\nN = 3\na = 1\nb = 0\n[bath]\nGamma = 50\ngamma = 1\nkT = 1000\n"
                            "[run]\nt_max = 50\ndt = 0.05\n");
    EXPECT_EQ(run_cli("run --config " + (dir / "wild.ini").string() + " --out " + dir.string()), 2);

    write(dir / "partial.ini", std::string(kSmall) + "[sweep]\nparam = gamma\nvalues = 1,-1\n");
    EXPECT_EQ(run_cli("sweep --config " + (dir / "partial.ini").string() + " --out " + dir.string()), 3);
    EXPECT_TRUE(fs::exists(dir / "run_long.csv"));
    EXPECT_TRUE(fs::exists(dir / "run_summary.csv"));

    write(dir / "allbad.ini", std::string(kSmall) + "[sweep]\nparam = gamma\nvalues = -1,-2\n");
    EXPECT_EQ(run_cli("sweep --config " + (dir / "allbad.ini").string() + " --out " + dir.string()), 1);

    EXPECT_EQ(run_cli("plots --out " + (dir / "figs").string()), 0);
}
