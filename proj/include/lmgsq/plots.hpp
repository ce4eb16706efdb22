// plots.hpp — figure configs and matplotlib scripts that consume the CSV output

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lmgsq/csv.hpp"

namespace lmgsq {

struct PlotFile {
    std::string name;
    std::string content;
};

namespace detail {

inline const char* kPlotCommon = R"(import csv
import sys
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read(path):
    meta, rows, header = [], [], None
    with open(path) as f:
        for line in f:
            if line.startswith("#"):
                meta.append(line[1:].strip())
                continue
            cells = line.strip().split(",")
            if header is None:
                header = cells
            else:
                rows.append([float(c) for c in cells])
    return header, rows, meta


def by_run(path, param):
    header, rows, _ = read(path)
    col = {name: k for k, name in enumerate(header)}
    runs = defaultdict(lambda: {"Jt": [], "xi2": [], "value": None})
    for r in rows:
        run = runs[int(r[col["run"]])]
        run["value"] = r[col[param]]
        run["Jt"].append(r[col["Jt"]])
        run["xi2"].append(r[col["xi2"]])
    return [runs[k] for k in sorted(runs)]
)";

inline std::string line_plot(const std::string& stem, const std::string& param, const std::string& label,
                             const std::string& title) {
    return std::string(kPlotCommon) + R"(

STYLES = ["-", "--", ":", "-."]
COLORS = ["green", "red", "black", "blue"]

path = sys.argv[1] if len(sys.argv) > 1 else ")" +
           stem + R"(_long.csv"
fig, ax = plt.subplots(figsize=(5, 3.6))
for k, run in enumerate(by_run(path, ")" +
           param + R"(")):
    ax.plot(run["Jt"], run["xi2"], STYLES[k % 4], color=COLORS[k % 4], label=r")" + label +
           R"( = %g" % run["value"])
ax.set_xlabel("Jt")
ax.set_ylabel(r"$\xi^2$")
ax.set_ylim(0, 1.1)
ax.set_title(")" + title +
           R"(")
ax.legend()
fig.tight_layout()
fig.savefig(")" + stem +
           R"(.png", dpi=150)
)";
}

inline std::string heatmap(const std::string& stem, const std::string& param, const std::string& label) {
    return std::string(kPlotCommon) + R"(
import numpy as np

path = sys.argv[1] if len(sys.argv) > 1 else ")" +
           stem + R"(_long.csv"
runs = by_run(path, ")" + param + R"(")
ratios = np.array([r["value"] for r in runs])
jt = np.array(runs[0]["Jt"])
grid = np.array([np.interp(jt, r["Jt"], r["xi2"]) for r in runs])
fig, ax = plt.subplots(figsize=(5, 3.6))
mesh = ax.pcolormesh(jt, ratios, np.clip(grid, 0, 1.2), shading="auto", cmap="viridis")
fig.colorbar(mesh, ax=ax, label=r"$\xi^2$")
ax.set_xlabel("Jt")
ax.set_ylabel(r")" + label + R"(")
fig.tight_layout()
fig.savefig(")" + stem +
           R"(.png", dpi=150)
)";
}

inline const char* kCoefficientScript = R"(
path = sys.argv[1] if len(sys.argv) > 1 else "coefficients.csv"
header, rows, _ = read(path)
col = {name: k for k, name in enumerate(header)}
t = [r[col["t"]] for r in rows]
fig, ax = plt.subplots(figsize=(5, 3.6))
for name in ["F11", "F12", "F21", "F22"]:
    for part, style in (("re", "-"), ("im", "--")):
        key = name + "_" + part
        ax.plot(t, [r[col[key]] for r in rows], style, label="%s %s" % (part.capitalize(), name))
ax.set_xlabel("t")
ax.set_ylabel("F")
ax.legend(ncol=2, fontsize=7)
fig.tight_layout()
fig.savefig("coefficients.png", dpi=150)
)";

inline std::string base_config(const std::string& extra) {
    return "[system]\nN = 20\na = 1\nb = -1\n\n[bath]\nGamma = 0.01\nkT = 10\n" + extra;
}

} // namespace detail

/// Config files and plot scripts for every figure.
inline std::vector<PlotFile> plot_files() {
    using detail::base_config;
    std::vector<PlotFile> f;
    f.push_back({"coefficients.ini",
                 "[system]\nN = 10\na = 1\nb = -1\n\n[bath]\nGamma = 0.0001\ngamma = 5\nkT = 0.3\n\n"
                 "[run]\nmode = coefficients\nt_max = 2\ndt = 0.0005\nsample_stride = 4\n\n"
                 "[output]\nfile = coefficients.csv\n"});
    f.push_back({"coefficients.py", std::string(detail::kPlotCommon) + detail::kCoefficientScript});

    f.push_back({"gamma_sweep.ini", base_config("gamma = 1\n\n[run]\nJt_max = 5\n\n[sweep]\nparam = gamma\n"
                                          "values = 0.01, 0.1, 1, 10\n\n[output]\nfile = gamma_sweep.csv\n")});
    f.push_back({"gamma_sweep.py", detail::line_plot("gamma_sweep", "gamma", "$\\gamma$", "N=20, kT=10, Gamma=0.01")});

    f.push_back({"N_sweep.ini", base_config("gamma = 0.1\n\n[run]\nJt_max = 5\n\n[sweep]\nparam = N\n"
                                          "values = 5, 20, 50, 100\n\n[output]\nfile = N_sweep.csv\n")});
    f.push_back({"N_sweep.py", detail::line_plot("N_sweep", "N", "N", "gamma=0.1, kT=10, Gamma=0.01")});

    f.push_back({"Gamma_sweep.ini", base_config("gamma = 2\n\n[run]\nJt_max = 5\n\n[sweep]\nparam = Gamma\n"
                                          "values = 0.0001, 0.001, 0.01\n\n[output]\nfile = Gamma_sweep.csv\n")});
    f.push_back({"Gamma_sweep.py", detail::line_plot("Gamma_sweep", "Gamma", "$\\Gamma$", "gamma=2, kT=10, N=20")});

    f.push_back({"kT_sweep.ini", base_config("gamma = 2\n\n[run]\nJt_max = 5\n\n[sweep]\nparam = kT\n"
                                          "values = 1, 10, 100\n\n[output]\nfile = kT_sweep.csv\n")});
    f.push_back({"kT_sweep.py", detail::line_plot("kT_sweep", "kT", "kT", "gamma=2, Gamma=0.01, N=20")});

    f.push_back({"a_over_b.ini", base_config("gamma = 2\n\n[run]\nJt_max = 5\n\n[sweep]\nparam = a_over_b\n"
                                          "range = -2:2:0.05\n\n[output]\nfile = a_over_b.csv\n")});
    f.push_back({"a_over_b.py", detail::heatmap("a_over_b", "a_over_b", "a/b")});

    f.push_back({"b_over_a.ini", base_config("gamma = 2\n\n[run]\nJt_max = 5\n\n[sweep]\nparam = b_over_a\n"
                                          "range = -2:2:0.05\n\n[output]\nfile = b_over_a.csv\n")});
    f.push_back({"b_over_a.py", detail::heatmap("b_over_a", "b_over_a", "b/a")});

    f.push_back({"make_figures.sh",
                 "#!/bin/sh\n# usage: sh make_figures.sh PATH_TO_LMGSQ\nset -e\nBIN=${1:-lmgsq}\n"
                 "$BIN run --config coefficients.ini --out .\n"
                 "for f in gamma_sweep N_sweep Gamma_sweep kT_sweep a_over_b b_over_a; do $BIN sweep --config $f.ini --out .; done\n"
                 "for f in coefficients gamma_sweep N_sweep Gamma_sweep kT_sweep a_over_b b_over_a; do python3 $f.py; done\n"});
    return f;
}

inline std::vector<std::filesystem::path> emit_plot_scripts(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> written;
    for (const auto& f : plot_files()) {
        write_file_atomic(dir / f.name, f.content);
        written.push_back(dir / f.name);
    }
    return written;
}

} // namespace lmgsq
