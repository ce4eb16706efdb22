// config.hpp — experiment and sweep configuration: key=value files with
// sections, JSON input, LMGSQ_ environment overrides

#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmgsq/bath.hpp"
#include "lmgsq/errors.hpp"
#include "lmgsq/master.hpp"
#include "lmgsq/spin_algebra.hpp"

namespace lmgsq {

inline constexpr const char* kCodeVersion = "0.3.1";

/// Flat "section.key" -> raw value map.
using KeyMap = std::map<std::string, std::string>;

/// Canonical number text: 17 significant digits, round-trips exactly.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(trim(cur));
    return out;
}

inline double to_double(const std::string& field, const std::string& v) {
    const std::string t = trim(v);
    char* end = nullptr;
    const double x = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size()) throw ConfigError(field, "expected a number, got '" + v + "'");
    return x;
}

inline long long to_integer(const std::string& field, const std::string& v) {
    const std::string t = trim(v);
    long long x = 0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), x);
    if (t.empty() || r.ec != std::errc{} || r.ptr != t.data() + t.size()) {
        throw ConfigError(field, "expected an integer, got '" + v + "'");
    }
    return x;
}

inline std::uint64_t to_u64(const std::string& field, const std::string& v) {
    const std::string t = trim(v);
    std::uint64_t x = 0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), x);
    if (t.empty() || r.ec != std::errc{} || r.ptr != t.data() + t.size()) {
        throw ConfigError(field, "expected an unsigned 64-bit integer, got '" + v + "'");
    }
    return x;
}

} // namespace detail

/// Parses key=value text. "[section]" lines set the prefix; '#' and ';' start
/// comments; a key may also carry its section inline ("bath.gamma = 1").
inline KeyMap parse_key_value(const std::string& text) {
    KeyMap out;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno), "unterminated section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno), "expected key = value");
        std::string key = detail::trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno), "empty key");
        if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
        out[key] = detail::trim(line.substr(eq + 1));
    }
    return out;
}

/// Flattens a JSON object into the same key space. Arrays become comma lists.
inline KeyMap parse_json_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("json", e.what());
    }
    if (!j.is_object()) throw ConfigError("json", "top level must be an object");
    KeyMap out;
    auto scalar = [](const std::string& key, const nlohmann::json& v) -> std::string {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_number_float()) return format_double(v.get<double>());
        if (v.is_number() || v.is_boolean()) return v.dump();
        throw ConfigError(key, "unsupported JSON value");
    };
    auto walk = [&](auto&& self, const nlohmann::json& node, const std::string& prefix) -> void {
        for (auto it = node.begin(); it != node.end(); ++it) {
            const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
            if (it->is_object()) {
                self(self, *it, key);
            } else if (it->is_array()) {
                std::string joined;
                for (std::size_t k = 0; k < it->size(); ++k) {
                    if (k) joined += ",";
                    joined += scalar(key, (*it)[k]);
                }
                out[key] = joined;
            } else {
                out[key] = scalar(key, *it);
            }
        }
    };
    walk(walk, j, "");
    return out;
}

/// Environment variable overriding key "section.name": LMGSQ_SECTION_name
/// (section upper-cased, name verbatim, so Gamma and gamma stay distinct).
inline std::string env_name(const std::string& key) {
    std::string out = "LMGSQ_";
    const auto dot = key.find('.');
    const std::string section = dot == std::string::npos ? std::string{} : key.substr(0, dot);
    const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
    for (char c : section) out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (!section.empty()) out += "_";
    return out + name;
}

enum class Mode { master, oracle, markov, coefficients };

inline std::string to_string(Mode m) {
    switch (m) {
    case Mode::master: return "master";
    case Mode::oracle: return "oracle";
    case Mode::markov: return "markov";
    case Mode::coefficients: return "coefficients";
    }
    return "master";
}

struct InitialState {
    double theta = std::numbers::pi / 2;
    double phi = 0.0;
    /// Explicit Dicke amplitudes (descending m); overrides theta/phi when non-empty.
    std::vector<cplx> amplitudes;
};

struct ExperimentConfig {
    int N = 20;
    std::optional<double> a, b, lambda, h;
    double Gamma = 0.01;
    double gamma = 1.0;
    double kT = 10.0;
    std::optional<double> t_max;
    double Jt_max = 5.0;
    std::optional<double> dt;
    std::optional<int> sample_stride;
    InitialState initial;
    Mode mode = Mode::master;
    std::uint64_t seed = 0;
    int realizations = 1000;
    unsigned threads = 1;
    NoisePairing pairing = NoisePairing::unravelling;
    std::string output = "run.csv";

    BathParams bath() const { return {Gamma, gamma, kT}; }

    EffectiveHamiltonian hamiltonian() const {
        if (a && b) return {*a, *b};
        return lmg_reduction(*lambda, *h, N);
    }

    double resolved_t_max() const { return t_max ? *t_max : Jt_max / (0.5 * N); }

    /// 1e-3 / max(|a| + |b| N, gamma, 1) unless set.
    double resolved_dt() const {
        if (dt) return *dt;
        const EffectiveHamiltonian H = hamiltonian();
        const double scale = std::max({std::abs(H.a) + std::abs(H.b) * N, gamma, 1.0});
        return 1e-3 / scale;
    }

    /// About 1000 samples per run unless set.
    int resolved_stride() const {
        if (sample_stride) return *sample_stride;
        const int steps = step_count(resolved_dt(), resolved_t_max());
        return std::max(1, steps / 1000);
    }

    void validate() const {
        if (N < 1) throw ConfigError("system.N", "must be >= 1");
        const bool ab = a.has_value() || b.has_value();
        const bool lh = lambda.has_value() || h.has_value();
        if (ab && lh) throw ConfigError("system.a", "give either (a, b) or (lambda, h), not both");
        if (ab && !(a && b)) throw ConfigError(a ? "system.b" : "system.a", "a and b must be given together");
        if (lh && !(lambda && h)) {
            throw ConfigError(lambda ? "system.h" : "system.lambda", "lambda and h must be given together");
        }
        if (!ab && !lh) throw ConfigError("system.a", "one of (a, b) or (lambda, h) is required");
        auto finite = [](const char* field, double v) {
            if (!std::isfinite(v)) throw ConfigError(field, "must be finite");
        };
        if (a) finite("system.a", *a);
        if (b) finite("system.b", *b);
        if (lambda) finite("system.lambda", *lambda);
        if (h) finite("system.h", *h);
        if (!(Gamma >= 0.0) || !std::isfinite(Gamma)) throw ConfigError("bath.Gamma", "must be >= 0");
        if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("bath.gamma", "must be > 0");
        if (!(kT >= 0.0) || !std::isfinite(kT)) throw ConfigError("bath.kT", "must be >= 0");
        if (t_max && !(*t_max > 0.0)) throw ConfigError("run.t_max", "must be > 0");
        if (!(Jt_max > 0.0)) throw ConfigError("run.Jt_max", "must be > 0");
        if (dt && !(*dt > 0.0)) throw ConfigError("run.dt", "must be > 0");
        if (!(resolved_t_max() >= resolved_dt())) throw ConfigError("run.t_max", "must be >= dt");
        if (sample_stride && *sample_stride < 1) throw ConfigError("run.sample_stride", "must be >= 1");
        if (realizations < 1) throw ConfigError("oracle.realizations", "must be >= 1");
        if (mode == Mode::oracle && realizations < 100) {
            throw ConfigError("oracle.realizations", "the oracle needs >= 100 realizations");
        }
        if (!initial.amplitudes.empty() && static_cast<int>(initial.amplitudes.size()) != N + 1) {
            throw ConfigError("initial.amplitudes", "needs N+1 = " + std::to_string(N + 1) + " entries");
        }
        if (output.empty()) throw ConfigError("output.file", "must not be empty");
    }
};

inline const std::vector<std::string>& experiment_keys() {
    static const std::vector<std::string> keys{
        "system.N",         "system.a",        "system.b",      "system.lambda",      "system.h",
        "bath.Gamma",       "bath.gamma",      "bath.kT",       "run.mode",           "run.t_max",
        "run.Jt_max",       "run.dt",          "run.sample_stride", "run.seed",        "run.threads",
        "initial.theta",    "initial.phi",     "initial.amplitudes", "oracle.realizations", "oracle.pairing",
        "output.file"};
    return keys;
}

inline const std::vector<std::string>& sweep_keys() {
    static const std::vector<std::string> keys{"sweep.param", "sweep.values", "sweep.range", "sweep.param2",
                                               "sweep.values2", "sweep.range2", "sweep.cap", "sweep.threads"};
    return keys;
}

/// Overrides from the environment for every known key.
inline void apply_env_overrides(KeyMap& keys) {
    auto apply = [&](const std::vector<std::string>& names) {
        for (const auto& k : names) {
            if (const char* v = std::getenv(env_name(k).c_str())) keys[k] = v;
        }
    };
    apply(experiment_keys());
    apply(sweep_keys());
}

namespace detail {

/// "re" or "re+imj" style entries separated by commas; "re:im" also accepted.
inline std::vector<cplx> parse_amplitudes(const std::string& v) {
    std::vector<cplx> out;
    for (const auto& item : split(v, ',')) {
        if (item.empty()) continue;
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            out.emplace_back(to_double("initial.amplitudes", item), 0.0);
        } else {
            out.emplace_back(to_double("initial.amplitudes", item.substr(0, colon)),
                             to_double("initial.amplitudes", item.substr(colon + 1)));
        }
    }
    return out;
}

} // namespace detail

inline ExperimentConfig experiment_from_keys(const KeyMap& keys) {
    ExperimentConfig c;
    for (const auto& [k, v] : keys) {
        const auto& known = experiment_keys();
        const auto& sk = sweep_keys();
        if (std::find(known.begin(), known.end(), k) == known.end() && std::find(sk.begin(), sk.end(), k) == sk.end()) {
            throw ConfigError(k, "unknown configuration key");
        }
    }
    auto get = [&](const std::string& k) -> std::optional<std::string> {
        const auto it = keys.find(k);
        if (it == keys.end() || detail::trim(it->second).empty()) return std::nullopt;
        return it->second;
    };
    if (auto v = get("system.N")) c.N = static_cast<int>(detail::to_integer("system.N", *v));
    if (auto v = get("system.a")) c.a = detail::to_double("system.a", *v);
    if (auto v = get("system.b")) c.b = detail::to_double("system.b", *v);
    if (auto v = get("system.lambda")) c.lambda = detail::to_double("system.lambda", *v);
    if (auto v = get("system.h")) c.h = detail::to_double("system.h", *v);
    if (auto v = get("bath.Gamma")) c.Gamma = detail::to_double("bath.Gamma", *v);
    if (auto v = get("bath.gamma")) c.gamma = detail::to_double("bath.gamma", *v);
    if (auto v = get("bath.kT")) c.kT = detail::to_double("bath.kT", *v);
    if (auto v = get("run.mode")) {
        const std::string m = detail::trim(*v);
        if (m == "master") c.mode = Mode::master;
        else if (m == "oracle") c.mode = Mode::oracle;
        else if (m == "markov") c.mode = Mode::markov;
        else if (m == "coefficients") c.mode = Mode::coefficients;
        else throw ConfigError("run.mode", "expected master | oracle | markov | coefficients, got '" + m + "'");
    }
    if (auto v = get("run.t_max")) c.t_max = detail::to_double("run.t_max", *v);
    if (auto v = get("run.Jt_max")) c.Jt_max = detail::to_double("run.Jt_max", *v);
    if (auto v = get("run.dt")) c.dt = detail::to_double("run.dt", *v);
    if (auto v = get("run.sample_stride")) {
        c.sample_stride = static_cast<int>(detail::to_integer("run.sample_stride", *v));
    }
    if (auto v = get("run.seed")) c.seed = detail::to_u64("run.seed", *v);
    if (auto v = get("run.threads")) {
        const long long t = detail::to_integer("run.threads", *v);
        if (t < 0) throw ConfigError("run.threads", "must be >= 0 (0 = all cores)");
        c.threads = t == 0 ? default_thread_count() : static_cast<unsigned>(t);
    }
    if (auto v = get("initial.theta")) c.initial.theta = detail::to_double("initial.theta", *v);
    if (auto v = get("initial.phi")) c.initial.phi = detail::to_double("initial.phi", *v);
    if (auto v = get("initial.amplitudes")) c.initial.amplitudes = detail::parse_amplitudes(*v);
    if (auto v = get("oracle.realizations")) {
        c.realizations = static_cast<int>(detail::to_integer("oracle.realizations", *v));
    }
    if (auto v = get("oracle.pairing")) {
        const std::string p = detail::trim(*v);
        if (p == "unravelling") c.pairing = NoisePairing::unravelling;
        else if (p == "literal") c.pairing = NoisePairing::literal;
        else throw ConfigError("oracle.pairing", "expected unravelling | literal, got '" + p + "'");
    }
    if (auto v = get("output.file")) c.output = detail::trim(*v);
    c.validate();
    return c;
}

/// Canonical echo with every derived quantity resolved, so that feeding it
/// back reproduces the run exactly.
inline KeyMap experiment_to_keys(const ExperimentConfig& c) {
    KeyMap k;
    k["system.N"] = std::to_string(c.N);
    if (c.a) k["system.a"] = format_double(*c.a);
    if (c.b) k["system.b"] = format_double(*c.b);
    if (c.lambda) k["system.lambda"] = format_double(*c.lambda);
    if (c.h) k["system.h"] = format_double(*c.h);
    k["bath.Gamma"] = format_double(c.Gamma);
    k["bath.gamma"] = format_double(c.gamma);
    k["bath.kT"] = format_double(c.kT);
    k["run.mode"] = to_string(c.mode);
    k["run.t_max"] = format_double(c.resolved_t_max());
    k["run.dt"] = format_double(c.resolved_dt());
    k["run.sample_stride"] = std::to_string(c.resolved_stride());
    k["run.seed"] = std::to_string(c.seed);
    k["run.threads"] = std::to_string(c.threads);
    if (c.initial.amplitudes.empty()) {
        k["initial.theta"] = format_double(c.initial.theta);
        k["initial.phi"] = format_double(c.initial.phi);
    } else {
        std::string s;
        for (std::size_t i = 0; i < c.initial.amplitudes.size(); ++i) {
            if (i) s += ",";
            s += format_double(c.initial.amplitudes[i].real()) + ":" + format_double(c.initial.amplitudes[i].imag());
        }
        k["initial.amplitudes"] = s;
    }
    k["oracle.realizations"] = std::to_string(c.realizations);
    k["oracle.pairing"] = c.pairing == NoisePairing::unravelling ? "unravelling" : "literal";
    k["output.file"] = c.output;
    return k;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Reads a config file; JSON when the extension is .json or the text starts with '{'.
inline KeyMap load_keys(const std::string& path) {
    const std::string text = read_text_file(path);
    const std::string t = detail::trim(text);
    const bool json = (path.size() >= 5 && path.substr(path.size() - 5) == ".json") || (!t.empty() && t.front() == '{');
    return json ? parse_json_config(text) : parse_key_value(text);
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepAxis {
    std::string param;
    std::vector<double> values;
};

struct SweepConfig {
    ExperimentConfig base;
    std::vector<SweepAxis> axes;  // one or two
    std::size_t cap = 10000;
    unsigned threads = 1;

    std::size_t run_count() const {
        std::size_t n = 1;
        for (const auto& a : axes) n *= a.values.size();
        return n;
    }
};

inline const std::vector<std::string>& sweepable_params() {
    static const std::vector<std::string> p{"N",      "a",      "b",      "Gamma",  "gamma", "kT",
                                            "a_over_b", "b_over_a", "lambda", "h",     "theta", "phi"};
    return p;
}

/// Sets one swept parameter. Ratios keep the other coefficient: a_over_b sets
/// a = v b, b_over_a sets b = v a.
inline void apply_sweep_value(ExperimentConfig& c, const std::string& param, double v) {
    if (param == "N") {
        if (v != std::floor(v) || v < 1) throw ConfigError("sweep.values", "N must be a positive integer");
        c.N = static_cast<int>(v);
    } else if (param == "a") {
        c.a = v;
    } else if (param == "b") {
        c.b = v;
    } else if (param == "Gamma") {
        c.Gamma = v;
    } else if (param == "gamma") {
        c.gamma = v;
    } else if (param == "kT") {
        c.kT = v;
    } else if (param == "a_over_b") {
        if (!c.b) throw ConfigError("sweep.param", "a_over_b needs system.b");
        c.a = v * *c.b;
    } else if (param == "b_over_a") {
        if (!c.a) throw ConfigError("sweep.param", "b_over_a needs system.a");
        c.b = v * *c.a;
    } else if (param == "lambda") {
        c.lambda = v;
    } else if (param == "h") {
        c.h = v;
    } else if (param == "theta") {
        c.initial.theta = v;
    } else if (param == "phi") {
        c.initial.phi = v;
    } else {
        throw ConfigError("sweep.param", "cannot sweep '" + param + "'");
    }
}

namespace detail {

/// "start:stop:step", inclusive of stop up to round-off.
inline std::vector<double> parse_range(const std::string& field, const std::string& v) {
    const auto parts = split(v, ':');
    if (parts.size() != 3) throw ConfigError(field, "expected start:stop:step");
    const double start = to_double(field, parts[0]);
    const double stop = to_double(field, parts[1]);
    const double step = to_double(field, parts[2]);
    if (!(step > 0.0)) throw ConfigError(field, "step must be > 0");
    if (stop < start) throw ConfigError(field, "stop must be >= start");
    const long long n = std::llround(std::floor((stop - start) / step + 1e-9)) + 1;
    if (n > 10'000'000) throw ConfigError(field, "range has too many points");
    std::vector<double> out;
    for (long long k = 0; k < n; ++k) out.push_back(start + k * step);
    return out;
}

inline std::optional<SweepAxis> axis_from_keys(const KeyMap& keys, const std::string& suffix) {
    auto get = [&](const std::string& k) -> std::optional<std::string> {
        const auto it = keys.find(k);
        if (it == keys.end() || trim(it->second).empty()) return std::nullopt;
        return it->second;
    };
    const auto param = get("sweep.param" + suffix);
    const auto values = get("sweep.values" + suffix);
    const auto range = get("sweep.range" + suffix);
    if (!param) {
        if (values || range) throw ConfigError("sweep.param" + suffix, "values given without a parameter");
        return std::nullopt;
    }
    const auto& ok = sweepable_params();
    if (std::find(ok.begin(), ok.end(), trim(*param)) == ok.end()) {
        throw ConfigError("sweep.param" + suffix, "cannot sweep '" + *param + "'");
    }
    if (values.has_value() == range.has_value()) {
        throw ConfigError("sweep.values" + suffix, "give exactly one of values or range");
    }
    SweepAxis a;
    a.param = trim(*param);
    if (values) {
        for (const auto& s : split(*values, ',')) {
            if (!s.empty()) a.values.push_back(to_double("sweep.values" + suffix, s));
        }
    } else {
        a.values = parse_range("sweep.range" + suffix, *range);
    }
    if (a.values.empty()) throw ConfigError("sweep.values" + suffix, "no values");
    return a;
}

} // namespace detail

inline SweepConfig sweep_from_keys(const KeyMap& keys) {
    SweepConfig s;
    s.base = experiment_from_keys(keys);
    if (auto a = detail::axis_from_keys(keys, "")) s.axes.push_back(*a);
    else throw ConfigError("sweep.param", "a sweep needs at least one parameter");
    if (auto a = detail::axis_from_keys(keys, "2")) {
        if (a->param == s.axes[0].param) throw ConfigError("sweep.param2", "must differ from sweep.param");
        s.axes.push_back(*a);
    }
    if (auto it = keys.find("sweep.cap"); it != keys.end()) {
        const long long cap = detail::to_integer("sweep.cap", it->second);
        if (cap < 1) throw ConfigError("sweep.cap", "must be >= 1");
        s.cap = static_cast<std::size_t>(cap);
    }
    if (auto it = keys.find("sweep.threads"); it != keys.end()) {
        const long long t = detail::to_integer("sweep.threads", it->second);
        if (t < 0) throw ConfigError("sweep.threads", "must be >= 0 (0 = all cores)");
        s.threads = t == 0 ? default_thread_count() : static_cast<unsigned>(t);
    }
    if (s.run_count() > s.cap) {
        throw ConfigError("sweep.cap", "sweep has " + std::to_string(s.run_count()) + " runs, cap is " +
                                           std::to_string(s.cap));
    }
    return s;
}

} // namespace lmgsq
