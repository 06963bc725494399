#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "decoh/error.hpp"
#include "decoh/estimation.hpp"
#include "decoh/model.hpp"
#include "decoh/oracle.hpp"

namespace decoh {

inline constexpr std::string_view toolkit_name = "decoh";
inline constexpr std::string_view toolkit_version = "0.1.0";

enum class SweepDesign {
    cross, ///< N-grid at `rho` plus rho-grid at `n`, per dimension
    grid,  ///< full product n_list x rho_list x d_list
};

/// Everything a run needs. The thread count is deliberately absent: outputs
/// never depend on it.
struct RunConfig {
    SystemConfig system{.n_particles = 10, .seed = 1};
    SamplingConfig sampling;
    std::size_t members = 100;
    std::size_t samples = 100;
    std::vector<std::size_t> n_list;
    std::vector<double> rho_list;
    std::vector<int> d_list;
    SweepDesign sweep_design = SweepDesign::cross;
    std::string out = ".";
    std::string input;
    bool per_particle = false;
    bool entropy = false;
    std::size_t oracle_cap = oracle::default_particle_cap;
    std::size_t oracle_times = 20;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// ---------------------------------------------------------------------------
// Number formatting shared by config rendering and CSV output.

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline bool parse_bool(std::string_view s, bool& out) {
    if (s == "true" || s == "yes" || s == "1" || s == "on") {
        out = true;
        return true;
    }
    if (s == "false" || s == "no" || s == "0" || s == "off") {
        out = false;
        return true;
    }
    return false;
}

template <typename T>
std::string join(const std::vector<T>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        if constexpr (std::is_floating_point_v<T>)
            s += format_double(v[i]);
        else
            s += std::to_string(v[i]);
    }
    return s;
}

} // namespace detail

inline void validate(const RunConfig& cfg) {
    try {
        validate(cfg.system);
    } catch (const DomainError& e) {
        throw ValidationError(e.what());
    }
    validate(cfg.sampling);
    if (cfg.members < 1) throw ValidationError("u >= 1 violated");
    if (cfg.samples < 1) throw ValidationError("samples >= 1 violated");
    if (!(cfg.sampling.window.tau_multiple > 0.0)) throw ValidationError("fit_tau_multiple > 0 violated");
    if (!(cfg.sampling.window.max_end > 0.0)) throw ValidationError("fit_max_end > 0 violated");
    if (cfg.sampling.window.fixed_end < 0.0) throw ValidationError("fit_window >= 0 violated");
    for (auto n : cfg.n_list)
        if (n < 1) throw ValidationError("n_list entries >= 1 violated");
    for (double r : cfg.rho_list)
        if (!(r > 0.0)) throw ValidationError("rho_list entries > 0 violated");
    for (int d : cfg.d_list)
        if (d < 1 || d > 3) throw ValidationError("d_list entries in {1,2,3} violated");
    if (cfg.oracle_cap < 1 || cfg.oracle_cap > 24) throw ValidationError("oracle_cap in [1, 24] violated");
    if (cfg.oracle_times < 1) throw ValidationError("oracle_times >= 1 violated");
    for (const auto* path : {&cfg.out, &cfg.input})
        if (path->find_first_of("#\n\r") != std::string::npos)
            throw ValidationError("paths may not contain '#' or line breaks");
    if (cfg.out.empty()) throw ValidationError("out must be non-empty");
}

/// Line-oriented `key = value` text. `#` starts a comment, lists are comma
/// separated, unknown or repeated keys are rejected. Missing keys keep their
/// defaults. The result is validated.
inline RunConfig parse_config(std::string_view text) {
    RunConfig cfg;
    std::set<std::string, std::less<>> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? eol : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, "expected `key = value`");
        const std::string_view key = detail::trim(line.substr(0, eq));
        const std::string_view value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError(line_no, "missing key");
        if (!seen.insert(std::string(key)).second)
            throw ParseError(line_no, "duplicate key '" + std::string(key) + "'");

        auto bad = [&] { return ParseError(line_no, "invalid value '" + std::string(value) + "' for '" + std::string(key) + "'"); };
        auto num = [&](auto& target) {
            if (!detail::parse_number(value, target)) throw bad();
        };
        auto list = [&](auto& target) {
            target.clear();
            if (value.empty()) return;
            for (auto item : detail::split(value, ',')) {
                typename std::decay_t<decltype(target)>::value_type v{};
                if (!detail::parse_number(item, v)) throw bad();
                target.push_back(v);
            }
        };
        auto flag = [&](bool& target) {
            if (!detail::parse_bool(value, target)) throw bad();
        };

        if (key == "n") num(cfg.system.n_particles);
        else if (key == "d") num(cfg.system.dimension);
        else if (key == "rho") num(cfg.system.density);
        else if (key == "eta") num(cfg.system.eta);
        else if (key == "epsilon") num(cfg.system.epsilon);
        else if (key == "seed") num(cfg.system.seed);
        else if (key == "amplitudes") {
            if (value == "equal") cfg.system.amplitude_mode = AmplitudeMode::equal_superposition;
            else if (value == "random") cfg.system.amplitude_mode = AmplitudeMode::random_complex;
            else throw bad();
        } else if (key == "couplings") {
            if (value == "potential") cfg.system.coupling_mode = CouplingMode::potential;
            else if (value == "uniform") cfg.system.coupling_mode = CouplingMode::uniform_random;
            else throw bad();
        }
        else if (key == "dt") num(cfg.sampling.dt);
        else if (key == "tmax") num(cfg.sampling.t_max);
        else if (key == "t1") num(cfg.sampling.t1);
        else if (key == "t2") num(cfg.sampling.t2);
        else if (key == "fit_window") {
            if (value == "auto") cfg.sampling.window.fixed_end = 0.0;
            else num(cfg.sampling.window.fixed_end);
        }
        else if (key == "fit_tau_multiple") num(cfg.sampling.window.tau_multiple);
        else if (key == "fit_max_end") num(cfg.sampling.window.max_end);
        else if (key == "u") num(cfg.members);
        else if (key == "samples") num(cfg.samples);
        else if (key == "n_list") list(cfg.n_list);
        else if (key == "rho_list") list(cfg.rho_list);
        else if (key == "d_list") list(cfg.d_list);
        else if (key == "sweep_design") {
            if (value == "cross") cfg.sweep_design = SweepDesign::cross;
            else if (value == "grid") cfg.sweep_design = SweepDesign::grid;
            else throw bad();
        }
        else if (key == "out") cfg.out = std::string(value);
        else if (key == "input") cfg.input = std::string(value);
        else if (key == "per_particle") flag(cfg.per_particle);
        else if (key == "entropy") flag(cfg.entropy);
        else if (key == "oracle_cap") num(cfg.oracle_cap);
        else if (key == "oracle_times") num(cfg.oracle_times);
        else throw ParseError(line_no, "unknown key '" + std::string(key) + "'");
    }
    validate(cfg);
    return cfg;
}

/// Canonical text form; parse_config(render_config(c)) == c.
inline std::string render_config(const RunConfig& cfg) {
    std::ostringstream os;
    const auto& s = cfg.system;
    const auto& w = cfg.sampling.window;
    os << "n = " << s.n_particles << '\n'
       << "d = " << s.dimension << '\n'
       << "rho = " << format_double(s.density) << '\n'
       << "eta = " << format_double(s.eta) << '\n'
       << "epsilon = " << format_double(s.epsilon) << '\n'
       << "amplitudes = " << to_string(s.amplitude_mode) << '\n'
       << "couplings = " << to_string(s.coupling_mode) << '\n'
       << "seed = " << s.seed << '\n'
       << "dt = " << format_double(cfg.sampling.dt) << '\n'
       << "tmax = " << format_double(cfg.sampling.t_max) << '\n'
       << "t1 = " << format_double(cfg.sampling.t1) << '\n'
       << "t2 = " << format_double(cfg.sampling.t2) << '\n'
       << "fit_window = " << (w.fixed_end > 0.0 ? format_double(w.fixed_end) : std::string("auto")) << '\n'
       << "fit_tau_multiple = " << format_double(w.tau_multiple) << '\n'
       << "fit_max_end = " << format_double(w.max_end) << '\n'
       << "u = " << cfg.members << '\n'
       << "samples = " << cfg.samples << '\n'
       << "n_list = " << detail::join(cfg.n_list) << '\n'
       << "rho_list = " << detail::join(cfg.rho_list) << '\n'
       << "d_list = " << detail::join(cfg.d_list) << '\n'
       << "sweep_design = " << (cfg.sweep_design == SweepDesign::cross ? "cross" : "grid") << '\n'
       << "out = " << cfg.out << '\n'
       << "input = " << cfg.input << '\n'
       << "per_particle = " << (cfg.per_particle ? "true" : "false") << '\n'
       << "entropy = " << (cfg.entropy ? "true" : "false") << '\n'
       << "oracle_cap = " << cfg.oracle_cap << '\n'
       << "oracle_times = " << cfg.oracle_times << '\n';
    return os.str();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Hash of the canonical rendering, ignoring the output location.
inline std::uint64_t config_hash(RunConfig cfg) {
    cfg.out = ".";
    return fnv1a(render_config(cfg));
}

} // namespace decoh
