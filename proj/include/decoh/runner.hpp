#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "decoh/config.hpp"
#include "decoh/dynamics.hpp"
#include "decoh/error.hpp"
#include "decoh/estimation.hpp"
#include "decoh/model.hpp"
#include "decoh/oracle.hpp"
#include "decoh/parallel.hpp"
#include "decoh/recurrence.hpp"

namespace decoh {

enum ExitCode : int {
    exit_success = 0,
    exit_usage = 1,
    exit_validation = 2,
    exit_numerical = 3,
};

inline const std::vector<std::string_view>& subcommands() {
    static const std::vector<std::string_view> names{"simulate", "ensemble", "sweep",
                                                     "fit-scaling", "recurrence", "oracle-check"};
    return names;
}

// ---------------------------------------------------------------------------
// CSV output

/// A CSV file with a `#` metadata preamble. The body is everything after the
/// preamble; it depends only on (config, seed).
class CsvTable {
public:
    CsvTable(std::string schema, std::vector<std::string> columns)
        : schema_(std::move(schema)), columns_(std::move(columns)) {}

    void meta(const std::string& key, const std::string& value) { meta_.emplace_back(key, value); }

    CsvTable& row() {
        rows_.emplace_back();
        return *this;
    }
    CsvTable& operator<<(double v) { return cell(format_double(v)); }
    CsvTable& operator<<(std::optional<double> v) { return cell(v ? format_double(*v) : std::string("nan")); }
    CsvTable& operator<<(std::size_t v) { return cell(std::to_string(v)); }
    CsvTable& operator<<(int v) { return cell(std::to_string(v)); }
    CsvTable& operator<<(bool v) { return cell(v ? "1" : "0"); }
    CsvTable& seed(std::uint64_t v) { return cell(std::to_string(v)); }
    CsvTable& text(std::string v) { return cell(std::move(v)); }

    std::string body() const {
        std::string s;
        for (std::size_t i = 0; i < columns_.size(); ++i) s += (i ? "," : "") + columns_[i];
        s += '\n';
        for (const auto& r : rows_) {
            if (r.size() != columns_.size())
                throw Error("CsvTable: row width " + std::to_string(r.size()) + " != " +
                            std::to_string(columns_.size()) + " in " + schema_);
            for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + r[i];
            s += '\n';
        }
        return s;
    }

    std::string render(const RunConfig& cfg, std::string_view command) const {
        std::ostringstream os;
        os << "# " << toolkit_name << ' ' << toolkit_version << '\n'
           << "# schema: " << schema_ << '\n'
           << "# command: " << command << '\n'
           << "# config_hash: " << format_hex64(config_hash(cfg)) << '\n'
           << "# master_seed: " << cfg.system.seed << '\n';
        for (const auto& [k, v] : meta_) os << "# " << k << ": " << v << '\n';
        std::istringstream lines(render_config(cfg));
        for (std::string line; std::getline(lines, line);) os << "# config: " << line << '\n';
        os << body();
        return os.str();
    }

private:
    CsvTable& cell(std::string v) {
        if (rows_.empty()) throw Error("CsvTable: value written before row()");
        rows_.back().push_back(std::move(v));
        return *this;
    }

    std::string schema_;
    std::vector<std::string> columns_;
    std::vector<std::pair<std::string, std::string>> meta_;
    std::vector<std::vector<std::string>> rows_;
};

/// Strips the `#` preamble, leaving header row and data.
inline std::string csv_body(std::string_view file_text) {
    std::string out;
    std::size_t pos = 0;
    while (pos < file_text.size()) {
        auto eol = file_text.find('\n', pos);
        if (eol == std::string_view::npos) eol = file_text.size();
        const auto line = file_text.substr(pos, eol - pos);
        if (line.empty() || line.front() != '#') {
            out.append(line);
            out += '\n';
        }
        pos = eol + 1;
    }
    return out;
}

/// Rows of a CSV file keyed by header name, skipping the preamble.
inline std::vector<std::map<std::string, std::string>> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read " + path.string());
    std::vector<std::string> header;
    std::vector<std::map<std::string, std::string>> rows;
    for (std::string line; std::getline(in, line);) {
        if (line.empty() || line.front() == '#') continue;
        auto parts = detail::split(line, ',');
        if (header.empty()) {
            for (auto p : parts) header.emplace_back(p);
            continue;
        }
        if (parts.size() != header.size())
            throw ValidationError(path.string() + ": row width does not match header");
        auto& row = rows.emplace_back();
        for (std::size_t i = 0; i < parts.size(); ++i) row[header[i]] = std::string(parts[i]);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Orchestration

struct RunOptions {
    unsigned threads = 1;
    std::ostream* log = nullptr;
};

/// Files of one run. Each is written to a temporary name and renamed once
/// complete; a failed run leaves a PARTIAL marker listing what was finished.
class OutputDir {
public:
    OutputDir(const RunConfig& cfg, std::string_view command) : cfg_(cfg), command_(command) {
        dir_ = cfg.out;
        std::filesystem::create_directories(dir_);
        std::filesystem::remove(dir_ / "PARTIAL");
    }

    std::filesystem::path write(const std::string& name, const std::string& contents) {
        const auto final_path = dir_ / name;
        const auto tmp = dir_ / (name + ".tmp");
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw Error("cannot write " + tmp.string());
            out << contents;
            if (!out) throw Error("write failed for " + tmp.string());
        }
        std::filesystem::rename(tmp, final_path);
        written_.push_back(name);
        return final_path;
    }

    std::filesystem::path write(const std::string& name, const CsvTable& table) {
        return write(name, table.render(cfg_, command_));
    }

    void mark_partial(const std::string& reason) const {
        std::ofstream out(dir_ / "PARTIAL", std::ios::trunc);
        out << "# run failed: " << reason << '\n';
        for (const auto& w : written_) out << w << '\n';
    }

    const std::filesystem::path& path() const { return dir_; }

private:
    const RunConfig& cfg_;
    std::string command_;
    std::filesystem::path dir_;
    std::vector<std::string> written_;
};

namespace detail {

inline void log_line(const RunOptions& opt, const std::string& msg) {
    if (opt.log) *opt.log << msg << '\n';
}

inline std::vector<SystemConfig> sweep_cells(const RunConfig& cfg) {
    const auto ns = cfg.n_list.empty() ? std::vector<std::size_t>{cfg.system.n_particles} : cfg.n_list;
    const auto rhos = cfg.rho_list.empty() ? std::vector<double>{cfg.system.density} : cfg.rho_list;
    const auto ds = cfg.d_list.empty() ? std::vector<int>{cfg.system.dimension} : cfg.d_list;
    std::vector<SystemConfig> cells;
    auto add = [&](std::size_t n, double rho, int d) {
        SystemConfig c = cfg.system;
        c.n_particles = n;
        c.density = rho;
        c.dimension = d;
        for (const auto& existing : cells)
            if (existing.n_particles == n && existing.density == rho && existing.dimension == d) return;
        cells.push_back(c);
    };
    for (int d : ds) {
        if (cfg.sweep_design == SweepDesign::grid) {
            for (auto n : ns)
                for (double rho : rhos) add(n, rho, d);
        } else {
            for (auto n : ns) add(n, cfg.system.density, d);
            for (double rho : rhos) add(cfg.system.n_particles, rho, d);
        }
    }
    return cells;
}

inline CsvTable stats_table() {
    return CsvTable("ensemble_stats v1",
                    {"cell", "n", "d", "rho", "eta", "epsilon", "u", "cell_seed", "tau_mean_gt", "tau_sd_gt",
                     "level_mean", "level_sd", "non_converged"});
}

inline void stats_row(CsvTable& t, std::size_t cell, const EnsembleStats& st) {
    t.row() << cell << st.cell.n_particles << st.cell.dimension << st.cell.density << st.cell.eta
            << st.cell.epsilon << st.members;
    t.seed(st.master_seed) << st.tau_mean << st.tau_sd << st.level_mean << st.level_sd << st.non_converged;
}

inline void describe_fit_window(CsvTable& t, const SamplingConfig& s) {
    t.meta("fit_window", s.window.fixed_end > 0.0
                             ? "[0, " + format_double(s.window.fixed_end) + "]"
                             : "[0, min(" + format_double(s.window.tau_multiple) + " * tau0, " +
                                   format_double(s.window.max_end) + ")]");
    t.meta("average_window", "[" + format_double(s.t1) + ", " + format_double(s.t2) + "]");
    t.meta("deviations", "population standard deviation over members");
}

} // namespace detail

// --- simulate -------------------------------------------------------------

inline void run_simulate(const RunConfig& cfg, const RunOptions& opt, OutputDir& out) {
    const SpinSystem sys = build_system(cfg.system);
    const Trajectory traj = sample_trajectory(sys, cfg.sampling.dt, cfg.sampling.n_samples(),
                                              {cfg.per_particle, cfg.entropy}, opt.threads);
    std::vector<std::string> cols{"t", "xi"};
    if (cfg.per_particle)
        for (std::size_t l = 1; l <= sys.size(); ++l) cols.push_back("z_" + std::to_string(l));
    if (cfg.entropy) cols.push_back("s_tot");
    CsvTable t("trajectory v1", cols);
    t.meta("units", "t=gt z_l=|z_l| s_tot=nats");
    t.meta("xi_initial", format_double(sys.initial_coherence()));
    for (std::size_t i = 0; i < traj.size(); ++i) {
        t.row() << traj.time(i) << traj.xi[i];
        if (cfg.per_particle)
            for (std::size_t l = 0; l < sys.size(); ++l) t << traj.modulus(i, l);
        if (cfg.entropy) t << traj.entropy[i];
    }
    out.write("trajectory.csv", t);

    CsvTable g("couplings v1", {"i", "j", "g_ij", "distance"});
    g.meta("units", "g_ij=1/gt distance=box units");
    for (std::size_t i = 0; i < sys.size(); ++i)
        for (std::size_t j = i + 1; j < sys.size(); ++j)
            g.row() << i + 1 << j + 1 << sys.couplings(i, j)
                    << distance(sys.positions[i], sys.positions[j], sys.dimension);
    out.write("couplings.csv", g);
    detail::log_line(opt, "simulate: wrote " + std::to_string(traj.size()) + " samples");
}

// --- ensemble -------------------------------------------------------------

inline EnsembleStats run_ensemble_command(const RunConfig& cfg, const RunOptions& opt, OutputDir& out) {
    const auto st = run_ensemble(cfg.system, cfg.sampling, cfg.members, cfg.system.seed, opt.threads);
    CsvTable runs("ensemble_runs v1", {"run", "seed", "tau_gt", "c", "ssr", "iterations", "converged",
                                       "tau_guess_gt", "window_end_gt", "mean_level"});
    runs.meta("units", "tau=gt");
    detail::describe_fit_window(runs, cfg.sampling);
    for (const auto& r : st.runs) {
        runs.row() << r.index;
        runs.seed(r.seed) << r.fit.tau << r.fit.c << r.fit.ssr << r.fit.iterations << r.fit.converged
                          << r.fit.tau_guess << r.fit.window_end << r.mean_level;
    }
    out.write("ensemble_runs.csv", runs);
    auto stats = detail::stats_table();
    detail::describe_fit_window(stats, cfg.sampling);
    detail::stats_row(stats, 0, st);
    out.write("ensemble_stats.csv", stats);
    detail::log_line(opt, "ensemble: tau_d = " + format_double(st.tau_mean) +
                              ", <Xi> = " + format_double(st.level_mean));
    return st;
}

// --- sweep ----------------------------------------------------------------

inline std::vector<EnsembleStats> run_sweep(const RunConfig& cfg, const RunOptions& opt, OutputDir& out) {
    const auto cells = detail::sweep_cells(cfg);
    std::vector<EnsembleStats> results;
    auto table = detail::stats_table();
    detail::describe_fit_window(table, cfg.sampling);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const std::uint64_t cell_seed = derive_seed(cfg.system.seed, i);
        results.push_back(run_ensemble(cells[i], cfg.sampling, cfg.members, cell_seed, opt.threads));
        detail::stats_row(table, i, results.back());
        detail::log_line(opt, "sweep: cell " + std::to_string(i + 1) + "/" + std::to_string(cells.size()) +
                                  " N=" + std::to_string(cells[i].n_particles) + " rho=" +
                                  format_double(cells[i].density) + " D=" + std::to_string(cells[i].dimension) +
                                  " tau_d=" + format_double(results.back().tau_mean));
    }
    out.write("sweep.csv", table);
    return results;
}

/// Reads the cells of a sweep.csv back (summary fields only).
inline std::vector<EnsembleStats> read_sweep(const std::filesystem::path& path) {
    std::vector<EnsembleStats> cells;
    for (const auto& row : read_csv(path)) {
        auto get = [&](const char* key) -> const std::string& {
            const auto it = row.find(key);
            if (it == row.end()) throw ValidationError(path.string() + ": missing column " + key);
            return it->second;
        };
        auto as_double = [&](const char* key) {
            double v = 0.0;
            const auto& s = get(key);
            if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
            if (!detail::parse_number(std::string_view(s), v))
                throw ValidationError(path.string() + ": bad number in " + key);
            return v;
        };
        auto as_size = [&](const char* key) {
            std::size_t v = 0;
            if (!detail::parse_number(std::string_view(get(key)), v))
                throw ValidationError(path.string() + ": bad integer in " + key);
            return v;
        };
        EnsembleStats st;
        st.cell.n_particles = as_size("n");
        st.cell.dimension = static_cast<int>(as_size("d"));
        st.cell.density = as_double("rho");
        st.cell.eta = as_double("eta");
        st.cell.epsilon = as_double("epsilon");
        st.members = as_size("u");
        st.tau_mean = as_double("tau_mean_gt");
        st.level_mean = as_double("level_mean");
        if (const double v = as_double("tau_sd_gt"); !std::isnan(v)) st.tau_sd = v;
        if (const double v = as_double("level_sd"); !std::isnan(v)) st.level_sd = v;
        st.non_converged = as_size("non_converged");
        cells.push_back(st);
    }
    return cells;
}

// --- fit-scaling ----------------------------------------------------------

inline std::map<int, ScalingFit> run_fit_scaling(const RunConfig& cfg, const RunOptions& opt, OutputDir& out) {
    const auto sweep = cfg.input.empty() ? run_sweep(cfg, opt, out) : read_sweep(cfg.input);
    std::map<int, std::vector<EnsembleStats>> by_d;
    for (const auto& st : sweep) by_d[st.cell.dimension].push_back(st);

    std::map<int, ScalingFit> fits;
    CsvTable table("scaling_fit v1", {"d", "p", "p_se", "q", "q_se", "r", "r_se", "s", "s_se", "rho_r2",
                                      "rho_monotone", "n_monotone", "law_converged", "n_ref", "rho_ref", "a",
                                      "b", "f", "g"});
    table.meta("law", "tau_d = (1/eta) (P / N^Q + R) rho^-S; <Xi> = A exp(-B N); sd<Xi> = F exp(-G N)");
    std::ostringstream report;
    report << toolkit_name << ' ' << toolkit_version << " scaling fit\n"
           << "config_hash " << format_hex64(config_hash(cfg)) << ", master_seed " << cfg.system.seed << "\n\n";
    for (const auto& [d, cells] : by_d) {
        const ScalingFit fit = fit_decoherence_law(cells);
        fits[d] = fit;
        const auto nan = std::numeric_limits<double>::quiet_NaN();
        const auto& k = fit.constants;
        const auto& e = fit.standard_errors;
        table.row() << d << k.p << e.p << k.q << e.q << k.r << e.r << k.s << e.s << fit.density_r_squared
                    << fit.density_monotone << fit.size_monotone << fit.law_converged << fit.reference_n
                    << fit.reference_density << (fit.mean_level ? fit.mean_level->amplitude : nan)
                    << (fit.mean_level ? fit.mean_level->rate : nan)
                    << (fit.fluctuation ? fit.fluctuation->amplitude : nan)
                    << (fit.fluctuation ? fit.fluctuation->rate : nan);

        const auto ref = reference_law(d);
        report << "D = " << d << " (N-grid at rho = " << format_double(fit.reference_density)
               << ", rho-grid at N = " << fit.reference_n << ")\n";
        auto line = [&](const char* name, double v, double se, double rv, double re) {
            report << "  " << name << " = " << format_double(v) << " +- " << format_double(se)
                   << "    reference " << format_double(rv) << " +- " << format_double(re) << '\n';
        };
        line("P", k.p, e.p, ref.value.p, ref.error.p);
        line("Q", k.q, e.q, ref.value.q, ref.error.q);
        line("R", k.r, e.r, ref.value.r, ref.error.r);
        line("S", k.s, e.s, ref.value.s, ref.error.s);
        report << "  rho-grid power law R^2 = " << format_double(fit.density_r_squared)
               << (fit.density_monotone ? ", monotone" : ", NOT monotone") << '\n';
        if (fit.mean_level)
            report << "  <Xi>(N) = " << format_double(fit.mean_level->amplitude) << " exp(-"
                   << format_double(fit.mean_level->rate) << " N)\n";
        if (fit.fluctuation)
            report << "  sd<Xi>(N) = " << format_double(fit.fluctuation->amplitude) << " exp(-"
                   << format_double(fit.fluctuation->rate) << " N)\n";
        report << '\n';
    }
    out.write("scaling_fit.csv", table);
    out.write("scaling_fit.txt", report.str());
    detail::log_line(opt, report.str());
    return fits;
}

// --- recurrence -----------------------------------------------------------

inline std::vector<RecurrenceSummary> run_recurrence(const RunConfig& cfg, const RunOptions& opt,
                                                     OutputDir& out) {
    RunConfig grid = cfg;
    grid.sweep_design = SweepDesign::grid;
    const auto cells = detail::sweep_cells(grid);
    CsvTable summary("recurrence_summary v1", {"cell", "n", "rho", "d", "cell_seed", "samples", "degenerate",
                                               "mean_gt", "sd_gt", "median_gt", "log10_mean",
                                               "log10_of_mean"});
    summary.meta("units", "T_P=gt");
    summary.meta("log10_mean", "mean of log10 T_P over non-degenerate samples");
    CsvTable samples("recurrence_samples v1", {"cell", "sample", "seed", "period_gt"});
    std::vector<RecurrenceSummary> results;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const std::uint64_t cell_seed = derive_seed(cfg.system.seed, i);
        auto s = recurrence_stats(cells[i], cfg.samples, cell_seed, opt.threads);
        summary.row() << i << s.cell.n_particles << s.cell.density << s.cell.dimension;
        summary.seed(cell_seed) << s.samples << s.degenerate << s.mean << s.sd << s.median << s.log10_mean
                                << s.log10_of_mean();
        for (std::size_t k = 0; k < s.periods.size(); ++k) {
            samples.row() << i << k;
            samples.seed(derive_seed(cell_seed, k)) << s.periods[k];
        }
        detail::log_line(opt, "recurrence: N=" + std::to_string(s.cell.n_particles) + " D=" +
                                  std::to_string(s.cell.dimension) + " mean T_P=" + format_double(s.mean));
        results.push_back(std::move(s));
    }
    out.write("recurrence.csv", summary);
    out.write("recurrence_samples.csv", samples);
    return results;
}

// --- oracle-check ---------------------------------------------------------

struct OracleDeltas {
    double coherence = 0.0;    ///< max | |z_l| analytic - |rho_l(+,-)| oracle |
    double diagonal = 0.0;     ///< max | rho_l(+,+) - |a_l|^2 |
    double entropy = 0.0;      ///< max | S(rho_l) closed form - eigen-decomposition |
    double norm = 0.0;         ///< max | <psi|psi> - 1 |
    double mutual_info = 0.0;  ///< max | S_tot - I |

    void absorb(const OracleDeltas& o) {
        coherence = std::max(coherence, o.coherence);
        diagonal = std::max(diagonal, o.diagonal);
        entropy = std::max(entropy, o.entropy);
        norm = std::max(norm, o.norm);
        mutual_info = std::max(mutual_info, o.mutual_info);
    }
};

inline constexpr double oracle_tolerance = 1e-10;
inline constexpr double norm_tolerance = 1e-12;

/// Compares every closed-form single-particle quantity with the brute-force
/// state vector at one instant.
inline OracleDeltas compare_with_oracle(const SpinSystem& sys, double t, std::size_t cap) {
    OracleDeltas d;
    const auto psi = oracle::evolve(sys, t, cap);
    d.norm = std::abs(psi.norm_squared() - 1.0);
    const auto moduli = coherence_moduli(sys, t);
    double oracle_total = 0.0;
    for (std::size_t l = 0; l < sys.size(); ++l) {
        const auto rho = oracle::reduce(psi, l);
        const double z_oracle = std::abs(rho(0, 1));
        const double z_closed = std::abs(coherence(sys, l, t));
        d.coherence = std::max({d.coherence, std::abs(z_closed - z_oracle), std::abs(moduli[l] - z_oracle)});
        d.diagonal = std::max({d.diagonal, std::abs(rho(0, 0).real() - std::norm(sys.amplitudes[l].a)),
                               std::abs(rho(1, 1).real() - std::norm(sys.amplitudes[l].b))});
        const double s_oracle = oracle::vn_entropy(rho);
        oracle_total += s_oracle;
        d.entropy = std::max(d.entropy, std::abs(qubit_entropy(eigenvalues(sys.amplitudes[l], z_closed)) - s_oracle));
    }
    d.mutual_info = std::abs(entropy_total(sys, t) - oracle_total);
    return d;
}

inline bool within_oracle_tolerance(const OracleDeltas& d) {
    return d.coherence < oracle_tolerance && d.diagonal < oracle_tolerance && d.entropy < oracle_tolerance &&
           d.mutual_info < oracle_tolerance && d.norm < norm_tolerance;
}

inline OracleDeltas run_oracle_check(const RunConfig& cfg, const RunOptions& opt, OutputDir& out) {
    if (cfg.system.n_particles > cfg.oracle_cap)
        throw ValidationError("oracle-check: n = " + std::to_string(cfg.system.n_particles) +
                              " exceeds oracle_cap = " + std::to_string(cfg.oracle_cap));
    struct Row {
        std::uint64_t seed;
        std::vector<double> times;
        std::vector<OracleDeltas> deltas;
    };
    std::vector<Row> rows(cfg.samples);
    parallel_for(cfg.samples, opt.threads, [&](std::size_t s) {
        SystemConfig c = cfg.system;
        c.seed = derive_seed(cfg.system.seed, s);
        const SpinSystem sys = build_system(c);
        CounterRng time_rng(derive_seed(c.seed, 0x7469));
        Row& row = rows[s];
        row.seed = c.seed;
        for (std::size_t k = 0; k < cfg.oracle_times; ++k) {
            const double t = k == 0 ? 0.0 : time_rng.uniform(0.0, cfg.sampling.t_max);
            row.times.push_back(t);
            row.deltas.push_back(compare_with_oracle(sys, t, cfg.oracle_cap));
        }
    });

    CsvTable table("oracle_check v1", {"system", "seed", "t", "d_coherence", "d_diagonal", "d_entropy",
                                       "d_norm", "d_mutual_info"});
    table.meta("units", "t=gt entropy=nats");
    OracleDeltas worst;
    for (std::size_t s = 0; s < rows.size(); ++s)
        for (std::size_t k = 0; k < rows[s].times.size(); ++k) {
            const auto& d = rows[s].deltas[k];
            worst.absorb(d);
            table.row() << s;
            table.seed(rows[s].seed) << rows[s].times[k] << d.coherence << d.diagonal << d.entropy << d.norm
                                     << d.mutual_info;
        }
    const bool pass = within_oracle_tolerance(worst);
    table.meta("max_d_coherence", format_double(worst.coherence));
    table.meta("max_d_entropy", format_double(worst.entropy));
    table.meta("max_d_norm", format_double(worst.norm));
    table.meta("verdict", pass ? "PASS" : "FAIL");
    out.write("oracle_check.csv", table);

    std::ostringstream report;
    report << (pass ? "PASS" : "FAIL") << " oracle-check N=" << cfg.system.n_particles << ", " << cfg.samples
           << " systems x " << cfg.oracle_times << " times\n"
           << "  max |d|z_l||      = " << format_double(worst.coherence) << " (tol " << format_double(oracle_tolerance) << ")\n"
           << "  max |d diag|      = " << format_double(worst.diagonal) << " (tol " << format_double(oracle_tolerance) << ")\n"
           << "  max |d S(rho_l)|  = " << format_double(worst.entropy) << " (tol " << format_double(oracle_tolerance) << ")\n"
           << "  max |d S_tot - I| = " << format_double(worst.mutual_info) << " (tol " << format_double(oracle_tolerance) << ")\n"
           << "  max |norm - 1|    = " << format_double(worst.norm) << " (tol " << format_double(norm_tolerance) << ")\n";
    out.write("oracle_check.txt", report.str());
    detail::log_line(opt, report.str());
    if (!pass) throw NumericalError("oracle-check: closed form disagrees with the state-vector oracle");
    return worst;
}

// --- dispatch -------------------------------------------------------------

/// Runs one subcommand, throwing on failure.
inline void execute(std::string_view command, const RunConfig& cfg, const RunOptions& opt) {
    validate(cfg);
    OutputDir out(cfg, command);
    try {
        if (command == "simulate") run_simulate(cfg, opt, out);
        else if (command == "ensemble") run_ensemble_command(cfg, opt, out);
        else if (command == "sweep") run_sweep(cfg, opt, out);
        else if (command == "fit-scaling") run_fit_scaling(cfg, opt, out);
        else if (command == "recurrence") run_recurrence(cfg, opt, out);
        else if (command == "oracle-check") run_oracle_check(cfg, opt, out);
        else throw ValidationError("unknown subcommand '" + std::string(command) + "'");
    } catch (const std::exception& e) {
        out.mark_partial(e.what());
        throw;
    }
}

inline int exit_code_for(const std::exception_ptr& failure) {
    try {
        std::rethrow_exception(failure);
    } catch (const ParseError&) {
        return exit_validation;
    } catch (const ValidationError&) {
        return exit_validation;
    } catch (const DomainError&) {
        return exit_validation;
    } catch (const NumericalError&) {
        return exit_numerical;
    } catch (...) {
        return exit_numerical;
    }
}

/// Runs one subcommand and maps failures onto exit codes.
inline int run(std::string_view command, const RunConfig& cfg, const RunOptions& opt, std::ostream& err = std::cerr) {
    if (std::find(subcommands().begin(), subcommands().end(), command) == subcommands().end()) {
        err << "unknown subcommand '" << command << "'\n";
        return exit_usage;
    }
    try {
        execute(command, cfg, opt);
        return exit_success;
    } catch (const std::exception& e) {
        err << command << ": " << e.what() << '\n';
        return exit_code_for(std::current_exception());
    }
}

} // namespace decoh
