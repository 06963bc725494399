#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "decoh/dynamics.hpp"
#include "decoh/error.hpp"
#include "decoh/fitting.hpp"
#include "decoh/model.hpp"
#include "decoh/parallel.hpp"
#include "decoh/rng.hpp"

namespace decoh {

// ---------------------------------------------------------------------------
// Time averages and single-trajectory decay fits

/// (1/(t2 - t1)) * integral of the piecewise-linear interpolant of Xi over
/// [t1, t2]. Endpoints between grid points are interpolated.
inline double time_average(const Trajectory& traj, double t1, double t2) {
    if (!(t2 > t1)) throw DomainError("time_average: need t1 < t2");
    if (traj.size() < 2) throw DomainError("time_average: trajectory too short");
    const double slack = 1e-9 * traj.dt;
    if (t1 < -slack || t2 > traj.t_max() + slack)
        throw DomainError("time_average: window [" + std::to_string(t1) + ", " + std::to_string(t2) +
                          "] outside trajectory [0, " + std::to_string(traj.t_max()) + "]");
    t1 = std::max(t1, 0.0);
    t2 = std::min(t2, traj.t_max());
    auto value_at = [&](double t) {
        const double pos = t / traj.dt;
        const std::size_t i = std::min(static_cast<std::size_t>(pos), traj.size() - 2);
        const double frac = pos - static_cast<double>(i);
        return traj.xi[i] + frac * (traj.xi[i + 1] - traj.xi[i]);
    };
    double integral = 0.0;
    double prev_t = t1, prev_v = value_at(t1);
    // Knots strictly inside (t1, t2).
    const std::size_t first = std::min(static_cast<std::size_t>(t1 / traj.dt), traj.size() - 1);
    for (std::size_t i = first; i < traj.size() && traj.time(i) < t2; ++i) {
        if (traj.time(i) <= t1) continue;
        integral += 0.5 * (prev_v + traj.xi[i]) * (traj.time(i) - prev_t);
        prev_t = traj.time(i);
        prev_v = traj.xi[i];
    }
    integral += 0.5 * (prev_v + value_at(t2)) * (t2 - prev_t);
    return integral / (t2 - t1);
}

/// xi(t) = (0.5 - c) e^{-t/tau} + c
inline double decay_model(double t, double tau, double c) { return (0.5 - c) * std::exp(-t / tau) + c; }

/// Fit window [0, min(tau_multiple * tau0, max_end)], or [0, fixed_end] when
/// fixed_end > 0. The tail used for the initial guess of c is the second
/// half of the trajectory.
struct FitWindowPolicy {
    double tau_multiple = 20.0;
    double max_end = 50.0;
    double fixed_end = 0.0;

    friend bool operator==(const FitWindowPolicy&, const FitWindowPolicy&) = default;
};

struct DecayFit {
    double tau = 0.0;
    double c = 0.0;
    double ssr = 0.0;
    int iterations = 0;
    bool converged = false;
    double tau_guess = 0.0;
    double c_guess = 0.0;
    double window_end = 0.0;
    std::size_t window_samples = 0;
};

namespace detail {

inline double tail_mean(const Trajectory& traj) {
    const std::size_t start = traj.size() / 2;
    double s = 0.0;
    for (std::size_t i = start; i < traj.size(); ++i) s += traj.xi[i];
    return s / static_cast<double>(traj.size() - start);
}

/// First time Xi drops below `level`, linearly interpolated; 1 if it never does.
inline double first_crossing(const Trajectory& traj, double level) {
    for (std::size_t i = 1; i < traj.size(); ++i) {
        if (traj.xi[i] < level) {
            const double drop = traj.xi[i - 1] - traj.xi[i];
            const double frac = drop > 0.0 ? (traj.xi[i - 1] - level) / drop : 1.0;
            return traj.time(i - 1) + std::clamp(frac, 0.0, 1.0) * traj.dt;
        }
    }
    return 1.0;
}

} // namespace detail

inline constexpr double max_asymptote = 0.49999999999999994; // nextafter(0.5, 0)

/// Least-squares fit of decay_model to the early part of Xi(t).
inline DecayFit fit_decay(const Trajectory& traj, const FitWindowPolicy& policy = {},
                          const LmOptions& lm = {}) {
    if (traj.size() < 3) throw DomainError("fit_decay: trajectory too short");
    DecayFit fit;
    fit.c_guess = std::clamp(detail::tail_mean(traj), 0.0, max_asymptote);
    const double level = fit.c_guess + (0.5 - fit.c_guess) / std::numbers::e;
    fit.tau_guess = detail::first_crossing(traj, level);
    if (!(fit.tau_guess > 0.0)) fit.tau_guess = 1.0;

    fit.window_end = policy.fixed_end > 0.0 ? policy.fixed_end
                                            : std::min(policy.tau_multiple * fit.tau_guess, policy.max_end);
    fit.window_end = std::min(fit.window_end, traj.t_max());
    std::size_t count = 0;
    while (count < traj.size() && traj.time(count) <= fit.window_end * (1.0 + 1e-12)) ++count;
    fit.window_samples = count;
    if (count < 3)
        throw DomainError("fit_decay: degenerate window [0, " + std::to_string(fit.window_end) + "] holds " +
                          std::to_string(count) + " samples");

    auto evaluate = [&](const Vec<2>& p, std::vector<double>& r, std::vector<Vec<2>>& j) {
        const double tau = p[0], c = p[1];
        r.resize(count);
        j.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            const double t = traj.time(i);
            const double e = std::exp(-t / tau);
            r[i] = (0.5 - c) * e + c - traj.xi[i];
            j[i] = {(0.5 - c) * e * t / (tau * tau), 1.0 - e};
        }
    };
    const auto res = levenberg_marquardt<2>(evaluate, {fit.tau_guess, fit.c_guess},
                                            {1e-12, 0.0},
                                            {std::numeric_limits<double>::infinity(), max_asymptote}, lm);
    fit.tau = res.params[0];
    fit.c = res.params[1];
    fit.ssr = res.ssr;
    fit.iterations = res.iterations;
    fit.converged = res.converged;
    return fit;
}

// ---------------------------------------------------------------------------
// Ensembles

/// Time grid, averaging window and fit policy shared by every ensemble member.
struct SamplingConfig {
    double dt = 0.05;
    double t_max = 100.0;
    double t1 = 50.0;
    double t2 = 100.0;
    FitWindowPolicy window;

    std::size_t n_samples() const { return static_cast<std::size_t>(std::llround(t_max / dt)) + 1; }

    friend bool operator==(const SamplingConfig&, const SamplingConfig&) = default;
};

inline void validate(const SamplingConfig& s) {
    if (!(s.dt > 0.0)) throw ValidationError("dt must be > 0");
    if (!(s.t_max > 0.0)) throw ValidationError("tmax must be > 0");
    if (!(s.t1 < s.t2)) throw ValidationError("t1 < t2 violated");
    if (s.t1 < 0.0) throw ValidationError("t1 >= 0 violated");
    if (s.t2 > s.t_max) throw ValidationError("t2 <= tmax violated");
    if (s.n_samples() < 3) throw ValidationError("tmax / dt must give at least three samples");
}

struct RunRecord {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    DecayFit fit;
    double mean_level = 0.0;
};

/// Summary of U members of one parameter cell. Deviations are population
/// standard deviations and are absent when fewer than two values exist.
struct EnsembleStats {
    SystemConfig cell;
    std::uint64_t master_seed = 0;
    std::size_t members = 0;
    std::size_t non_converged = 0;
    double tau_mean = 0.0;
    std::optional<double> tau_sd;
    double level_mean = 0.0;
    std::optional<double> level_sd;
    std::vector<RunRecord> runs;
};

struct MeanSd {
    double mean = 0.0;
    std::optional<double> sd;
};

inline MeanSd population_stats(std::span<const double> v) {
    MeanSd out;
    if (v.empty()) {
        out.mean = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    for (double x : v) out.mean += x;
    out.mean /= static_cast<double>(v.size());
    if (v.size() >= 2) {
        double s = 0.0;
        for (double x : v) s += (x - out.mean) * (x - out.mean);
        out.sd = std::sqrt(s / static_cast<double>(v.size()));
    }
    return out;
}

inline constexpr double max_failure_fraction = 0.2;

/// One member: build, sample Xi, fit, average.
inline RunRecord run_member(SystemConfig cell, const SamplingConfig& sampling, std::size_t index,
                            std::uint64_t master_seed) {
    RunRecord rec;
    rec.index = index;
    rec.seed = derive_seed(master_seed, index);
    cell.seed = rec.seed;
    const SpinSystem sys = build_system(cell);
    const Trajectory traj = sample_trajectory(sys, sampling.dt, sampling.n_samples());
    rec.fit = fit_decay(traj, sampling.window);
    rec.mean_level = time_average(traj, sampling.t1, sampling.t2);
    return rec;
}

/// tau statistics use converged members only; level statistics use all.
/// Fails when more than 20% of members do not converge.
inline EnsembleStats run_ensemble(const SystemConfig& cell, const SamplingConfig& sampling,
                                  std::size_t members, std::uint64_t master_seed, unsigned threads = 1) {
    if (members < 1) throw DomainError("run_ensemble: U must be >= 1");
    validate(cell);
    validate(sampling);
    EnsembleStats stats;
    stats.cell = cell;
    stats.cell.seed = master_seed;
    stats.master_seed = master_seed;
    stats.members = members;
    stats.runs.resize(members);
    parallel_for(members, threads,
                 [&](std::size_t u) { stats.runs[u] = run_member(cell, sampling, u, master_seed); });

    std::vector<double> taus, levels;
    for (const auto& run : stats.runs) {
        levels.push_back(run.mean_level);
        if (run.fit.converged)
            taus.push_back(run.fit.tau);
        else
            ++stats.non_converged;
    }
    if (static_cast<double>(stats.non_converged) > max_failure_fraction * static_cast<double>(members))
        throw NumericalError("run_ensemble: " + std::to_string(stats.non_converged) + " of " +
                             std::to_string(members) + " decay fits did not converge");
    const auto tau = population_stats(taus);
    const auto level = population_stats(levels);
    stats.tau_mean = tau.mean;
    stats.tau_sd = tau.sd;
    stats.level_mean = level.mean;
    stats.level_sd = level.sd;
    return stats;
}

// ---------------------------------------------------------------------------
// Scaling laws across cells

struct ExponentialFit {
    double amplitude = 0.0; ///< A (or F)
    double rate = 0.0;      ///< B (or G)
    double r_squared = 0.0;
};

/// value(N) = A e^{-B N} by linear regression of ln(value) on N.
inline ExponentialFit fit_mean_level(std::span<const double> n, std::span<const double> value) {
    if (n.size() != value.size()) throw DomainError("fit_mean_level: length mismatch");
    if (n.size() < 3) throw DomainError("fit_mean_level: need at least three points");
    std::vector<double> log_value(value.size());
    for (std::size_t i = 0; i < value.size(); ++i) {
        if (!(value[i] > 0.0)) throw DomainError("fit_mean_level: values must be positive");
        log_value[i] = std::log(value[i]);
    }
    const auto lin = linear_regression(n, log_value);
    return {std::exp(lin.intercept), -lin.slope, lin.r_squared};
}

/// tau_d = (1/eta) (P / N^Q + R) rho^{-S}
struct LawConstants {
    double p = 0.0;
    double q = 0.0;
    double r = 0.0;
    double s = 0.0;
};

inline double decoherence_time(const LawConstants& k, double n, double density, double eta) {
    return (k.p / std::pow(n, k.q) + k.r) * std::pow(density, -k.s) / eta;
}

/// Published constants and their error bars, D = 1, 2, 3.
struct ReferenceLaw {
    LawConstants value;
    LawConstants error;
};

inline ReferenceLaw reference_law(int dimension) {
    switch (dimension) {
    case 1: return {{3.73, 1.49, 0.415, 1.80}, {1.0, 0.3, 0.022, 0.05}};
    case 2: return {{0.77, 0.80, 0.166, 1.00}, {0.3, 0.1, 0.004, 0.05}};
    case 3: return {{0.45, 0.55, 0.128, 0.67}, {0.1, 0.05, 0.003, 0.05}};
    default: throw DomainError("reference_law: dimension must be 1, 2 or 3");
    }
}

struct ScalingFit {
    LawConstants constants;
    LawConstants standard_errors;
    double density_r_squared = 0.0; ///< log-log fit of tau_d against rho
    bool density_monotone = false;  ///< tau_d strictly decreasing along the rho-grid
    bool size_monotone = false;     ///< tau_d strictly decreasing along the N-grid
    bool law_converged = false;
    std::size_t reference_n = 0;   ///< N of the rho-grid
    double reference_density = 0;  ///< rho of the N-grid
    std::optional<ExponentialFit> mean_level;
    std::optional<ExponentialFit> fluctuation;
};

namespace detail {

inline bool strictly_decreasing(const std::vector<std::pair<double, double>>& xy) {
    for (std::size_t i = 1; i < xy.size(); ++i)
        if (!(xy[i].second < xy[i - 1].second)) return false;
    return true;
}

} // namespace detail

/// Two-stage fit of the decoherence-time law over a sweep holding an N-grid at
/// fixed rho and a rho-grid at fixed N (same D, eta, epsilon):
///   1. S = -slope of ln tau_d against ln rho on the rho-grid;
///   2. (P, Q, R) by bounded least squares of tau_d eta rho^S = P/N^Q + R.
/// A and B (F and G) come from the N-grid's mean levels (their deviations).
inline ScalingFit fit_decoherence_law(std::span<const EnsembleStats> sweep) {
    if (sweep.empty()) throw DomainError("fit_decoherence_law: empty sweep");
    const auto& ref = sweep.front().cell;
    for (const auto& st : sweep) {
        if (st.cell.dimension != ref.dimension || st.cell.eta != ref.eta || st.cell.epsilon != ref.epsilon)
            throw DomainError("fit_decoherence_law: cells differ in D, eta or epsilon");
        if (!(st.tau_mean > 0.0) || !std::isfinite(st.tau_mean))
            throw DomainError("fit_decoherence_law: cell without a positive mean tau");
    }

    // Pick the N with the most distinct densities and the density with the most distinct N.
    std::map<std::size_t, std::map<double, double>> by_n;
    std::map<double, std::map<std::size_t, const EnsembleStats*>> by_rho;
    for (const auto& st : sweep) {
        by_n[st.cell.n_particles][st.cell.density] = st.tau_mean;
        by_rho[st.cell.density][st.cell.n_particles] = &st;
    }
    ScalingFit out;
    std::size_t best = 0;
    for (const auto& [n, row] : by_n)
        if (row.size() > best) {
            best = row.size();
            out.reference_n = n;
        }
    if (best < 3) throw DomainError("fit_decoherence_law: rho-grid needs at least three densities");
    best = 0;
    for (const auto& [rho, row] : by_rho)
        if (row.size() > best) {
            best = row.size();
            out.reference_density = rho;
        }
    if (best < 4) throw DomainError("fit_decoherence_law: N-grid needs at least four sizes");

    // Stage 1.
    std::vector<double> log_rho, log_tau;
    std::vector<std::pair<double, double>> rho_curve;
    for (const auto& [rho, tau] : by_n[out.reference_n]) {
        log_rho.push_back(std::log(rho));
        log_tau.push_back(std::log(tau));
        rho_curve.emplace_back(rho, tau);
    }
    const auto stage1 = linear_regression(log_rho, log_tau);
    out.constants.s = -stage1.slope;
    out.standard_errors.s = stage1.slope_se;
    out.density_r_squared = stage1.r_squared;
    out.density_monotone = detail::strictly_decreasing(rho_curve);

    // Stage 2.
    std::vector<double> ns, ys, levels, level_sds;
    std::vector<std::pair<double, double>> n_curve;
    bool have_sd = true;
    for (const auto& [n, st] : by_rho[out.reference_density]) {
        const double nd = static_cast<double>(n);
        ns.push_back(nd);
        ys.push_back(st->tau_mean * ref.eta * std::pow(out.reference_density, out.constants.s));
        n_curve.emplace_back(nd, st->tau_mean);
        levels.push_back(st->level_mean);
        if (st->level_sd && *st->level_sd > 0.0)
            level_sds.push_back(*st->level_sd);
        else
            have_sd = false;
    }
    out.size_monotone = detail::strictly_decreasing(n_curve);

    auto evaluate = [&](const Vec<3>& p, std::vector<double>& r, std::vector<Vec<3>>& j) {
        r.resize(ns.size());
        j.resize(ns.size());
        for (std::size_t i = 0; i < ns.size(); ++i) {
            const double pw = std::pow(ns[i], -p[1]);
            r[i] = p[0] * pw + p[2] - ys[i];
            j[i] = {pw, -p[0] * pw * std::log(ns[i]), 1.0};
        }
    };
    const double y_min = *std::min_element(ys.begin(), ys.end());
    const double n_min = *std::min_element(ns.begin(), ns.end());
    const double y_first = ys[static_cast<std::size_t>(std::min_element(ns.begin(), ns.end()) - ns.begin())];
    LmResult<3> best_fit;
    bool have_fit = false;
    for (double q0 : {0.25, 0.5, 1.0, 2.0}) {
        for (double r_frac : {0.0, 0.5, 0.9}) {
            const double r0 = r_frac * y_min;
            const double p0 = std::max(y_first - r0, 1e-6) * std::pow(n_min, q0);
            const auto fit = levenberg_marquardt<3>(evaluate, {p0, q0, r0}, {0.0, 0.0, 0.0},
                                                    {std::numeric_limits<double>::infinity(), 10.0,
                                                     std::numeric_limits<double>::infinity()});
            if (!have_fit || (fit.converged && !best_fit.converged) ||
                (fit.converged == best_fit.converged && fit.ssr < best_fit.ssr)) {
                best_fit = fit;
                have_fit = true;
            }
        }
    }
    out.law_converged = best_fit.converged;
    out.constants.p = best_fit.params[0];
    out.constants.q = best_fit.params[1];
    out.constants.r = best_fit.params[2];
    out.standard_errors.p = best_fit.standard_errors[0];
    out.standard_errors.q = best_fit.standard_errors[1];
    out.standard_errors.r = best_fit.standard_errors[2];

    if (ns.size() >= 3) {
        out.mean_level = fit_mean_level(ns, levels);
        if (have_sd) out.fluctuation = fit_mean_level(ns, level_sds);
    }
    return out;
}

/// Smallest N whose size term P/N^Q is at most (1/f - 1) R, i.e. contributes
/// no more than a fraction (1 - f) of the saturated decoherence time.
inline std::size_t saturation_size(double target_fraction, const LawConstants& k) {
    if (!(target_fraction > 0.0 && target_fraction < 1.0))
        throw DomainError("saturation_size: target fraction must lie in (0, 1)");
    if (!(k.q > 0.0) || !(k.r > 0.0) || !(k.p >= 0.0))
        throw DomainError("saturation_size: need P >= 0, Q > 0, R > 0");
    const double bound = (1.0 / target_fraction - 1.0) * k.r;
    auto ok = [&](double n) { return k.p / std::pow(n, k.q) <= bound; };
    double estimate = std::ceil(std::pow(k.p / bound, 1.0 / k.q));
    std::size_t n = static_cast<std::size_t>(std::max(1.0, estimate));
    while (n > 1 && ok(static_cast<double>(n - 1))) --n;
    while (!ok(static_cast<double>(n))) ++n;
    return n;
}

} // namespace decoh
