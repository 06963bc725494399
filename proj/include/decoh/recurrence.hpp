#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "decoh/error.hpp"
#include "decoh/model.hpp"
#include "decoh/parallel.hpp"
#include "decoh/rng.hpp"

namespace decoh {

// Recurrence-time estimate of the almost periodic Xi(t), built from the
// smallest spacings between coupling strengths.

struct ParticleFrequency {
    double omega = 0.0;
    bool degenerate = false; ///< two couplings of the particle coincide, omega = 0
};

/// omega_i = 2 min_{j != j'} |g_ij - g_ij'| over unordered pairs of distinct
/// partners j, j' (both != i). Sorting makes this O(N log N).
inline ParticleFrequency particle_frequency(const SpinSystem& sys, std::size_t i) {
    const std::size_t n = sys.size();
    if (n < 3) throw DomainError("particle_frequency: need N >= 3");
    if (i >= n) throw DomainError("particle_frequency: particle index out of range");
    std::vector<double> g;
    g.reserve(n - 1);
    const double* row = sys.couplings.row(i);
    for (std::size_t j = 0; j < n; ++j)
        if (j != i) g.push_back(row[j]);
    std::sort(g.begin(), g.end());
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < g.size(); ++k) gap = std::min(gap, g[k] - g[k - 1]);
    return {2.0 * gap, gap == 0.0};
}

struct RecurrenceEstimate {
    double period = std::numeric_limits<double>::infinity(); ///< T_P in gt units
    std::vector<double> omegas;
    std::size_t first = 0; ///< minimising pair (first < second)
    std::size_t second = 0;
    bool degenerate = false; ///< two omegas coincide; period is +inf
};

/// T_P = 2 pi / min_{i != i'} |omega_i - omega_i'| for given frequencies.
inline RecurrenceEstimate recurrence_from_frequencies(std::vector<double> omegas) {
    const std::size_t n = omegas.size();
    if (n < 2) throw DomainError("recurrence_from_frequencies: need at least two frequencies");
    RecurrenceEstimate est;
    est.omegas = std::move(omegas);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return est.omegas[a] < est.omegas[b] || (est.omegas[a] == est.omegas[b] && a < b);
    });
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < n; ++k) {
        const double d = est.omegas[order[k]] - est.omegas[order[k - 1]];
        if (d < gap) {
            gap = d;
            est.first = std::min(order[k], order[k - 1]);
            est.second = std::max(order[k], order[k - 1]);
        }
    }
    if (gap == 0.0) {
        est.degenerate = true;
        est.period = std::numeric_limits<double>::infinity();
    } else {
        est.period = 2.0 * std::numbers::pi / gap;
    }
    return est;
}

inline RecurrenceEstimate recurrence_time(const SpinSystem& sys) {
    const std::size_t n = sys.size();
    if (n < 3) throw DomainError("recurrence_time: need N >= 3");
    std::vector<double> omegas(n);
    for (std::size_t i = 0; i < n; ++i) omegas[i] = particle_frequency(sys, i).omega;
    return recurrence_from_frequencies(std::move(omegas));
}

struct RecurrenceSummary {
    SystemConfig cell;
    std::uint64_t master_seed = 0;
    std::size_t samples = 0;
    std::size_t degenerate = 0;
    double mean = 0.0;      ///< over finite estimates
    double sd = 0.0;        ///< population deviation
    double median = 0.0;
    double log10_mean = 0.0; ///< mean of log10 T_P
    std::vector<double> periods; ///< per sample, +inf when degenerate

    double degenerate_fraction() const {
        return samples ? static_cast<double>(degenerate) / static_cast<double>(samples) : 0.0;
    }
    /// log10 of the arithmetic mean, the heavy-tail-sensitive statistic.
    double log10_of_mean() const { return std::log10(mean); }
};

/// Sample s uses seed derive_seed(master_seed, s).
inline RecurrenceSummary recurrence_stats(const SystemConfig& cell, std::size_t samples,
                                          std::uint64_t master_seed, unsigned threads = 1) {
    if (samples < 2) throw DomainError("recurrence_stats: need at least two samples");
    validate(cell);
    if (cell.n_particles < 3) throw DomainError("recurrence_stats: need N >= 3");
    RecurrenceSummary sum;
    sum.cell = cell;
    sum.cell.seed = master_seed;
    sum.master_seed = master_seed;
    sum.samples = samples;
    sum.periods.resize(samples);
    parallel_for(samples, threads, [&](std::size_t s) {
        SystemConfig c = cell;
        c.seed = derive_seed(master_seed, s);
        sum.periods[s] = recurrence_time(build_system(c)).period;
    });

    std::vector<double> finite;
    for (double p : sum.periods) {
        if (std::isfinite(p))
            finite.push_back(p);
        else
            ++sum.degenerate;
    }
    if (finite.empty()) {
        sum.mean = sum.sd = sum.median = sum.log10_mean = std::numeric_limits<double>::infinity();
        return sum;
    }
    double log_sum = 0.0;
    for (double p : finite) {
        sum.mean += p;
        log_sum += std::log10(p);
    }
    const double count = static_cast<double>(finite.size());
    sum.mean /= count;
    sum.log10_mean = log_sum / count;
    double var = 0.0;
    for (double p : finite) var += (p - sum.mean) * (p - sum.mean);
    sum.sd = std::sqrt(var / count);
    std::sort(finite.begin(), finite.end());
    const std::size_t mid = finite.size() / 2;
    sum.median = finite.size() % 2 ? finite[mid] : 0.5 * (finite[mid - 1] + finite[mid]);
    return sum;
}

} // namespace decoh
