#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "decoh/error.hpp"
#include "decoh/model.hpp"
#include "decoh/parallel.hpp"

namespace decoh {

// Closed-form single-particle quantities of the product initial state under
// H = sum_{i<j} g_ij sz_i sz_j. Particle indices are 0-based throughout.

/// Factor contributed by particle k to the coherence of a particle coupled to
/// it with strength g: |a_k|^2 e^{-i2gt} + |b_k|^2 e^{+i2gt}.
inline complex coherence_factor(const Amplitude& amp, double g, double t) {
    const double theta = 2.0 * g * t;
    return std::norm(amp.a) * std::polar(1.0, -theta) + std::norm(amp.b) * std::polar(1.0, theta);
}

/// Off-diagonal element z_l(t) = a_l b_l* prod_{k != l} factor_k.
inline complex coherence(const SpinSystem& sys, std::size_t l, double t) {
    const std::size_t n = sys.size();
    if (l >= n) throw DomainError("coherence: particle index " + std::to_string(l) + " out of range");
    complex z = sys.amplitudes[l].a * std::conj(sys.amplitudes[l].b);
    const double* g = sys.couplings.row(l);
    for (std::size_t k = 0; k < n; ++k) {
        if (k == l) continue;
        z *= coherence_factor(sys.amplitudes[k], g[k], t);
    }
    return z;
}

/// Fills out[l] = |z_l(t)| for all l in O(N^2), one sincos per pair. Each
/// factor modulus is sqrt(cos^2 + (|b_k|^2 - |a_k|^2)^2 sin^2); the product of
/// moduli equals the modulus of the complex product.
inline void coherence_moduli(const SpinSystem& sys, double t, std::span<double> out) {
    const std::size_t n = sys.size();
    if (out.size() != n) throw DomainError("coherence_moduli: output span has wrong length");
    thread_local std::vector<double> imbalance;
    imbalance.resize(n);
    bool balanced = true;
    for (std::size_t k = 0; k < n; ++k) {
        out[k] = sys.amplitudes[k].coherence_modulus();
        imbalance[k] = std::norm(sys.amplitudes[k].b) - std::norm(sys.amplitudes[k].a);
        if (imbalance[k] != 0.0) balanced = false;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double* g = sys.couplings.row(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double theta = 2.0 * g[j] * t;
            const double c = std::cos(theta);
            if (balanced) {
                const double m = std::abs(c);
                out[i] *= m;
                out[j] *= m;
            } else {
                const double s = std::sin(theta);
                const double c2 = c * c, s2 = s * s;
                out[i] *= std::sqrt(c2 + imbalance[j] * imbalance[j] * s2);
                out[j] *= std::sqrt(c2 + imbalance[i] * imbalance[i] * s2);
            }
        }
    }
}

inline std::vector<double> coherence_moduli(const SpinSystem& sys, double t) {
    std::vector<double> out(sys.size());
    coherence_moduli(sys, t, out);
    return out;
}

/// Decoherence function Xi(t) = (1/N) sum_l |z_l(t)|.
inline double xi(const SpinSystem& sys, double t) {
    thread_local std::vector<double> moduli;
    moduli.resize(sys.size());
    coherence_moduli(sys, t, moduli);
    double sum = 0.0;
    for (double m : moduli) sum += m;
    return sum / static_cast<double>(sys.size());
}

/// Xi restricted to a subset of particles: (1/m) sum_{l in S} |z_l(t)|.
inline double xi_subset(const SpinSystem& sys, std::span<const std::size_t> subset, double t) {
    if (subset.empty()) throw DomainError("xi_subset: subset must be non-empty");
    std::vector<bool> seen(sys.size(), false);
    for (std::size_t l : subset) {
        if (l >= sys.size()) throw DomainError("xi_subset: particle index out of range");
        if (seen[l]) throw DomainError("xi_subset: duplicate particle index");
        seen[l] = true;
    }
    const auto moduli = coherence_moduli(sys, t);
    double sum = 0.0;
    for (std::size_t l : subset) sum += moduli[l];
    return sum / static_cast<double>(subset.size());
}

/// Lost coherence Y(t) = Xi(0) - Xi(t).
inline double y_complement(const SpinSystem& sys, double t) {
    return std::max(0.0, sys.initial_coherence() - xi(sys, t));
}

struct EigenPair {
    double plus;
    double minus;
};

inline constexpr double radicand_clamp_tolerance = 1e-12;

/// Eigenvalues 1/2 +- 1/2 sqrt(1 - 4(|a|^2|b|^2 - |z|^2)) of a single-particle
/// reduced density matrix. Radicands outside [0,1] by at most 1e-12 are
/// clamped; anything further out means |z| > |ab| and is rejected.
inline EigenPair eigenvalues(const Amplitude& amp, double z_modulus) {
    const double pa = std::norm(amp.a), pb = std::norm(amp.b);
    double radicand = 1.0 - 4.0 * (pa * pb - z_modulus * z_modulus);
    if (radicand < 0.0) {
        if (radicand < -radicand_clamp_tolerance)
            throw NumericalError("eigenvalues: negative radicand " + std::to_string(radicand));
        radicand = 0.0;
    } else if (radicand > 1.0) {
        if (radicand > 1.0 + radicand_clamp_tolerance)
            throw NumericalError("eigenvalues: radicand above one, |z| exceeds |ab|");
        radicand = 1.0;
    }
    const double half_root = 0.5 * std::sqrt(radicand);
    return {0.5 + half_root, 0.5 - half_root};
}

inline EigenPair eigenvalues(const Amplitude& amp, complex z) { return eigenvalues(amp, std::abs(z)); }

/// -x ln x with 0 ln 0 = 0.
inline double entropy_term(double x) { return x > 0.0 ? -x * std::log(x) : 0.0; }

/// Von Neumann entropy (nats) of a qubit with the given spectrum.
inline double qubit_entropy(EigenPair lambda) {
    return entropy_term(lambda.plus) + entropy_term(lambda.minus);
}

/// Everything known about one particle at one instant.
struct CoherenceSample {
    std::size_t particle;
    complex z;
    EigenPair lambda;
    double entropy;
};

inline CoherenceSample coherence_sample(const SpinSystem& sys, std::size_t l, double t) {
    const complex z = coherence(sys, l, t);
    const EigenPair lambda = eigenvalues(sys.amplitudes[l], z);
    return {l, z, lambda, qubit_entropy(lambda)};
}

inline double entropy_total_from_moduli(const SpinSystem& sys, std::span<const double> moduli) {
    double s = 0.0;
    for (std::size_t l = 0; l < sys.size(); ++l)
        s += qubit_entropy(eigenvalues(sys.amplitudes[l], moduli[l]));
    return s;
}

/// S_tot(t) = sum_l S(rho_l), nats.
inline double entropy_total(const SpinSystem& sys, double t) {
    const auto moduli = coherence_moduli(sys, t);
    return entropy_total_from_moduli(sys, moduli);
}

// ---------------------------------------------------------------------------
// Sampled trajectories

struct TrajectoryChannels {
    bool per_particle = false;
    bool entropy = false;
};

/// Xi(t) (and optionally |z_l(t)| and S_tot(t)) on the grid t_i = i * dt.
struct Trajectory {
    double dt = 0.0;
    std::size_t n_particles = 0;
    std::vector<double> xi;
    /// Row-major [sample][particle]; empty unless requested.
    std::vector<double> moduli;
    std::vector<double> entropy;

    std::size_t size() const noexcept { return xi.size(); }
    double time(std::size_t i) const noexcept { return static_cast<double>(i) * dt; }
    double t_max() const noexcept { return size() ? time(size() - 1) : 0.0; }
    bool has_moduli() const noexcept { return !moduli.empty(); }
    bool has_entropy() const noexcept { return !entropy.empty(); }

    double modulus(std::size_t sample, std::size_t particle) const {
        return moduli[sample * n_particles + particle];
    }
};

/// Upper bound on stored doubles per trajectory.
inline constexpr std::size_t default_trajectory_cap = std::size_t{1} << 28;

inline Trajectory sample_trajectory(const SpinSystem& sys, double dt, std::size_t n_samples,
                                    TrajectoryChannels channels = {}, unsigned threads = 1,
                                    std::size_t cap = default_trajectory_cap) {
    if (!(dt > 0.0)) throw DomainError("sample_trajectory: dt must be > 0");
    if (n_samples < 2) throw DomainError("sample_trajectory: need at least two samples");
    const std::size_t n = sys.size();
    const std::size_t width = 1 + (channels.per_particle ? n : 0) + (channels.entropy ? 1 : 0);
    if (n_samples > cap / width)
        throw DomainError("sample_trajectory: " + std::to_string(n_samples) + " samples x " +
                          std::to_string(width) + " channels exceeds the cap of " +
                          std::to_string(cap) + " values");

    Trajectory traj;
    traj.dt = dt;
    traj.n_particles = n;
    traj.xi.resize(n_samples);
    if (channels.per_particle) traj.moduli.resize(n_samples * n);
    if (channels.entropy) traj.entropy.resize(n_samples);

    constexpr std::size_t block = 64;
    const std::size_t blocks = (n_samples + block - 1) / block;
    parallel_for(blocks, threads, [&](std::size_t b) {
        std::vector<double> m(n);
        const std::size_t end = std::min(n_samples, (b + 1) * block);
        for (std::size_t i = b * block; i < end; ++i) {
            coherence_moduli(sys, traj.time(i), m);
            double sum = 0.0;
            for (double v : m) sum += v;
            traj.xi[i] = sum / static_cast<double>(n);
            if (channels.per_particle) std::copy(m.begin(), m.end(), traj.moduli.begin() + i * n);
            if (channels.entropy) traj.entropy[i] = entropy_total_from_moduli(sys, m);
        }
    });
    return traj;
}

/// Xi(t) + S_tot(t) / (2 N ln 2), the sum plotted against Xi and S_tot.
inline double mirror_sum(double xi_value, double entropy_value, std::size_t n_particles) {
    return xi_value + entropy_value / (2.0 * static_cast<double>(n_particles) * std::numbers::ln2);
}

} // namespace decoh
