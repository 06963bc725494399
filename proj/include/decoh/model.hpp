#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "decoh/error.hpp"
#include "decoh/rng.hpp"

namespace decoh {

using complex = std::complex<double>;

enum class AmplitudeMode { equal_superposition, random_complex };
enum class CouplingMode { potential, uniform_random };

inline std::string_view to_string(AmplitudeMode m) {
    return m == AmplitudeMode::equal_superposition ? "equal" : "random";
}

inline std::string_view to_string(CouplingMode m) {
    return m == CouplingMode::potential ? "potential" : "uniform";
}

/// Point in D-space, D <= 3. Unused trailing coordinates stay zero.
struct Point {
    double x[3] = {0.0, 0.0, 0.0};

    friend bool operator==(const Point&, const Point&) = default;
};

/// Qubit amplitudes a|+> + b|->.
struct Amplitude {
    complex a;
    complex b;

    double coherence_modulus() const { return std::abs(a * std::conj(b)); }

    friend bool operator==(const Amplitude&, const Amplitude&) = default;
};

/// Dense symmetric coupling matrix G, zero diagonal, row-major.
class CouplingMatrix {
public:
    CouplingMatrix() = default;
    explicit CouplingMatrix(std::size_t n) : n_(n), g_(n * n, 0.0) {}

    std::size_t size() const noexcept { return n_; }

    double operator()(std::size_t i, std::size_t j) const { return g_[i * n_ + j]; }

    /// Sets g_ij and g_ji together.
    void set(std::size_t i, std::size_t j, double value) {
        g_[i * n_ + j] = value;
        g_[j * n_ + i] = value;
    }

    const double* row(std::size_t i) const { return g_.data() + i * n_; }

    CouplingMatrix scaled(double factor) const {
        CouplingMatrix out = *this;
        for (double& v : out.g_) v *= factor;
        return out;
    }

    friend bool operator==(const CouplingMatrix&, const CouplingMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<double> g_;
};

/// Generation parameters of one random spin system.
struct SystemConfig {
    std::size_t n_particles = 2;
    int dimension = 3;
    double density = 1.0;
    double eta = 1.0;
    double epsilon = 1.0;
    AmplitudeMode amplitude_mode = AmplitudeMode::equal_superposition;
    CouplingMode coupling_mode = CouplingMode::potential;
    std::uint64_t seed = 0;

    friend bool operator==(const SystemConfig&, const SystemConfig&) = default;
};

/// N fixed spin-1/2 particles with pairwise zz couplings. Immutable once built.
struct SpinSystem {
    int dimension = 3;
    std::vector<Point> positions;
    std::vector<Amplitude> amplitudes;
    CouplingMatrix couplings;
    double eta = 1.0;
    double epsilon = 1.0;

    std::size_t size() const noexcept { return amplitudes.size(); }

    /// (1/N) sum_k |a_k b_k*|, the value of Xi at t = 0.
    double initial_coherence() const {
        double sum = 0.0;
        for (const auto& amp : amplitudes) sum += amp.coherence_modulus();
        return sum / static_cast<double>(size());
    }

    friend bool operator==(const SpinSystem&, const SpinSystem&) = default;
};

inline void validate(const SystemConfig& cfg) {
    if (cfg.n_particles < 1) throw DomainError("n_particles must be >= 1");
    if (cfg.dimension < 1 || cfg.dimension > 3) throw DomainError("dimension must be 1, 2 or 3");
    if (!(cfg.density > 0.0) || !std::isfinite(cfg.density)) throw DomainError("density must be > 0");
    if (!(cfg.eta > 0.0) || !std::isfinite(cfg.eta)) throw DomainError("eta must be > 0");
    if (!(cfg.epsilon > 0.0) || !std::isfinite(cfg.epsilon)) throw DomainError("epsilon must be > 0");
}

/// Side of the D-cube holding N particles at density rho: (N / rho)^(1/D).
inline double box_side(std::size_t n_particles, double density, int dimension) {
    if (n_particles < 1) throw DomainError("box_side: N must be >= 1");
    if (!(density > 0.0)) throw DomainError("box_side: density must be > 0");
    if (dimension < 1 || dimension > 3) throw DomainError("box_side: dimension must be 1, 2 or 3");
    const double volume = static_cast<double>(n_particles) / density;
    switch (dimension) {
    case 1: return volume;
    case 3: return std::cbrt(volume);
    default: return std::sqrt(volume);
    }
}

inline double distance(const Point& p, const Point& q, int dimension) {
    double s = 0.0;
    for (int k = 0; k < dimension; ++k) {
        const double d = p.x[k] - q.x[k];
        s += d * d;
    }
    return std::sqrt(s);
}

inline constexpr double min_separation_fraction = 1e-9;
inline constexpr int max_placement_attempts = 1000;

/// Uniform placement in the open box [0, l)^D. A particle closer than
/// 1e-9 * l to an already placed one is redrawn, at most 1000 times.
inline std::vector<Point> place_particles(const SystemConfig& cfg, CounterRng& rng) {
    validate(cfg);
    const double side = box_side(cfg.n_particles, cfg.density, cfg.dimension);
    const double min_sep = min_separation_fraction * side;
    std::vector<Point> pts;
    pts.reserve(cfg.n_particles);
    for (std::size_t i = 0; i < cfg.n_particles; ++i) {
        for (int attempt = 0;; ++attempt) {
            if (attempt == max_placement_attempts)
                throw NumericalError("place_particles: no admissible position for particle " +
                                     std::to_string(i) + " after " +
                                     std::to_string(max_placement_attempts) + " attempts");
            Point p;
            for (int k = 0; k < cfg.dimension; ++k) p.x[k] = side * rng.uniform();
            bool clear = true;
            for (const auto& q : pts) {
                if (distance(p, q, cfg.dimension) < min_sep) {
                    clear = false;
                    break;
                }
            }
            if (clear) {
                pts.push_back(p);
                break;
            }
        }
    }
    return pts;
}

/// g_ij = eta / |r_i - r_j|^epsilon.
inline CouplingMatrix build_couplings(const std::vector<Point>& positions, int dimension, double eta,
                                      double epsilon) {
    const std::size_t n = positions.size();
    CouplingMatrix g(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double r = distance(positions[i], positions[j], dimension);
            if (!(r > 0.0))
                throw NumericalError("build_couplings: particles " + std::to_string(i) + " and " +
                                     std::to_string(j) + " coincide");
            const double value = epsilon == 1.0 ? eta / r : eta / std::pow(r, epsilon);
            if (!std::isfinite(value))
                throw NumericalError("build_couplings: non-finite coupling g_" + std::to_string(i) +
                                     std::to_string(j));
            g.set(i, j, value);
        }
    }
    return g;
}

/// |a|^2 uniform on [0,1], both phases uniform on [0, 2pi).
inline Amplitude random_amplitude(CounterRng& rng) {
    const double p = rng.uniform();
    const double phase_a = rng.phase();
    const double phase_b = rng.phase();
    return {std::polar(std::sqrt(p), phase_a), std::polar(std::sqrt(1.0 - p), phase_b)};
}

/// Draw order from the seeded stream: positions, then couplings (uniform mode
/// only), then amplitudes (random mode only).
inline SpinSystem build_system(const SystemConfig& cfg) {
    validate(cfg);
    CounterRng rng(cfg.seed);
    SpinSystem sys;
    sys.dimension = cfg.dimension;
    sys.eta = cfg.eta;
    sys.epsilon = cfg.epsilon;
    sys.positions = place_particles(cfg, rng);

    const std::size_t n = cfg.n_particles;
    if (cfg.coupling_mode == CouplingMode::potential) {
        sys.couplings = build_couplings(sys.positions, cfg.dimension, cfg.eta, cfg.epsilon);
    } else {
        sys.couplings = CouplingMatrix(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) sys.couplings.set(i, j, rng.uniform());
    }

    sys.amplitudes.resize(n);
    if (cfg.amplitude_mode == AmplitudeMode::equal_superposition) {
        const double h = std::sqrt(0.5);
        for (auto& amp : sys.amplitudes) amp = {complex(h, 0.0), complex(h, 0.0)};
    } else {
        for (auto& amp : sys.amplitudes) amp = random_amplitude(rng);
    }
    return sys;
}

/// Hand-assembled system, mainly for tests and examples.
inline SpinSystem make_system(CouplingMatrix couplings, std::vector<Amplitude> amplitudes) {
    if (couplings.size() != amplitudes.size())
        throw DomainError("make_system: coupling matrix and amplitude count differ");
    for (const auto& amp : amplitudes) {
        const double norm = std::norm(amp.a) + std::norm(amp.b);
        if (std::abs(norm - 1.0) > 1e-12) throw DomainError("make_system: amplitudes not normalised");
    }
    SpinSystem sys;
    sys.positions.resize(amplitudes.size());
    sys.couplings = std::move(couplings);
    sys.amplitudes = std::move(amplitudes);
    return sys;
}

inline std::vector<Amplitude> equal_amplitudes(std::size_t n) {
    const double h = std::sqrt(0.5);
    return std::vector<Amplitude>(n, Amplitude{complex(h, 0.0), complex(h, 0.0)});
}

} // namespace decoh
