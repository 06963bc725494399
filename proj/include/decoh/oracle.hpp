#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "decoh/error.hpp"
#include "decoh/model.hpp"

// Brute-force reference: the full 2^N state vector, evolved exactly and
// traced down to single particles. Shares no code path with dynamics.hpp.
namespace decoh::oracle {

inline constexpr std::size_t default_particle_cap = 14;

/// 2^N amplitudes; bit k of the index is particle k, 0 = |+>, 1 = |->.
struct StateVector {
    std::size_t n_particles = 0;
    std::vector<complex> amplitudes;

    double norm_squared() const {
        double s = 0.0;
        for (const auto& c : amplitudes) s += std::norm(c);
        return s;
    }
};

/// 2x2 single-particle density matrix, basis order (|+>, |->).
struct ReducedDensityMatrix {
    std::array<complex, 4> m{};

    complex operator()(int r, int c) const { return m[static_cast<std::size_t>(2 * r + c)]; }
    complex& operator()(int r, int c) { return m[static_cast<std::size_t>(2 * r + c)]; }

    double trace() const { return (m[0] + m[3]).real(); }
};

/// Eigenvalue phi(s) of sum_{j<i} g_ij sz_j sz_i on basis state s.
inline double configuration_energy(const CouplingMatrix& g, std::uint64_t s) {
    const std::size_t n = g.size();
    double e = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double sj = ((s >> j) & 1u) ? -1.0 : 1.0;
        for (std::size_t i = j + 1; i < n; ++i) {
            const double si = ((s >> i) & 1u) ? -1.0 : 1.0;
            e += g(i, j) * sj * si;
        }
    }
    return e;
}

/// Product state at t = 0, then the diagonal unitary exp(-i phi(s) t).
inline StateVector evolve(const SpinSystem& sys, double t, std::size_t cap = default_particle_cap) {
    const std::size_t n = sys.size();
    if (n > cap)
        throw DomainError("oracle::evolve: N = " + std::to_string(n) + " exceeds cap " +
                          std::to_string(cap));
    const std::uint64_t dim = std::uint64_t{1} << n;
    StateVector psi;
    psi.n_particles = n;
    psi.amplitudes.resize(dim);
    for (std::uint64_t s = 0; s < dim; ++s) {
        complex amp(1.0, 0.0);
        for (std::size_t k = 0; k < n; ++k)
            amp *= ((s >> k) & 1u) ? sys.amplitudes[k].b : sys.amplitudes[k].a;
        psi.amplitudes[s] = amp * std::polar(1.0, -configuration_energy(sys.couplings, s) * t);
    }
    return psi;
}

/// rho_l(x, x') = sum_e psi(x, e) psi*(x', e).
inline ReducedDensityMatrix reduce(const StateVector& psi, std::size_t l) {
    if (l >= psi.n_particles) throw DomainError("oracle::reduce: particle index out of range");
    ReducedDensityMatrix rho;
    const std::uint64_t bit = std::uint64_t{1} << l;
    for (std::uint64_t s = 0; s < psi.amplitudes.size(); ++s) {
        if (s & bit) continue;
        const complex up = psi.amplitudes[s];
        const complex down = psi.amplitudes[s | bit];
        rho(0, 0) += up * std::conj(up);
        rho(0, 1) += up * std::conj(down);
        rho(1, 0) += down * std::conj(up);
        rho(1, 1) += down * std::conj(down);
    }
    return rho;
}

inline constexpr double negative_eigenvalue_tolerance = 1e-10;

/// Spectrum of a Hermitian 2x2 matrix from its characteristic polynomial,
/// largest first.
inline std::array<double, 2> hermitian_eigenvalues(const ReducedDensityMatrix& rho) {
    const double p = rho(0, 0).real(), q = rho(1, 1).real();
    const double mean = 0.5 * (p + q);
    const double half_gap = std::hypot(0.5 * (p - q), std::abs(rho(0, 1)));
    return {mean + half_gap, mean - half_gap};
}

/// -Tr(rho ln rho) in nats.
inline double vn_entropy(const ReducedDensityMatrix& rho) {
    double s = 0.0;
    for (double lambda : hermitian_eigenvalues(rho)) {
        if (lambda < -negative_eigenvalue_tolerance)
            throw NumericalError("oracle::vn_entropy: negative eigenvalue " + std::to_string(lambda));
        if (lambda > 0.0) s -= lambda * std::log(lambda);
    }
    return s;
}

inline constexpr double purity_tolerance = 1e-10;

/// sum_l S(rho_l) - S(rho). The global state is pure, so S(rho) = 0 once
/// Tr(rho^2) = |psi|^4 = 1 has been confirmed.
inline double mutual_information(const SpinSystem& sys, double t,
                                 std::size_t cap = default_particle_cap) {
    const StateVector psi = evolve(sys, t, cap);
    const double norm2 = psi.norm_squared();
    if (std::abs(norm2 * norm2 - 1.0) > purity_tolerance)
        throw NumericalError("oracle::mutual_information: global state is not pure");
    double total = 0.0;
    for (std::size_t l = 0; l < psi.n_particles; ++l) total += vn_entropy(reduce(psi, l));
    return total;
}

} // namespace decoh::oracle
