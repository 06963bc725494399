#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "decoh/recurrence.hpp"

using namespace decoh;

namespace {

SpinSystem from_couplings(std::size_t n, auto&& g) {
    CouplingMatrix m(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) m.set(i, j, g(i, j));
    return make_system(std::move(m), equal_amplitudes(n));
}

} // namespace

TEST(ParticleFrequency, DirectFormula) {
    // Particle 0 couples with strengths 1, 1/3, 1/2.
    const double g0[] = {0, 1.0, 1.0 / 3, 0.5};
    const auto sys = from_couplings(4, [&](std::size_t i, std::size_t j) { return i == 0 ? g0[j] : 0.1 * (i + j); });
    const auto f = particle_frequency(sys, 0);
    EXPECT_NEAR(f.omega, 1.0 / 3, 1e-15);
    EXPECT_FALSE(f.degenerate);
}

TEST(ParticleFrequency, TiesAreFlagged) {
    const auto sys = from_couplings(4, [](std::size_t i, std::size_t) { return i == 0 ? 0.7 : 0.2; });
    const auto f = particle_frequency(sys, 0);
    EXPECT_EQ(f.omega, 0.0);
    EXPECT_TRUE(f.degenerate);
    EXPECT_THROW(particle_frequency(from_couplings(2, [](auto, auto) { return 1.0; }), 0), DomainError);
    EXPECT_THROW(particle_frequency(sys, 9), DomainError);
}

TEST(ParticleFrequency, MatchesQuadraticScan) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto sys = build_system({.n_particles = 15, .dimension = int(1 + seed % 3), .seed = seed});
        for (std::size_t i = 0; i < 15; ++i) {
            double best = INFINITY;
            for (std::size_t j = 0; j < 15; ++j)
                for (std::size_t k = 0; k < 15; ++k)
                    if (j != i && k != i && j != k) best = std::min(best, std::abs(sys.couplings(i, j) - sys.couplings(i, k)));
            EXPECT_EQ(particle_frequency(sys, i).omega, 2 * best);
        }
    }
}

TEST(RecurrenceTime, HandBuiltFrequencies) {
    const auto est = recurrence_from_frequencies({0.2, 0.5, 0.9});
    EXPECT_NEAR(est.period, 2 * std::numbers::pi / 0.3, 1e-12);
    EXPECT_NEAR(est.period, 20.944, 1e-3);
    EXPECT_EQ(est.first, 0u);
    EXPECT_EQ(est.second, 1u);
    EXPECT_FALSE(est.degenerate);
}

TEST(RecurrenceTime, DegenerateSentinel) {
    const auto est = recurrence_from_frequencies({0.4, 0.1, 0.4});
    EXPECT_TRUE(est.degenerate);
    EXPECT_TRUE(std::isinf(est.period));
    EXPECT_EQ(est.first, 0u);
    EXPECT_EQ(est.second, 2u);
}

TEST(RecurrenceTime, MatchesQuadraticScanOverOmegas) {
    const auto sys = build_system({.n_particles = 30, .dimension = 2, .seed = 5});
    const auto est = recurrence_time(sys);
    double best = INFINITY;
    for (std::size_t i = 0; i < 30; ++i)
        for (std::size_t k = i + 1; k < 30; ++k) best = std::min(best, std::abs(est.omegas[i] - est.omegas[k]));
    EXPECT_DOUBLE_EQ(est.period, 2 * std::numbers::pi / best);
    EXPECT_DOUBLE_EQ(std::abs(est.omegas[est.first] - est.omegas[est.second]), best);
}

TEST(RecurrenceTime, ScaleCovariance) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto sys = build_system({.n_particles = 12, .dimension = 3, .seed = seed});
        // lambda = 4 is a power of two, so the rescaling is exact in floating point.
        auto scaled = sys;
        scaled.couplings = sys.couplings.scaled(4.0);
        EXPECT_EQ(recurrence_time(scaled).period, recurrence_time(sys).period / 4.0);
        auto odd = sys;
        odd.couplings = sys.couplings.scaled(3.0);
        EXPECT_NEAR(recurrence_time(odd).period, recurrence_time(sys).period / 3.0,
                    1e-9 * recurrence_time(sys).period);
    }
}

TEST(RecurrenceTime, GapBound) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto sys = build_system({.n_particles = 8, .dimension = int(1 + seed % 3), .seed = seed});
        double lo = INFINITY, hi = 0;
        for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t j = i + 1; j < 8; ++j) {
                lo = std::min(lo, sys.couplings(i, j));
                hi = std::max(hi, sys.couplings(i, j));
            }
        const auto est = recurrence_time(sys);
        if (!est.degenerate) {
            EXPECT_GE(est.period, 2 * std::numbers::pi / (2 * hi - 2 * lo));
        }
    }
}

TEST(RecurrenceStats, DeterministicAndThreadIndependent) {
    const SystemConfig cell{.n_particles = 10, .dimension = 1};
    const auto a = recurrence_stats(cell, 40, 77, 1);
    const auto b = recurrence_stats(cell, 40, 77, 3);
    EXPECT_EQ(a.periods, b.periods);
    EXPECT_EQ(a.mean, b.mean);
    EXPECT_EQ(a.median, b.median);
    EXPECT_EQ(a.degenerate, 0u);
    EXPECT_GT(a.sd, 0.0);
    EXPECT_NEAR(a.log10_of_mean(), std::log10(a.mean), 1e-15);
    EXPECT_LE(a.log10_mean, a.log10_of_mean()); // Jensen
    EXPECT_THROW(recurrence_stats(cell, 1, 0), DomainError);
}

TEST(RecurrenceStats, DensityIsACommonFactor) {
    // With epsilon = 1 the couplings scale as rho^(1/D); in 1D doubling rho
    // doubles every coupling of the same placement draw.
    const SystemConfig base{.n_particles = 10, .dimension = 1, .density = 1.0};
    SystemConfig dense = base;
    dense.density = 2.0;
    const auto a = recurrence_stats(base, 20, 3);
    const auto b = recurrence_stats(dense, 20, 3);
    for (std::size_t s = 0; s < 20; ++s) EXPECT_NEAR(b.periods[s], a.periods[s] / 2, 1e-9 * a.periods[s]);
}
