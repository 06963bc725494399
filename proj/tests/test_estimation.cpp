#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "decoh/estimation.hpp"

using namespace decoh;

namespace {

Trajectory synthetic(double dt, std::size_t n, auto&& f) {
    Trajectory traj;
    traj.dt = dt;
    traj.n_particles = 1;
    for (std::size_t i = 0; i < n; ++i) traj.xi.push_back(f(static_cast<double>(i) * dt));
    return traj;
}

} // namespace

TEST(TimeAverage, ConstantAndRamp) {
    const auto flat = synthetic(0.05, 2001, [](double) { return 0.5; });
    EXPECT_NEAR(time_average(flat, 50, 100), 0.5, 1e-15);
    const auto ramp = synthetic(0.1, 11, [](double t) { return t; });
    EXPECT_NEAR(time_average(ramp, 0, 1), 0.5, 1e-15);
    // Off-grid endpoints: mean of t over [0.23, 0.71] is 0.47.
    EXPECT_NEAR(time_average(ramp, 0.23, 0.71), 0.47, 1e-14);
}

TEST(TimeAverage, MatchesAnalyticIntegralOfSmoothCurve) {
    const auto traj = synthetic(0.001, 10001, [](double t) { return std::exp(-t); });
    const double exact = (std::exp(-2.0) - std::exp(-7.0)) / 5.0;
    EXPECT_NEAR(time_average(traj, 2, 7), exact, 1e-8);
}

TEST(TimeAverage, RejectsBadWindows) {
    const auto traj = synthetic(0.1, 11, [](double t) { return t; });
    EXPECT_THROW(time_average(traj, 0.5, 0.5), DomainError);
    EXPECT_THROW(time_average(traj, 0.5, 2.0), DomainError);
    EXPECT_THROW(time_average(traj, -1.0, 0.5), DomainError);
}

TEST(FitDecay, RecoversOwnModel) {
    const auto traj = synthetic(0.05, 2001, [](double t) { return decay_model(t, 2.5, 0.1); });
    const auto fit = fit_decay(traj);
    EXPECT_TRUE(fit.converged);
    EXPECT_NEAR(fit.tau, 2.5, 1e-6);
    EXPECT_NEAR(fit.c, 0.1, 1e-6);
    EXPECT_LT(fit.ssr, 1e-10);
    EXPECT_NEAR(fit.window_end, std::min(20 * fit.tau_guess, 50.0), 1e-12);
}

TEST(FitDecay, OpenSystemLimit) {
    const auto traj = synthetic(0.05, 2001, [](double t) { return 0.5 * std::exp(-t / 1.7); });
    const auto fit = fit_decay(traj);
    EXPECT_TRUE(fit.converged);
    EXPECT_NEAR(fit.tau, 1.7, 1e-6);
    EXPECT_NEAR(fit.c, 0.0, 1e-7);
}

TEST(FitDecay, GridOfTausAndAsymptotes) {
    for (double tau : {0.1, 1.0, 10.0})
        for (double c : {0.0, 0.1, 0.4}) {
            const double dt = tau / 20;
            const auto n = static_cast<std::size_t>(std::llround(100.0 / dt)) + 1;
            const auto traj = synthetic(dt, n, [&](double t) { return decay_model(t, tau, c); });
            const auto fit = fit_decay(traj);
            EXPECT_TRUE(fit.converged) << tau << ' ' << c;
            EXPECT_LT(std::abs(fit.tau - tau) / tau, 1e-6) << tau << ' ' << c;
            if (c > 0) EXPECT_LT(std::abs(fit.c - c) / c, 1e-6) << tau << ' ' << c;
            else EXPECT_LT(fit.c, 1e-6);
        }
}

TEST(FitDecay, FixedWindowAndDegenerateWindow) {
    const auto traj = synthetic(0.05, 2001, [](double t) { return decay_model(t, 2.5, 0.1); });
    const auto fixed = fit_decay(traj, {.fixed_end = 10.0});
    EXPECT_EQ(fixed.window_samples, 201u);
    EXPECT_NEAR(fixed.tau, 2.5, 1e-6);
    EXPECT_THROW(fit_decay(traj, {.fixed_end = 0.06}), DomainError);
}

TEST(FitDecay, InitialGuesses) {
    const auto traj = synthetic(0.05, 2001, [](double t) { return decay_model(t, 2.5, 0.2); });
    const auto fit = fit_decay(traj);
    EXPECT_NEAR(fit.c_guess, 0.2, 1e-6);
    // The 1/e crossing of the excess lies at t = tau.
    EXPECT_NEAR(fit.tau_guess, 2.5, 1e-3);
}

TEST(SamplingConfig, Validation) {
    SamplingConfig s;
    EXPECT_EQ(s.n_samples(), 2001u);
    s.t1 = 90;
    s.t2 = 80;
    try {
        validate(s);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("t1 < t2"), std::string::npos);
    }
}

TEST(Ensemble, SingleMemberHasNoDeviation) {
    const SystemConfig cell{.n_particles = 8, .dimension = 3};
    const auto st = run_ensemble(cell, {}, 1, 42);
    ASSERT_EQ(st.runs.size(), 1u);
    EXPECT_EQ(st.tau_mean, st.runs[0].fit.tau);
    EXPECT_EQ(st.level_mean, st.runs[0].mean_level);
    EXPECT_FALSE(st.tau_sd.has_value());
    EXPECT_FALSE(st.level_sd.has_value());
    EXPECT_EQ(st.runs[0].seed, derive_seed(42, 0));
}

TEST(Ensemble, DeterministicAndThreadIndependent) {
    const SystemConfig cell{.n_particles = 12, .dimension = 2};
    const auto a = run_ensemble(cell, {}, 6, 9, 1);
    const auto b = run_ensemble(cell, {}, 6, 9, 4);
    EXPECT_EQ(a.tau_mean, b.tau_mean);
    EXPECT_EQ(a.level_mean, b.level_mean);
    EXPECT_EQ(*a.tau_sd, *b.tau_sd);
    for (std::size_t u = 0; u < 6; ++u) EXPECT_EQ(a.runs[u].fit.tau, b.runs[u].fit.tau);
    EXPECT_GT(*a.tau_sd, 0.0);
    EXPECT_GT(*a.level_sd, 0.0);
}

TEST(Ensemble, EtaRescalesTimeExactly) {
    // With eta doubled, sampling at dt/2 over half the span visits exactly the
    // same phases, so every fitted tau halves.
    const SystemConfig base{.n_particles = 10, .dimension = 3, .eta = 1.0};
    SystemConfig doubled = base;
    doubled.eta = 2.0;
    const SamplingConfig s1{.dt = 0.05, .t_max = 100, .t1 = 50, .t2 = 100, .window = {}};
    const SamplingConfig s2{.dt = 0.025, .t_max = 50, .t1 = 25, .t2 = 50, .window = {.max_end = 25}};
    const auto a = run_ensemble(base, s1, 5, 3);
    const auto b = run_ensemble(doubled, s2, 5, 3);
    for (std::size_t u = 0; u < 5; ++u) {
        EXPECT_NEAR(b.runs[u].fit.tau, a.runs[u].fit.tau / 2, 1e-9 * a.runs[u].fit.tau);
        EXPECT_NEAR(b.runs[u].mean_level, a.runs[u].mean_level, 1e-9);
    }
}

TEST(Ensemble, ThreeDimensionalFiftyParticlesNearReferenceLaw) {
    const double expected = 0.45 / std::pow(50.0, 0.55) + 0.128;
    const auto st = run_ensemble({.n_particles = 50, .dimension = 3}, {}, 30, 2024);
    EXPECT_EQ(st.non_converged, 0u);
    EXPECT_NEAR(st.tau_mean, expected, 0.25 * expected);
}

TEST(PopulationStats, Basic) {
    const std::vector<double> v{1, 2, 3, 4};
    const auto s = population_stats(v);
    EXPECT_DOUBLE_EQ(s.mean, 2.5);
    EXPECT_DOUBLE_EQ(*s.sd, std::sqrt(1.25));
}

TEST(MeanLevel, ExactExponential) {
    std::vector<double> n, v;
    for (double k : {4, 6, 8, 10, 12, 14}) {
        n.push_back(k);
        v.push_back(1.27 * std::exp(-0.43 * k));
    }
    const auto fit = fit_mean_level(n, v);
    EXPECT_NEAR(fit.amplitude, 1.27, 1e-8);
    EXPECT_NEAR(fit.rate, 0.43, 1e-8);
    v[2] = 0.0;
    EXPECT_THROW(fit_mean_level(n, v), DomainError);
}

TEST(DecoherenceLaw, WorkedExample) {
    const auto k = reference_law(3).value;
    const double tau = decoherence_time(k, 100, 1e4, 2.2e6);
    const double oracle = (0.45 / std::pow(100.0, 0.55) + 0.128) / std::cbrt(std::pow(1e4, 2.01)) / 2.2e6;
    EXPECT_NEAR(tau, oracle, 1e-3 * oracle);
    EXPECT_NEAR(tau, 1.555e-10, 0.01e-10);
}

namespace {

EnsembleStats cell(std::size_t n, double rho, double tau, double level) {
    EnsembleStats st;
    st.cell = {.n_particles = n, .dimension = 3, .density = rho};
    st.tau_mean = tau;
    st.level_mean = level;
    st.level_sd = 0.03 * std::exp(-0.3 * static_cast<double>(n));
    return st;
}

} // namespace

TEST(DecoherenceLaw, RecoversSyntheticConstants) {
    const LawConstants k{0.45, 0.55, 0.128, 0.67};
    std::vector<EnsembleStats> sweep;
    for (std::size_t n : {10, 20, 50, 100, 200})
        sweep.push_back(cell(n, 1.0, decoherence_time(k, n, 1.0, 1.0), 1.27 * std::exp(-0.43 * n)));
    for (double rho : {0.5, 2.0, 5.0, 10.0})
        sweep.push_back(cell(50, rho, decoherence_time(k, 50, rho, 1.0), 0.1));
    const auto fit = fit_decoherence_law(sweep);
    EXPECT_TRUE(fit.law_converged);
    EXPECT_NEAR(fit.constants.s, 0.67, 1e-10);
    EXPECT_NEAR(fit.constants.p, 0.45, 1e-5);
    EXPECT_NEAR(fit.constants.q, 0.55, 1e-5);
    EXPECT_NEAR(fit.constants.r, 0.128, 1e-6);
    EXPECT_NEAR(fit.density_r_squared, 1.0, 1e-12);
    EXPECT_TRUE(fit.density_monotone);
    EXPECT_TRUE(fit.size_monotone);
    EXPECT_EQ(fit.reference_n, 50u);
    EXPECT_EQ(fit.reference_density, 1.0);
    ASSERT_TRUE(fit.mean_level && fit.fluctuation);
    EXPECT_NEAR(fit.fluctuation->amplitude, 0.03, 1e-10);
    EXPECT_NEAR(fit.fluctuation->rate, 0.3, 1e-10);
}

TEST(DecoherenceLaw, InsufficientGrid) {
    std::vector<EnsembleStats> sweep;
    for (std::size_t n : {10, 20, 50}) sweep.push_back(cell(n, 1.0, 0.2, 0.1));
    sweep.push_back(cell(50, 2.0, 0.15, 0.1));
    EXPECT_THROW(fit_decoherence_law(sweep), DomainError);
    EXPECT_THROW(fit_decoherence_law({}), DomainError);
}

TEST(DecoherenceLaw, ReferenceTable) {
    EXPECT_DOUBLE_EQ(reference_law(1).value.s, 1.80);
    EXPECT_DOUBLE_EQ(reference_law(3).error.r, 0.003);
    EXPECT_THROW(reference_law(4), DomainError);
}

TEST(Saturation, HalfIsTheEqualityCase) {
    const auto k = reference_law(3).value;
    const double exact = std::pow(k.p / k.r, 1.0 / k.q);
    EXPECT_EQ(saturation_size(0.5, k), static_cast<std::size_t>(std::ceil(exact)));
}

TEST(Saturation, NinetyNinePercentAndMonotone) {
    const auto k = reference_law(3).value;
    const auto n99 = saturation_size(0.99, k);
    EXPECT_GT(n99, 10000u);
    EXPECT_LT(n99, 100000u);
    // Defining property of the smallest N.
    const double bound = (1 / 0.99 - 1) * k.r;
    EXPECT_LE(k.p / std::pow(double(n99), k.q), bound);
    EXPECT_GT(k.p / std::pow(double(n99 - 1), k.q), bound);
    std::size_t prev = 0;
    for (double f : {0.5, 0.7, 0.9, 0.95, 0.99, 0.999}) {
        const auto n = saturation_size(f, k);
        EXPECT_GE(n, prev);
        prev = n;
    }
    EXPECT_THROW(saturation_size(1.0, k), DomainError);
}
