#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "decoh/error.hpp"

namespace decoh {

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    double intercept_se = 0.0;
    double r_squared = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
inline LinearFit linear_regression(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n != y.size()) throw DomainError("linear_regression: x and y differ in length");
    if (n < 2) throw DomainError("linear_regression: need at least two points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw DomainError("linear_regression: x values are all equal");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - fit.intercept - fit.slope * x[i];
        ssr += r * r;
    }
    fit.r_squared = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
    if (n > 2) {
        const double s2 = ssr / static_cast<double>(n - 2);
        fit.slope_se = std::sqrt(s2 / sxx);
        double sum_x2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum_x2 += x[i] * x[i];
        fit.intercept_se = std::sqrt(s2 * sum_x2 / (static_cast<double>(n) * sxx));
    }
    return fit;
}

template <std::size_t P>
using Vec = std::array<double, P>;
template <std::size_t P>
using Mat = std::array<std::array<double, P>, P>;

/// Solves a * x = b by Gaussian elimination with partial pivoting.
/// Returns false when a is numerically singular.
template <std::size_t P>
bool solve_linear(Mat<P> a, Vec<P> b, Vec<P>& x) {
    for (std::size_t col = 0; col < P; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < P; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (!(std::abs(a[pivot][col]) > 0.0)) return false;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < P; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < P; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    for (std::size_t i = P; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < P; ++c) s -= a[i][c] * x[c];
        x[i] = s / a[i][i];
    }
    return true;
}

template <std::size_t P>
bool invert(const Mat<P>& a, Mat<P>& inv) {
    for (std::size_t c = 0; c < P; ++c) {
        Vec<P> e{};
        e[c] = 1.0;
        Vec<P> col{};
        if (!solve_linear<P>(a, e, col)) return false;
        for (std::size_t r = 0; r < P; ++r) inv[r][c] = col[r];
    }
    return true;
}

struct LmOptions {
    int max_iterations = 200;
    double relative_tolerance = 1e-8;
    double initial_damping = 1e-3;
};

template <std::size_t P>
struct LmResult {
    Vec<P> params{};
    Vec<P> standard_errors{};
    double ssr = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Damped Gauss-Newton (Levenberg-Marquardt) with box bounds enforced by
/// projection. `evaluate(params, residuals, jacobian)` fills residuals r_i
/// and rows dr_i/dparams for every observation.
/// Converges when every parameter moves by less than relative_tolerance of
/// its magnitude, or the residual vanishes.
template <std::size_t P, typename Evaluate>
LmResult<P> levenberg_marquardt(Evaluate&& evaluate, Vec<P> start, const Vec<P>& lower,
                                const Vec<P>& upper, const LmOptions& opt = {}) {
    auto project = [&](Vec<P> v) {
        for (std::size_t k = 0; k < P; ++k) v[k] = std::clamp(v[k], lower[k], upper[k]);
        return v;
    };
    std::vector<double> r, r_trial;
    std::vector<Vec<P>> jac, jac_trial;

    LmResult<P> res;
    res.params = project(start);
    evaluate(res.params, r, jac);
    const std::size_t m = r.size();
    if (m < P) throw DomainError("levenberg_marquardt: fewer observations than parameters");
    auto sum_sq = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double e : v) s += e * e;
        return s;
    };
    res.ssr = sum_sq(r);
    double damping = opt.initial_damping;
    double growth = 2.0;

    auto normal_equations = [&](const std::vector<Vec<P>>& j, const std::vector<double>& resid,
                                Mat<P>& jtj, Vec<P>& jtr) {
        jtj = {};
        jtr = {};
        for (std::size_t i = 0; i < resid.size(); ++i)
            for (std::size_t a = 0; a < P; ++a) {
                jtr[a] += j[i][a] * resid[i];
                for (std::size_t b = 0; b < P; ++b) jtj[a][b] += j[i][a] * j[i][b];
            }
    };

    Mat<P> jtj;
    Vec<P> jtr;
    normal_equations(jac, r, jtj, jtr);
    while (res.iterations < opt.max_iterations) {
        ++res.iterations;
        if (res.ssr == 0.0) {
            res.converged = true;
            break;
        }
        Mat<P> damped = jtj;
        for (std::size_t a = 0; a < P; ++a)
            damped[a][a] += damping * std::max(jtj[a][a], std::numeric_limits<double>::min());
        Vec<P> neg_grad;
        for (std::size_t a = 0; a < P; ++a) neg_grad[a] = -jtr[a];
        // Parameters pinned at a bound with the descent pointing outward stay put.
        for (std::size_t a = 0; a < P; ++a) {
            const bool pinned = (res.params[a] <= lower[a] && neg_grad[a] < 0.0) ||
                                (res.params[a] >= upper[a] && neg_grad[a] > 0.0);
            if (!pinned) continue;
            for (std::size_t b = 0; b < P; ++b) damped[a][b] = damped[b][a] = 0.0;
            damped[a][a] = 1.0;
            neg_grad[a] = 0.0;
        }
        Vec<P> step{};
        if (!solve_linear<P>(damped, neg_grad, step)) {
            damping *= 10.0;
            continue;
        }
        Vec<P> trial = res.params;
        for (std::size_t a = 0; a < P; ++a) trial[a] += step[a];
        trial = project(trial);

        bool small_step = true;
        for (std::size_t a = 0; a < P; ++a) {
            const double scale = std::max(std::abs(res.params[a]), 1e-12);
            if (std::abs(trial[a] - res.params[a]) > opt.relative_tolerance * scale) small_step = false;
        }

        evaluate(trial, r_trial, jac_trial);
        const double ssr_trial = sum_sq(r_trial);
        // Gain ratio against the linearised model ||r + J h||^2 (Nielsen's damping update).
        double predicted = 0.0;
        for (std::size_t a = 0; a < P; ++a) {
            const double h = trial[a] - res.params[a];
            double jtj_h = 0.0;
            for (std::size_t b = 0; b < P; ++b) jtj_h += jtj[a][b] * (trial[b] - res.params[b]);
            predicted -= h * (2.0 * jtr[a] + jtj_h);
        }
        const double gain = predicted > 0.0 ? (res.ssr - ssr_trial) / predicted : -1.0;
        if (std::isfinite(ssr_trial) && ssr_trial <= res.ssr && (gain > 0.0 || ssr_trial == res.ssr)) {
            res.params = trial;
            res.ssr = ssr_trial;
            r.swap(r_trial);
            jac.swap(jac_trial);
            normal_equations(jac, r, jtj, jtr);
            const double g = 2.0 * gain - 1.0;
            damping = std::max(damping * std::max(1.0 / 3.0, 1.0 - g * g * g), 1e-15);
            growth = 2.0;
            if (small_step) {
                res.converged = true;
                break;
            }
        } else {
            // No downhill step even with heavy damping: stationary to working precision.
            if (small_step || damping > 1e12) {
                res.converged = true;
                break;
            }
            damping *= growth;
            growth *= 2.0;
        }
    }

    Mat<P> cov;
    if (m > P && invert<P>(jtj, cov)) {
        const double s2 = res.ssr / static_cast<double>(m - P);
        for (std::size_t a = 0; a < P; ++a) res.standard_errors[a] = std::sqrt(std::max(0.0, cov[a][a] * s2));
    } else {
        res.standard_errors.fill(std::numeric_limits<double>::quiet_NaN());
    }
    return res;
}

} // namespace decoh
