#pragma once

// Closed-form stability quantities of the discrete consensus scheme:
// contraction factor alpha = E|1 - l0 h - sigma eta|, eta ~ N(0, h); the
// root y* of g_{l0 h}; the admissibility conditions; the Lyapunov-type rate
// Lambda(sigma) and its root sigma*; the initial-data constants C~ and C;
// and a Monte-Carlo estimate of the error function E(beta).

#include "adcbo/ensemble.hpp"
#include "adcbo/errors.hpp"
#include "adcbo/objectives.hpp"
#include "adcbo/rng.hpp"
#include "adcbo/types.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace adcbo {

/// E|X| for X ~ N(mu, s^2):
///   s sqrt(2/pi) exp(-mu^2 / (2 s^2)) + mu erf(mu / (s sqrt 2)).
[[nodiscard]] inline double folded_normal_mean(double mu, double s) {
    if (s < 0.0) throw InputError("folded_normal_mean: s must be >= 0");
    if (s == 0.0) return std::abs(mu);
    const double r = mu / s;
    return s * std::sqrt(2.0 / std::numbers::pi) * std::exp(-0.5 * r * r) +
           mu * std::erf(r / std::numbers::sqrt2);
}

/// g(y) = (1/y) sqrt(pi/2) exp(-y^2/2) - erf(-y/sqrt 2) - 1/(1 - a),  a = lambda0 h.
/// Strictly decreasing on (0, inf) from +inf to 1 - 1/(1 - a) < 0.
[[nodiscard]] inline double g_function(double y, double lambda0h) {
    if (!(y > 0.0)) throw DomainError("g_function: y must be > 0");
    if (!(lambda0h > 0.0 && lambda0h < 1.0)) throw DomainError("g_function: lambda0 h must lie in (0, 1)");
    return std::sqrt(std::numbers::pi / 2.0) * std::exp(-0.5 * y * y) / y +
           std::erf(y / std::numbers::sqrt2) - 1.0 / (1.0 - lambda0h);
}

namespace detail {

/// Bisection on [lo, hi] for a function with f(lo) and f(hi) of opposite
/// sign; stops once the bracket is narrower than tol.
template <class F>
double bisect(F&& f, double lo, double hi, double tol, int max_iter = 400) {
    double flo = f(lo);
    const double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) throw NumericalError("bisect: root is not bracketed");
    for (int it = 0; it < max_iter && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Unique zero of g_{lambda0 h}, to absolute tolerance 1e-10.
[[nodiscard]] inline double y_star(double lambda0h) {
    if (!(lambda0h > 0.0 && lambda0h < 1.0)) throw DomainError("y_star: lambda0 h must lie in (0, 1)");
    const auto g = [lambda0h](double y) { return g_function(y, lambda0h); };
    double lo = 1e-3;
    while (g(lo) <= 0.0) {
        lo *= 0.5;
        if (lo < 1e-300) throw NumericalError("y_star: no positive lower bracket");
    }
    double hi = 1.0;
    while (g(hi) >= 0.0) {
        hi *= 2.0;
        if (hi > 1e6) throw NumericalError("y_star: no negative upper bracket");
    }
    return detail::bisect(g, lo, hi, 1e-10);
}

/// Lambda(sigma) = E log|1 - h lambda0 - sigma sqrt(h) Z|,  Z ~ N(0, 1).
///
/// Adaptive Gauss-Kronrod against the normal density on [-40, 40]; the band
/// z0 +- 1e-4 around the zero z0 = (1 - h lambda0)/(sigma sqrt h) of the
/// argument is integrated analytically from a second-order expansion of the
/// density.
[[nodiscard]] inline double lambda_rate(double sigma, double lambda0, double h) {
    if (!(sigma >= 0.0)) throw InputError("lambda_rate: sigma must be >= 0");
    if (!(h > 0.0)) throw InputError("lambda_rate: h must be > 0");
    const double a = 1.0 - h * lambda0;
    if (sigma == 0.0) {
        if (a == 0.0) throw DomainError("lambda_rate: log 0 at sigma = 0, lambda0 h = 1");
        return std::log(std::abs(a));
    }
    const double b = sigma * std::sqrt(h);
    const double z0 = a / b;
    const double log_b = std::log(b);
    constexpr double delta = 1e-4;
    constexpr double cutoff = 40.0;
    constexpr double tol = 1e-12;
    constexpr double max_error = 1e-7;

    const auto density = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); };

    using Quadrature = boost::math::quadrature::gauss_kronrod<double, 31>;
    double total = 0.0;
    // each side of z0 in the variable t = log|z - z0|, which removes the
    // log singularity from the integrand
    for (double side : {-1.0, 1.0}) {
        const double u_hi = side > 0.0 ? cutoff - z0 : z0 + cutoff;
        const double u_lo = std::max(delta, side > 0.0 ? -cutoff - z0 : z0 - cutoff);
        if (!(u_hi > u_lo)) continue;
        const auto f = [&](double t) {
            const double u = std::exp(t);
            return (log_b + t) * density(z0 + side * u) * u;
        };
        double err = 0.0;
        total += Quadrature::integrate(f, std::log(u_lo), std::log(u_hi), 20, tol, &err);
        if (!(err <= max_error)) throw NumericalError("lambda_rate: quadrature did not converge");
    }

    if (std::abs(z0) < cutoff) {
        // int_{-d}^{d} (log b + log|u|) (phi(z0) + phi''(z0) u^2 / 2) du
        const double phi0 = density(z0);
        const double phi2 = (z0 * z0 - 1.0) * phi0;
        const double d3 = delta * delta * delta;
        const double zeroth = 2.0 * delta * log_b + 2.0 * delta * (std::log(delta) - 1.0);
        const double second = (2.0 * d3 / 3.0) * log_b + 2.0 * (d3 / 3.0 * std::log(delta) - d3 / 9.0);
        total += phi0 * zeroth + 0.5 * phi2 * second;
    }
    return total;
}

/// Root of Lambda in sigma on (0, inf); requires lambda0 h in (0, 1).
[[nodiscard]] inline double sigma_star(double lambda0, double h) {
    const double a = lambda0 * h;
    if (!(a > 0.0 && a < 1.0)) throw DomainError("sigma_star: lambda0 h must lie in (0, 1)");
    const auto rate = [lambda0, h](double s) { return lambda_rate(s, lambda0, h); };
    // Lambda(0) = log(1 - a) < 0 and Lambda ~ log(sigma) for large sigma;
    // walk up until it turns positive.
    double lo = 0.0;
    double hi = 1.0;
    while (rate(hi) <= 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e8) throw NumericalError("sigma_star: no sign change found");
    }
    return detail::bisect(rate, lo, hi, 1e-9);
}

/// C~ = 4 sqrt(3N) max{|sum s_l|, sum s_l^2}.
[[nodiscard]] inline double lem_init_constant(std::size_t n_particles, std::span<const double> s) {
    if (n_particles < 1) throw InputError("lem_init_constant: need N >= 1");
    if (s.empty()) throw InputError("lem_init_constant: empty s");
    double sum = 0.0;
    double sum_sq = 0.0;
    for (double v : s) {
        if (!(v > 0.0)) throw InputError("lem_init_constant: every s_l must be > 0");
        sum += v;
        sum_sq += v * v;
    }
    return 4.0 * std::sqrt(3.0 * static_cast<double>(n_particles)) * std::max(std::abs(sum), sum_sq);
}

struct Admissibility {
    double alpha = 0.0;            // E|1 - l0 h - sigma eta_h|
    std::optional<double> y_star;  // defined when l0 h in (0, 1)
    bool cond_exp_holds = false;   // 0 < l0 h < 1 and sigma < (1 - l0 h)/(y* sqrt h)
    bool cond_para_holds = false;  // (1 - l0 h)^2 + sigma^2 < 1
    double decay_exponent = 0.0;   // 2 l0 - l0^2 h - sigma^2
};

[[nodiscard]] inline Admissibility check_admissibility(const CboParams& p) {
    Admissibility out;
    const double a = p.lambda0 * p.h;
    out.alpha = folded_normal_mean(1.0 - a, p.sigma * std::sqrt(p.h));
    out.cond_para_holds = (1.0 - a) * (1.0 - a) + p.sigma * p.sigma < 1.0;
    out.decay_exponent = 2.0 * p.lambda0 - p.lambda0 * p.lambda0 * p.h - p.sigma * p.sigma;
    if (p.h > 0.0 && a > 0.0 && a < 1.0) {
        out.y_star = y_star(a);
        out.cond_exp_holds = p.sigma < (1.0 - a) / (*out.y_star * std::sqrt(p.h));
    }
    return out;
}

/// C = max{2 C~ / (1 - alpha), 2 sqrt(C~) / (1 - sqrt((1 - l0 h)^2 + sigma^2))}.
/// Requires both admissibility conditions.
[[nodiscard]] inline double cor_ab_constant(const CboParams& p, std::span<const double> s) {
    const auto adm = check_admissibility(p);
    if (!adm.cond_exp_holds || !adm.cond_para_holds)
        throw DomainError("cor_ab_constant: admissibility conditions violated");
    const double a = p.lambda0 * p.h;
    const double c_tilde = lem_init_constant(p.n_particles, s);
    const double rho = std::sqrt((1.0 - a) * (1.0 - a) + p.sigma * p.sigma);
    return std::max(2.0 * c_tilde / (1.0 - adm.alpha), 2.0 * std::sqrt(c_tilde) / (1.0 - rho));
}

struct StabilityReport {
    double alpha = 0.0;
    std::optional<double> y_star;
    bool cond_exp_holds = false;
    bool cond_para_holds = false;
    double lambda_rate = 0.0;
    std::optional<double> sigma_star;
    double c_tilde = 0.0;
    std::optional<double> c_bound;
    double decay_exponent = 0.0;
};

[[nodiscard]] inline StabilityReport stability_report(const CboParams& p, std::span<const double> s) {
    StabilityReport r;
    const auto adm = check_admissibility(p);
    r.alpha = adm.alpha;
    r.y_star = adm.y_star;
    r.cond_exp_holds = adm.cond_exp_holds;
    r.cond_para_holds = adm.cond_para_holds;
    r.decay_exponent = adm.decay_exponent;
    r.lambda_rate = lambda_rate(p.sigma, p.lambda0, p.h);
    const double a = p.lambda0 * p.h;
    if (a > 0.0 && a < 1.0) r.sigma_star = sigma_star(p.lambda0, p.h);
    r.c_tilde = lem_init_constant(p.n_particles, s);
    if (adm.cond_exp_holds && adm.cond_para_holds) r.c_bound = cor_ab_constant(p, s);
    return r;
}

// ---------------------------------------------------------------------------
// Error function E(beta)

namespace detail {

/// -(1/beta) log mean exp(-beta (L_i - min L)), shifted log-sum-exp.
inline double soft_gap(std::span<const double> values, double lmin, double beta) {
    double acc = 0.0;
    for (double v : values) acc += std::exp(-beta * (v - lmin));
    return -std::log(acc / static_cast<double>(values.size())) / beta;
}

template <StaticObjective F>
std::vector<double> sample_objective(const F& objective, std::span<const double> s, std::size_t samples,
                                     RngHandle& rng) {
    std::vector<double> values(samples);
    Vector x(static_cast<Eigen::Index>(s.size()));
    for (auto& v : values) {
        for (Eigen::Index l = 0; l < x.size(); ++l) x[l] = rng.normal(0.0, s[l]);
        v = objective(std::span<const double>(x.data(), x.size()));
        if (!std::isfinite(v)) throw InputError("error diagnostic: non-finite objective sample");
    }
    return values;
}

}  // namespace detail

struct ErrorDiagnostic {
    double beta = 0.0;
    double value = 0.0;
};

/// E(beta) = -essinf L(x0) - (1/beta) log E[exp(-beta L(x0))] - (1/beta) log eps,
/// x0 ~ N(0, diag(s^2)). The essential infimum is approximated by the sample
/// minimum, and the same sample is reused for every beta.
template <StaticObjective F>
[[nodiscard]] std::vector<ErrorDiagnostic> error_diagnostic_E(std::span<const double> beta_grid,
                                                              const F& objective,
                                                              std::span<const double> s, double epsilon,
                                                              std::size_t samples, RngHandle& rng) {
    if (samples < 10'000) throw InputError("error_diagnostic_E: need at least 1e4 samples");
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw InputError("error_diagnostic_E: epsilon must lie in (0, 1]");
    for (double v : s)
        if (!(v > 0.0)) throw InputError("error_diagnostic_E: every s_l must be > 0");
    const auto values = detail::sample_objective(objective, s, samples, rng);
    const double lmin = *std::min_element(values.begin(), values.end());
    std::vector<ErrorDiagnostic> out;
    out.reserve(beta_grid.size());
    for (double beta : beta_grid) {
        if (!(beta > 0.0) || std::isinf(beta)) throw InputError("error_diagnostic_E: beta must be finite and > 0");
        out.push_back({beta, detail::soft_gap(values, lmin, beta) - std::log(epsilon) / beta});
    }
    return out;
}

struct ErrorConditionReport {
    double lhs = 0.0;  // E[e^{-b(L-L#)}] - b C_L K, both sides scaled by e^{b L#}
    double rhs = 0.0;  // eps E[e^{-b(L-L#)}]
    bool feasible = false;
};

/// Evaluates the sufficient condition under which E(beta) bounds the error
///   E[e^{-bL(x0)}] - b C_L e^{-b L#} K >= eps E[e^{-bL(x0)}],
///   K = 2 (l0 + l1) h C~ / (1 - alpha) + 2 sigma sqrt(h C~) / (1 - sqrt((1 - l0 h)^2 + sigma^2)),
/// with the expectation replaced by a Monte-Carlo mean. It reports
/// feasibility only; no parameter is adjusted.
template <StaticObjective F>
[[nodiscard]] ErrorConditionReport error_estimate_condition(const CboParams& p, std::span<const double> s,
                                                            double lipschitz, double lower_bound,
                                                            double epsilon, const F& objective,
                                                            std::size_t samples, RngHandle& rng) {
    const auto adm = check_admissibility(p);
    if (!adm.cond_exp_holds || !adm.cond_para_holds)
        throw DomainError("error_estimate_condition: admissibility conditions violated");
    const double c_tilde = lem_init_constant(p.n_particles, s);
    const double a = p.lambda0 * p.h;
    const double rho = std::sqrt((1.0 - a) * (1.0 - a) + p.sigma * p.sigma);
    const double k = 2.0 * (p.lambda0 + p.lambda1) * p.h * c_tilde / (1.0 - adm.alpha) +
                     2.0 * p.sigma * std::sqrt(p.h * c_tilde) / (1.0 - rho);
    const auto values = detail::sample_objective(objective, s, samples, rng);
    double mean_exp = 0.0;
    for (double v : values) mean_exp += std::exp(-p.beta * (v - lower_bound));
    mean_exp /= static_cast<double>(values.size());
    ErrorConditionReport r;
    r.lhs = mean_exp - p.beta * lipschitz * k;
    r.rhs = epsilon * mean_exp;
    r.feasible = r.lhs >= r.rhs;
    return r;
}

}  // namespace adcbo
