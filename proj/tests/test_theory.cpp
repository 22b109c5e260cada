#include <catch2/catch_amalgamated.hpp>

#include "adcbo/theory.hpp"

#include <cmath>
#include <numbers>
#include <vector>

using namespace adcbo;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// erf(x) = 2/sqrt(pi) exp(-x^2) sum_n 2^n x^(2n+1) / (1 3 5 ... (2n+1)); every
// term is positive, so long double keeps ~18 digits for |x| <= 5.
long double erf_series(long double x) {
    const bool neg = x < 0;
    if (neg) x = -x;
    long double term = x;
    long double sum = x;
    for (int n = 1; n < 400; ++n) {
        term *= 2.0L * x * x / (2.0L * n + 1.0L);
        sum += term;
        if (term < 1e-22L * sum) break;
    }
    const long double v = 2.0L / std::sqrt(std::numbers::pi_v<long double>) * std::exp(-x * x) * sum;
    return neg ? -v : v;
}

double mc_folded(double mu, double s, std::size_t n, RngHandle& rng) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += std::abs(rng.normal(mu, s));
    return acc / static_cast<double>(n);
}

}  // namespace

TEST_CASE("erf agrees with a positive-term series at 20 points", "[theory]") {
    for (int k = 0; k < 20; ++k) {
        const double x = -3.9 + 0.41 * k;
        CHECK(std::abs(std::erf(x) - static_cast<double>(erf_series(x))) <= 1e-12);
    }
}

TEST_CASE("folded normal: closed-form special cases", "[theory]") {
    CHECK_THAT(folded_normal_mean(0.0, 1.0), WithinAbs(std::sqrt(2.0 / std::numbers::pi), 1e-15));
    CHECK_THAT(folded_normal_mean(0.0, 1.0), WithinAbs(0.797885, 1e-6));
    CHECK(folded_normal_mean(-3.0, 0.0) == 3.0);
    CHECK_THROWS_AS(folded_normal_mean(1.0, -0.1), InputError);
}

TEST_CASE("folded normal: Monte-Carlo oracle", "[theory]") {
    RngHandle rng(2024);
    for (auto [mu, s] : {std::pair{0.85, 0.6}, std::pair{-1.2, 0.3}, std::pair{0.1, 2.0}, std::pair{2.5, 1.0}}) {
        const double mc = mc_folded(mu, s, 1'000'000, rng);
        CHECK_THAT(folded_normal_mean(mu, s), WithinAbs(mc, 5e-3));
    }
    CHECK(folded_normal_mean(0.85, 0.6) < 1.0);
}

TEST_CASE("folded normal: lower bounds", "[theory]") {
    for (double mu = -2.0; mu <= 2.0; mu += 0.25)
        for (double s = 0.05; s <= 3.0; s += 0.35) {
            const double v = folded_normal_mean(mu, s);
            CHECK(v >= std::abs(mu) - 1e-15);
            CHECK(v >= s * std::sqrt(2.0 / std::numbers::pi) * std::exp(-mu * mu / (2 * s * s)) - 1e-15);
        }
}

TEST_CASE("g function: sign, limits and monotonicity", "[theory]") {
    CHECK(g_function(std::numbers::sqrt2, 0.15) < 0.0);
    CHECK(g_function(1e-6, 0.15) > 1e3);
    CHECK_THAT(g_function(50.0, 0.15), WithinAbs(1.0 - 1.0 / 0.85, 1e-6));
    CHECK_THROWS_AS(g_function(0.0, 0.15), DomainError);
    CHECK_THROWS_AS(g_function(-1.0, 0.15), DomainError);
    for (double a : {0.05, 0.15, 0.3}) {
        double prev = g_function(1e-4, a);
        for (int k = 1; k < 1000; ++k) {
            // g saturates in double precision beyond y ~ 8
            const double y = 1e-4 * std::pow(6e4, k / 999.0);
            const double g = g_function(y, a);
            CHECK(g < prev);
            prev = g;
        }
    }
}

TEST_CASE("y_star: root, ordering and reference values", "[theory]") {
    for (double a : {0.05, 0.15, 0.3}) CHECK_THAT(g_function(y_star(a), a), WithinAbs(0.0, 1e-9));
    CHECK(y_star(0.15) < std::numbers::sqrt2);
    CHECK(y_star(0.05) > y_star(0.3));
    // 30-digit evaluation of the same root
    CHECK_THAT(y_star(0.05), WithinAbs(1.888, 1e-3));
    CHECK_THAT(y_star(0.10), WithinAbs(1.589, 1e-3));
    CHECK_THAT(y_star(0.15), WithinAbs(1.395, 1e-3));
    CHECK_THAT(y_star(0.30), WithinAbs(1.014, 1e-3));
    CHECK_THROWS_AS(y_star(1.0), DomainError);
}

TEST_CASE("admissibility: deterministic and out-of-range cases", "[theory]") {
    CboParams p;
    p.lambda0 = 5.0;
    p.h = 0.1;
    p.sigma = 0.0;
    auto adm = check_admissibility(p);
    CHECK(adm.cond_exp_holds);
    CHECK(adm.cond_para_holds);
    CHECK_THAT(adm.alpha, WithinAbs(0.5, 1e-15));

    p.lambda0 = 15.0;
    adm = check_admissibility(p);
    CHECK_FALSE(adm.cond_exp_holds);
    CHECK_FALSE(adm.y_star.has_value());
}

TEST_CASE("admissibility: the sqrt(2) recipe", "[theory]") {
    // sigma sqrt(h) just below (1 - l0 h)/sqrt(2) satisfies the exponential
    // condition because y*(l0 h) < sqrt(2) ...
    CboParams p;
    p.lambda0 = 1.5;
    p.h = 0.1;
    p.sigma = 0.99 * (0.85 / std::numbers::sqrt2) / std::sqrt(0.1);
    CHECK(check_admissibility(p).cond_exp_holds);
    CHECK(check_admissibility(p).alpha < 1.0);

    // ... but at l0 h = 0.1 the limit is 0.9 / y*(0.1) = 0.566, so
    // sigma sqrt(h) = 0.594 does not.
    p.lambda0 = 1.0;
    p.sigma = 0.6 / std::sqrt(0.1) * 0.99;
    CHECK_FALSE(check_admissibility(p).cond_exp_holds);
    CHECK(0.9 / y_star(0.1) < 0.6 * 0.99);
}

TEST_CASE("admissibility: exponential condition implies alpha < 1", "[theory]") {
    RngHandle rng(17);
    int admissible = 0;
    for (int k = 0; k < 1000; ++k) {
        CboParams p;
        p.h = rng.uniform(0.01, 1.0);
        p.lambda0 = rng.uniform(0.01, 0.999) / p.h;
        const double limit = (1.0 - p.lambda0 * p.h) / (y_star(p.lambda0 * p.h) * std::sqrt(p.h));
        p.sigma = rng.uniform(0.0, 0.9999) * limit;
        const auto adm = check_admissibility(p);
        REQUIRE(adm.cond_exp_holds);
        CHECK(adm.alpha < 1.0);
        ++admissible;
    }
    CHECK(admissible == 1000);
}

TEST_CASE("lambda rate: reference values", "[theory]") {
    CHECK_THAT(lambda_rate(0.0, 1.0, 0.1), WithinAbs(std::log(0.9), 1e-15));
    CHECK_THAT(lambda_rate(0.0, 1.0, 0.1), WithinAbs(-0.10536, 1e-5));
    // 30-digit quadrature of the same expectation
    CHECK_THAT(lambda_rate(1.0, 1.0, 0.1), WithinAbs(-0.18662, 1e-5));
    CHECK_THAT(lambda_rate(2.0, 1.0, 0.1), WithinAbs(-0.34718, 1e-5));
    CHECK(std::abs(lambda_rate(5.17, 1.0, 0.1)) < 0.01);
}

TEST_CASE("lambda rate: large-sigma asymptote", "[theory]") {
    const double target = -(std::numbers::egamma + std::numbers::ln2) / 2.0;
    CHECK_THAT(target, WithinAbs(-0.63518, 1e-5));
    const double s = 1000.0;
    CHECK_THAT(lambda_rate(s, 1.0, 0.1) - std::log(s * std::sqrt(0.1)), WithinAbs(target, 1e-3));
}

TEST_CASE("lambda rate: Monte-Carlo oracle", "[theory]") {
    RngHandle rng(99);
    for (double sigma : {0.7, 3.0, 6.5}) {
        const std::size_t n = 1'000'000;
        double acc = 0.0, acc2 = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double v = std::log(std::abs(0.9 - sigma * std::sqrt(0.1) * rng.normal()));
            acc += v;
            acc2 += v * v;
        }
        const double mean = acc / n;
        const double se = std::sqrt((acc2 / n - mean * mean) / n);
        CHECK(std::abs(lambda_rate(sigma, 1.0, 0.1) - mean) < 4.0 * se);
    }
}

TEST_CASE("lambda rate: one sign change on (0, 20)", "[theory]") {
    int changes = 0;
    double prev = lambda_rate(0.05, 1.0, 0.1);
    for (double s = 0.1; s < 20.0; s += 0.05) {
        const double v = lambda_rate(s, 1.0, 0.1);
        if ((v > 0.0) != (prev > 0.0)) ++changes;
        prev = v;
    }
    CHECK(changes == 1);
}

TEST_CASE("sigma star", "[theory]") {
    const double s = sigma_star(1.0, 0.1);
    CHECK_THAT(s, WithinAbs(5.17, 0.05));
    CHECK_THAT(s, WithinAbs(5.1660, 1e-3));
    CHECK_THAT(lambda_rate(s, 1.0, 0.1), WithinAbs(0.0, 1e-5));
    // With lambda0 fixed, sigma* falls as lambda0 h -> 1 ...
    CHECK(sigma_star(1.0, 0.5) > sigma_star(1.0, 0.9));
    // ... but in units of sigma sqrt(h) the root rises towards exp((gamma + ln 2)/2).
    const double limit = std::exp((std::numbers::egamma + std::numbers::ln2) / 2.0);
    CHECK(sigma_star(5.0, 0.1) * std::sqrt(0.1) < sigma_star(9.0, 0.1) * std::sqrt(0.1));
    CHECK(sigma_star(9.0, 0.1) * std::sqrt(0.1) < limit);
    CHECK_THAT(sigma_star(9.99, 0.1) * std::sqrt(0.1), WithinAbs(limit, 1e-2));
    CHECK_THROWS_AS(sigma_star(10.0, 0.1), DomainError);
}

TEST_CASE("initial-data constant", "[theory]") {
    CHECK_THAT(lem_init_constant(1, std::vector<double>{1.0}), WithinRel(4.0 * std::sqrt(3.0), 1e-15));
    CHECK_THAT(lem_init_constant(1, std::vector<double>{1.0}), WithinAbs(6.9282, 1e-4));
    CHECK_THAT(lem_init_constant(3, std::vector<double>{1.0, 1.0}), WithinRel(24.0, 1e-15));
    const double base = lem_init_constant(7, std::vector<double>{2.0, 3.0});
    CHECK_THAT(lem_init_constant(7, std::vector<double>{4.0, 6.0}), WithinRel(4.0 * base, 1e-15));
    CHECK_THROWS_AS(lem_init_constant(2, std::vector<double>{1.0, 0.0}), InputError);
}

TEST_CASE("corollary constant: noise-free closed form", "[theory]") {
    CboParams p;
    p.lambda0 = 2.0;
    p.h = 0.1;
    p.n_particles = 4;
    const std::vector<double> s{0.5, 1.5};
    const double ct = lem_init_constant(4, s);
    const double expected = std::max(2.0 * ct / 0.2, 2.0 * std::sqrt(ct) / 0.2);
    CHECK_THAT(cor_ab_constant(p, s), WithinRel(expected, 1e-12));
    p.sigma = 2.0;
    CHECK_THROWS_AS(cor_ab_constant(p, s), DomainError);
}

TEST_CASE("corollary constant bounds the sampled A_n and B_n", "[theory]") {
    CboParams p;
    p.lambda0 = 1.0;
    p.h = 0.1;
    p.sigma = 0.4;
    p.beta = 10.0;
    p.n_particles = 10;
    p.dim = 3;
    const std::vector<double> s{1.0, 1.0, 1.0};
    const double c = cor_ab_constant(p, s);
    const int reps = 500;
    const int steps = 1000;
    std::vector<double> a(steps + 1, 0.0), b(steps + 1, 0.0);
    const Rastrigin f{3};
    for (int r = 0; r < reps; ++r) {
        RngHandle rng(derive_seed(3, static_cast<std::uint64_t>(r)));
        Ensemble e = gaussian_ensemble(10, s, rng);
        double sa = 0.0, sb = 0.0;
        for (int n = 0; n <= steps; ++n) {
            const auto rec = ad_cbo_step_detailed(e, p, f, rng);
            for (Eigen::Index i = 0; i < 10; ++i) {
                const Vector diff = e.positions.row(i).transpose() - rec.consensus;
                sa += diff.norm() / 10.0;
                sb += diff.cwiseProduct(rec.noise.row(0).transpose()).norm() / 10.0;
            }
            a[n] += sa / reps;
            b[n] += sb / reps;
            e = rec.ensemble;
        }
    }
    for (int n = 0; n <= steps; n += 50) {
        CHECK(a[n] <= c);
        CHECK(b[n] <= std::sqrt(p.h) * c);
    }
}

TEST_CASE("stability report", "[theory]") {
    CboParams p;
    p.lambda0 = 1.0;
    p.h = 0.1;
    p.sigma = 0.4;
    p.n_particles = 5;
    const std::vector<double> s{1.0, 2.0};
    const auto r = stability_report(p, s);
    CHECK(r.cond_exp_holds);
    CHECK(r.cond_para_holds);
    CHECK(r.alpha < 1.0);
    REQUIRE(r.sigma_star.has_value());
    CHECK_THAT(*r.sigma_star, WithinAbs(5.166, 1e-3));
    REQUIRE(r.c_bound.has_value());
    CHECK_THAT(r.decay_exponent, WithinAbs(2.0 - 0.1 - 0.16, 1e-14));
    CHECK(r.lambda_rate < 0.0);

    p.sigma = 3.0;
    const auto q = stability_report(p, s);
    CHECK_FALSE(q.cond_para_holds);
    CHECK_FALSE(q.c_bound.has_value());
}

TEST_CASE("error diagnostic: constant objective", "[theory]") {
    RngHandle rng(1);
    const std::vector<double> betas{1.0, 10.0, 100.0};
    const std::vector<double> s{1.0, 1.0};
    const auto flat = [](std::span<const double>) { return 3.5; };
    const auto e = error_diagnostic_E(betas, flat, s, 0.2, 10'000, rng);
    for (const auto& d : e) CHECK(d.value == -std::log(0.2) / d.beta);
    const auto unit = error_diagnostic_E(betas, flat, s, 1.0, 10'000, rng);
    for (const auto& d : unit) CHECK(d.value == 0.0);
    CHECK_THROWS_AS(error_diagnostic_E(betas, flat, s, 0.2, 100, rng), InputError);
}

TEST_CASE("error diagnostic: Rastrigin decreases over two decades", "[theory]") {
    RngHandle rng(5);
    const std::vector<double> betas{10.0, 100.0, 1000.0};
    const std::vector<double> s(15, 1.0);
    const auto e = error_diagnostic_E(betas, Rastrigin{15}, s, 0.5, 100'000, rng);
    CHECK(e[2].value < e[0].value);
    CHECK(e[1].value < e[0].value);
}

TEST_CASE("error condition report is computed, not enforced", "[theory]") {
    CboParams p;
    p.lambda0 = 1.0;
    p.h = 0.1;
    p.sigma = 0.3;
    p.beta = 1.0;
    p.n_particles = 5;
    RngHandle rng(2);
    const std::vector<double> s{1.0};
    const auto rep = error_estimate_condition(p, s, 1.0, 0.0, 0.5, Rastrigin{1}, 10'000, rng);
    CHECK(std::isfinite(rep.lhs));
    CHECK(std::isfinite(rep.rhs));
    CHECK(rep.feasible == (rep.lhs >= rep.rhs));
}
