#pragma once

// Hindsight constant rebalanced portfolio and empirical regret of an OPS run.
//
//   R_M = (1/M) sum_n log(1 + r_n . x#) - (1/M) sum_n log(1 + r_n . xbar_n)
//
// with r_n the price relative. Since log(a) - log(b) <= a/b - 1, the chain
// bound (1/M) sum_n (j_n . x#)/(j_n . xbar_n) - 1, j_n = 1 + r_n, dominates
// R_M on every path. The growth-rate form log(r . x) is reported separately.

#include "adcbo/errors.hpp"
#include "adcbo/market_data.hpp"
#include "adcbo/ops.hpp"
#include "adcbo/rng.hpp"
#include "adcbo/simplex.hpp"
#include "adcbo/types.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

namespace adcbo {

struct CrpOptions {
    double shift = 1.0;  // objective mean log(shift + r . x); 1 for regret, 0 for growth
    std::size_t iterations = 10'000;
    std::size_t restarts = 20;
    std::uint64_t seed = 0;
};

struct CrpResult {
    SimplexPoint portfolio;
    double value = 0.0;                 // (1/M) sum log(shift + r_n . x)
    std::vector<double> restart_values;  // best value reached by each restart
};

/// (1/M) sum_n log(shift + r_n . x)
[[nodiscard]] inline double crp_objective(const Matrix& relatives, const Vector& x, double shift) {
    double acc = 0.0;
    for (Eigen::Index n = 0; n < relatives.rows(); ++n) {
        const double g = shift + relatives.row(n).dot(x.transpose());
        if (!(g > 0.0) || !std::isfinite(g)) throw NumericalError("hindsight_crp: log argument not positive");
        acc += std::log(g);
    }
    return acc / static_cast<double>(relatives.rows());
}

/// Projected-gradient ascent on sum_n log(shift + r_n . x) with step
/// 0.1/sqrt(k). Restart 0 starts from the uniform portfolio, the others from
/// Dirichlet(1) draws. The vertices are also scored, so the result is never
/// worse than any of them.
[[nodiscard]] inline CrpResult hindsight_crp(const Matrix& relatives, const CrpOptions& opt = {}) {
    if (relatives.rows() < 1 || relatives.cols() < 1) throw InputError("hindsight_crp: empty return matrix");
    if (!relatives.allFinite() || (relatives.array() <= 0.0).any())
        throw InputError("hindsight_crp: relatives must be positive and finite");
    if (opt.restarts < 1 || opt.iterations < 1) throw InputError("hindsight_crp: need restarts and iterations");
    const Eigen::Index d = relatives.cols();
    RngHandle rng(opt.seed);

    CrpResult out;
    out.value = -std::numeric_limits<double>::infinity();
    auto consider = [&](const Vector& x, double v) {
        if (v > out.value) {
            out.value = v;
            out.portfolio.weights = x;
        }
    };

    Vector x(d), grad(d);
    for (std::size_t k = 0; k < opt.restarts; ++k) {
        x = k == 0 ? Vector::Constant(d, 1.0 / static_cast<double>(d))
                   : uniform_simplex_point(static_cast<std::size_t>(d), rng);
        double best = crp_objective(relatives, x, opt.shift);
        Vector best_x = x;
        for (std::size_t it = 1; it <= opt.iterations; ++it) {
            grad.setZero();
            for (Eigen::Index n = 0; n < relatives.rows(); ++n) {
                const auto row = relatives.row(n);
                grad += row.transpose() / (opt.shift + row.dot(x.transpose()));
            }
            x += (0.1 / std::sqrt(static_cast<double>(it))) * grad;
            project_simplex_inplace(std::span<double>(x.data(), static_cast<std::size_t>(d)));
            const double v = crp_objective(relatives, x, opt.shift);
            if (v > best) {
                best = v;
                best_x = x;
            }
        }
        out.restart_values.push_back(best);
        consider(best_x, best);
    }
    for (Eigen::Index l = 0; l < d; ++l) {
        Vector e = Vector::Zero(d);
        e[l] = 1.0;
        consider(e, crp_objective(relatives, e, opt.shift));
    }
    return out;
}

[[nodiscard]] inline CrpResult hindsight_crp(const ReturnSeries& r, const CrpOptions& opt = {}) {
    return hindsight_crp(r.relatives, opt);
}

// ---------------------------------------------------------------------------
// Regret

struct RegretComponents {
    std::size_t step = 0;  // run step n >= 1
    double i11 = 0.0;      // j_n . x_n#     / (j_n . xbar_n) - j_{n-1} . x_{n-1}# / (j_{n-1} . xbar_n)
    double i12 = 0.0;      // j_{n-1} . x_{n-1}# / (j_{n-1} . xbar_n) - 1
    double i13 = 0.0;      // j_n . x# / (j_n . xbar_n) - j_n . x_n# / (j_n . xbar_n)
};

/// Sample averages of the four terms of the expectation-level bound. These
/// are empirical estimates only; nothing is asserted about them.
struct RegretBoundEstimates {
    double market_dispersion = 0.0;  // sqrt(2 Var[j_n . x_n#])
    double market_range = 0.0;       // (jmax - jmin) sqrt(d) / jmin * mean j_n . x_n#
    double leader_gap = 0.0;         // mean j_{n-1} . (x_{n-1}# - x_n^{k_{n-1}})
    double consensus_gap = 0.0;      // mean (1 - l0 h) j_{n-1} . (x_{n-1}^{k_{n-1}} - xbar_n)
    double total = 0.0;              // (sum of the above) / jmin
};

struct RegretReport {
    std::size_t horizon = 0;  // M
    double regret = 0.0;      // at xbar_n, log(1 + r . x) form
    double regret_best = 0.0; // at x_n^best
    double chain_bound = 0.0;
    double chain_bound_best = 0.0;
    double growth_gap = 0.0;  // (1/M) sum log(r . x#) - log(r . xbar_n)
    SimplexPoint hindsight_portfolio;
    double hindsight_value = 0.0;  // (1/M) sum log(1 + r_n . x#)
    std::vector<RegretComponents> components;
    double mean_i11 = 0.0, mean_i12 = 0.0, mean_i13 = 0.0;
    std::vector<std::size_t> k_indices;       // per step, argmax_i r_n . x_n^i
    std::vector<std::size_t> leader_vertex;   // per step, argmax_l r_n^l
    RegretBoundEstimates bound_estimates;
};

namespace detail {

inline Eigen::Index argmax_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

}  // namespace detail

/// Regret of `run` against the constant portfolio `hindsight` over the
/// run's realised steps. Throws NumericalError if the chain inequality is
/// violated by more than 1e-9.
[[nodiscard]] inline RegretReport regret(const OpsRun& run, const ReturnSeries& r, const SimplexPoint& hindsight) {
    const std::size_t m = run.realized_steps();
    const std::size_t d = r.assets();
    if (m < 1) throw InputError("regret: run has no realised steps");
    if (run.first_return_row + m > r.length() || run.steps() < m)
        throw InputError("regret: run horizon does not match the return series");
    if (hindsight.dim() != d || run.params.dim != d) throw InputError("regret: dimension mismatch");

    RegretReport rep;
    rep.horizon = m;
    rep.hindsight_portfolio = hindsight;
    const Vector& xs = hindsight.weights;
    const auto row_of = [&](std::size_t n) {
        return r.relatives.row(static_cast<Eigen::Index>(run.first_return_row + n));
    };

    double s_regret = 0.0, s_best = 0.0, s_chain = 0.0, s_chain_best = 0.0, s_growth = 0.0, s_value = 0.0;
    double j_min = std::numeric_limits<double>::infinity();
    double j_max = -j_min;
    std::vector<double> market;  // j_n . x_n#
    for (std::size_t n = 0; n < m; ++n) {
        const auto rn = row_of(n);
        const Vector xbar = run.mean_weights(n);
        const Vector xb = run.best_weights(n);
        const double rs = rn.dot(xs.transpose());
        const double rm = rn.dot(xbar.transpose());
        const double rb = rn.dot(xb.transpose());
        s_value += std::log1p(rs);
        s_regret += std::log1p(rs) - std::log1p(rm);
        s_best += std::log1p(rs) - std::log1p(rb);
        s_chain += (1.0 + rs) / (1.0 + rm);
        s_chain_best += (1.0 + rs) / (1.0 + rb);
        s_growth += std::log(rs) - std::log(rm);
        j_min = std::min(j_min, 1.0 + rn.minCoeff());
        j_max = std::max(j_max, 1.0 + rn.maxCoeff());

        const Eigen::RowVectorXd scores = (run.weights[n] * rn.transpose()).transpose();
        rep.k_indices.push_back(static_cast<std::size_t>(detail::argmax_lowest(scores)));
        const auto lead = detail::argmax_lowest(rn);
        rep.leader_vertex.push_back(static_cast<std::size_t>(lead));
        market.push_back(1.0 + rn[lead]);
    }
    const double inv_m = 1.0 / static_cast<double>(m);
    rep.hindsight_value = s_value * inv_m;
    rep.regret = s_regret * inv_m;
    rep.regret_best = s_best * inv_m;
    rep.chain_bound = s_chain * inv_m - 1.0;
    rep.chain_bound_best = s_chain_best * inv_m - 1.0;
    rep.growth_gap = s_growth * inv_m;
    if (rep.regret > rep.chain_bound + 1e-9 || rep.regret_best > rep.chain_bound_best + 1e-9)
        throw NumericalError("regret: chain inequality violated");

    // Per-step decomposition, steps 1 .. M-1 (each needs the previous step).
    const double a = 1.0 - run.params.lambda0 * run.params.h;
    double leader_gap = 0.0, consensus_gap = 0.0;
    for (std::size_t n = 1; n < m; ++n) {
        const Eigen::RowVectorXd jn = (row_of(n).array() + 1.0).matrix();
        const Eigen::RowVectorXd jp = (row_of(n - 1).array() + 1.0).matrix();
        const Vector xbar = run.mean_weights(n);
        const double jn_lead = jn[static_cast<Eigen::Index>(rep.leader_vertex[n])];
        const double jp_lead = jp[static_cast<Eigen::Index>(rep.leader_vertex[n - 1])];
        const double jn_bar = jn.dot(xbar.transpose());
        const double jp_bar = jp.dot(xbar.transpose());
        RegretComponents c;
        c.step = n;
        c.i11 = jn_lead / jn_bar - jp_lead / jp_bar;
        c.i12 = jp_lead / jp_bar - 1.0;
        c.i13 = jn.dot(xs.transpose()) / jn_bar - jn_lead / jn_bar;
        rep.components.push_back(c);

        const auto k_prev = static_cast<Eigen::Index>(rep.k_indices[n - 1]);
        const Vector leader_now = run.weights[n].row(k_prev).transpose();
        const Vector leader_prev = run.weights[n - 1].row(k_prev).transpose();
        leader_gap += jp_lead - jp.dot(leader_now.transpose());
        consensus_gap += a * jp.dot((leader_prev - xbar).transpose());
    }
    if (!rep.components.empty()) {
        const double inv = 1.0 / static_cast<double>(rep.components.size());
        for (const auto& c : rep.components) {
            rep.mean_i11 += c.i11 * inv;
            rep.mean_i12 += c.i12 * inv;
            rep.mean_i13 += c.i13 * inv;
        }
        leader_gap *= inv;
        consensus_gap *= inv;
    }

    auto& b = rep.bound_estimates;
    const auto ms = sample_stats(market);
    b.market_dispersion = std::sqrt(2.0 * ms.variance);
    b.market_range = (j_max - j_min) * std::sqrt(static_cast<double>(d)) / j_min * ms.mean;
    b.leader_gap = leader_gap;
    b.consensus_gap = consensus_gap;
    b.total = (b.market_dispersion + b.market_range + b.leader_gap + b.consensus_gap) / j_min;
    return rep;
}

}  // namespace adcbo
