#pragma once

// Adam-style moment estimation on the consensus drift g = lambda0 (x - M_beta):
//
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g (.) g
//   x <- x - h (m / (1 - b1)) / (sqrt(v / (1 - b2)) + 1e-6)
//
// followed by a projection in dynamic mode. The bias terms are the constant
// (1 - b1), (1 - b2); BiasCorrection::power switches to the usual
// (1 - b1^n), (1 - b2^n) for comparison. No noise is drawn.

#include "adcbo/ensemble.hpp"
#include "adcbo/errors.hpp"
#include "adcbo/objectives.hpp"
#include "adcbo/types.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

namespace adcbo {

enum class BiasCorrection { constant, power };

inline constexpr double kAdamDenominatorGuard = 1e-6;

struct AdamConfig {
    double lambda0 = 1.0;
    double h = 0.1;
    double beta = 100.0;  // inverse temperature of M_beta
    double beta1 = 0.9;
    double beta2 = 0.99;
    BiasCorrection bias = BiasCorrection::constant;

    void validate() const {
        if (!(lambda0 > 0.0)) throw InputError("adam: lambda0 must be > 0");
        if (!(h > 0.0)) throw InputError("adam: h must be > 0");
        if (!(beta > 0.0)) throw InputError("adam: beta must be > 0");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
            throw InputError("adam: decay rates must lie in [0, 1)");
    }
};

struct AdamState {
    Matrix m;  // first moments, N x d
    Matrix v;  // second moments, N x d, entrywise >= 0
    std::size_t step_count = 0;

    static AdamState zeros(std::size_t n, std::size_t d) {
        AdamState s;
        s.m = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
        s.v = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
        return s;
    }
};

/// One update for a given consensus point. Mutates `state`, returns the new
/// (unprojected) positions.
[[nodiscard]] inline Matrix adam_update(const Matrix& positions, const Vector& consensus, AdamState& state,
                                        const AdamConfig& cfg) {
    const Eigen::Index n = positions.rows();
    const Eigen::Index d = positions.cols();
    if (state.m.rows() != n || state.m.cols() != d || state.v.rows() != n || state.v.cols() != d)
        throw InputError("adam_update: state dimensions do not match the ensemble");
    if (consensus.size() != d) throw InputError("adam_update: consensus dimension mismatch");

    ++state.step_count;
    double c1 = 1.0 - cfg.beta1;
    double c2 = 1.0 - cfg.beta2;
    if (cfg.bias == BiasCorrection::power) {
        c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step_count));
        c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step_count));
    }

    Matrix next(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index l = 0; l < d; ++l) {
            const double g = cfg.lambda0 * (positions(i, l) - consensus[l]);
            if (!std::isfinite(g)) throw StepError(static_cast<std::size_t>(i), "non-finite Adam drift");
            state.m(i, l) = cfg.beta1 * state.m(i, l) + (1.0 - cfg.beta1) * g;
            state.v(i, l) = cfg.beta2 * state.v(i, l) + (1.0 - cfg.beta2) * g * g;
            const double m_hat = state.m(i, l) / c1;
            const double v_hat = state.v(i, l) / c2;
            next(i, l) = positions(i, l) - cfg.h * m_hat / (std::sqrt(v_hat) + kAdamDenominatorGuard);
        }
    }
    return next;
}

template <StaticObjective F>
[[nodiscard]] std::pair<Ensemble, AdamState> adam_cbo_step(const Ensemble& ensemble, AdamState state,
                                                           const AdamConfig& cfg, const F& objective,
                                                           const Projection& projection = {}) {
    cfg.validate();
    const Vector values = evaluate(ensemble.positions, objective);
    const Vector consensus = weighted_consensus_point(
        ensemble.positions, std::span<const double>(values.data(), values.size()), cfg.beta);
    Ensemble next;
    next.positions = adam_update(ensemble.positions, consensus, state, cfg);
    next.step_index = ensemble.step_index + 1;
    project_rows(next.positions, projection);
    return {std::move(next), std::move(state)};
}

/// Static mode: loop while max_{i,j} ||x^i - x^j|| > eps_tol, capped at max_iters.
template <StaticObjective F>
[[nodiscard]] ConsensusResult run_adam_static(const Ensemble& initial, const AdamConfig& cfg, double eps_tol,
                                              std::size_t max_iters, const F& objective) {
    cfg.validate();
    if (!(eps_tol > 0.0)) throw InputError("run_adam_static: eps_tol must be > 0");
    Ensemble current = initial;
    AdamState state = AdamState::zeros(initial.size(), initial.dim());
    std::size_t iters = 0;
    bool converged = euclidean_consensus(current.positions, eps_tol);
    while (!converged && iters < max_iters) {
        std::tie(current, state) = adam_cbo_step(current, std::move(state), cfg, objective);
        ++iters;
        converged = euclidean_consensus(current.positions, eps_tol);
    }
    ConsensusResult out;
    out.consensus_point = current.mean();
    out.final_positions = std::move(current.positions);
    out.iterations = iters;
    out.converged = converged;
    out.objective_at_consensus =
        objective(std::span<const double>(out.consensus_point.data(), out.consensus_point.size()));
    return out;
}

/// Dynamic mode: exactly `horizon` projected steps against L_0, L_1, ...;
/// returns horizon + 1 ensembles.
template <TimeIndexedObjective F>
[[nodiscard]] std::vector<Ensemble> run_adam_dynamic(const Ensemble& initial, const AdamConfig& cfg,
                                                     std::size_t horizon, const F& objective,
                                                     const Projection& projection) {
    cfg.validate();
    std::vector<Ensemble> trajectory;
    trajectory.reserve(horizon + 1);
    trajectory.push_back(initial);
    AdamState state = AdamState::zeros(initial.size(), initial.dim());
    for (std::size_t n = 0; n < horizon; ++n) {
        const auto step_objective = [&objective, n](std::span<const double> x) { return objective(n, x); };
        auto [next, next_state] = adam_cbo_step(trajectory.back(), std::move(state), cfg, step_objective, projection);
        state = std::move(next_state);
        trajectory.push_back(std::move(next));
    }
    return trajectory;
}

}  // namespace adcbo
