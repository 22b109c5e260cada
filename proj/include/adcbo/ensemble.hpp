#pragma once

// Particle ensemble and the discrete consensus update
//
//   x_{n+1}^i = x_n^i - l0 h (x_n^i - M_n) - l1 h (xbar_n - M_n) - sigma (x_n^i - M_n) (.) W_n
//
// with M_n the exp(-beta L)-weighted average of the particles, xbar_n the
// plain ensemble mean and W_n ~ N(0, h I_d) drawn once per step and shared by
// all particles (common noise) unless NoiseMode::independent is selected.
// lambda1 = 0 gives plain (noisy) CBO; sigma = 0, lambda1 > 0 is the
// average-drift variant.

#include "adcbo/errors.hpp"
#include "adcbo/objectives.hpp"
#include "adcbo/rng.hpp"
#include "adcbo/types.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace adcbo {

inline constexpr double kInfiniteBeta = std::numeric_limits<double>::infinity();

enum class NoiseMode { common, independent };

struct CboParams {
    double lambda0 = 1.0;
    double lambda1 = 0.0;
    double sigma = 0.0;
    double h = 0.1;
    double beta = 100.0;  // kInfiniteBeta selects the best particle
    std::size_t n_particles = 50;
    std::size_t dim = 15;
    double eps_tol = 1e-6;
    std::size_t max_iters = 1'000'000;
    NoiseMode noise = NoiseMode::common;

    /// Throws InputError when a hard invariant is broken.
    void validate() const {
        if (!(lambda0 > 0.0)) throw InputError("lambda0 must be > 0");
        if (!(lambda1 >= 0.0)) throw InputError("lambda1 must be >= 0");
        if (!(sigma >= 0.0)) throw InputError("sigma must be >= 0");
        if (!(h > 0.0)) throw InputError("h must be > 0");
        if (!(beta > 0.0)) throw InputError("beta must be > 0");
        if (!(eps_tol > 0.0)) throw InputError("eps_tol must be > 0");
        if (n_particles < 1 || dim < 1) throw InputError("need N >= 1 and d >= 1");
        if (max_iters < 1) throw InputError("max_iters must be >= 1");
    }

    /// lambda0 h < 1 and (1 - lambda0 h)^2 + sigma^2 < 1. Informational only.
    [[nodiscard]] bool admissible() const {
        const double a = lambda0 * h;
        return a < 1.0 && (1.0 - a) * (1.0 - a) + sigma * sigma < 1.0;
    }
};

struct Ensemble {
    Matrix positions;  // N x d, one particle per row
    std::size_t step_index = 0;

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(positions.rows()); }
    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(positions.cols()); }
    [[nodiscard]] std::span<const double> particle(std::size_t i) const {
        return row_span(positions, static_cast<Eigen::Index>(i));
    }

    /// Ensemble mean, accumulated relative to particle 0 so that a coincident
    /// ensemble has a mean exactly equal to its common position.
    [[nodiscard]] Vector mean() const {
        const Vector ref = positions.row(0).transpose();
        return ref + (positions.rowwise() - ref.transpose()).colwise().mean().transpose();
    }

    [[nodiscard]] bool all_finite() const { return positions.allFinite(); }
};

// ---------------------------------------------------------------------------
// Consensus point

/// sum_i w_i x_i with w_i proportional to exp(-beta (L_i - min L)).
/// For beta = infinity returns the minimiser, lowest index on ties.
[[nodiscard]] inline Vector weighted_consensus_point(const Matrix& positions,
                                                     std::span<const double> values,
                                                     double beta) {
    const Eigen::Index n = positions.rows();
    if (n < 1) throw InputError("weighted_consensus_point: empty ensemble");
    if (static_cast<Eigen::Index>(values.size()) != n)
        throw InputError("weighted_consensus_point: one objective value per particle required");
    if (!(beta > 0.0)) throw InputError("weighted_consensus_point: beta must be > 0");

    Eigen::Index best = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(values[i]))
            throw InputError("weighted_consensus_point: non-finite objective value at particle " +
                             std::to_string(i));
        if (values[i] < values[best]) best = i;
    }
    if (std::isinf(beta)) return positions.row(best).transpose();

    const double lmin = values[best];
    const Vector ref = positions.row(0).transpose();
    Vector acc = Vector::Zero(positions.cols());
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double w = std::exp(-beta * (values[i] - lmin));
        total += w;
        acc += w * (positions.row(i).transpose() - ref);
    }
    return ref + acc / total;
}

// ---------------------------------------------------------------------------
// Spread measures and stopping predicates

struct Diameter {
    Vector per_coordinate;  // max_{i,j} |x^{i,l} - x^{j,l}|
    double global = 0.0;    // max over l
};

[[nodiscard]] inline Diameter diameter(const Matrix& positions) {
    Diameter out;
    out.per_coordinate = (positions.colwise().maxCoeff() - positions.colwise().minCoeff()).transpose();
    out.global = out.per_coordinate.size() ? out.per_coordinate.maxCoeff() : 0.0;
    return out;
}

[[nodiscard]] inline Diameter diameter(const Ensemble& e) { return diameter(e.positions); }

/// max_{i,j} ||x^i - x^j||_2
[[nodiscard]] inline double max_pairwise_distance(const Matrix& positions) {
    double best = 0.0;
    for (Eigen::Index i = 0; i < positions.rows(); ++i)
        for (Eigen::Index j = i + 1; j < positions.rows(); ++j)
            best = std::max(best, (positions.row(i) - positions.row(j)).squaredNorm());
    return std::sqrt(best);
}

/// Per-coordinate test: max_l max_{i,j} |x^{i,l} - x^{j,l}| < eps.
[[nodiscard]] inline bool coordinate_consensus(const Matrix& positions, double eps) {
    return diameter(positions).global < eps;
}

/// Euclidean test: max_{i,j} ||x^i - x^j|| <= eps.
[[nodiscard]] inline bool euclidean_consensus(const Matrix& positions, double eps) {
    return max_pairwise_distance(positions) <= eps;
}

// ---------------------------------------------------------------------------
// Single step

/// Objective values at every particle. Non-finite values and exceptions
/// thrown by the objective become StepError carrying the particle index.
template <StaticObjective F>
[[nodiscard]] Vector evaluate(const Matrix& positions, const F& objective) {
    Vector values(positions.rows());
    for (Eigen::Index i = 0; i < positions.rows(); ++i) {
        double v;
        try {
            v = objective(row_span(positions, i));
        } catch (const std::exception& ex) {
            throw StepError(static_cast<std::size_t>(i), ex.what());
        }
        if (!std::isfinite(v)) throw StepError(static_cast<std::size_t>(i), "non-finite objective value");
        values[i] = v;
    }
    return values;
}

/// 0 rows when sigma = 0 (no draw, RNG untouched), 1 row for common noise,
/// N rows for independent noise. Entries are N(0, h).
[[nodiscard]] inline Matrix draw_noise(const CboParams& params, std::size_t n_particles,
                                       std::size_t dim, RngHandle& rng) {
    const Eigen::Index d = static_cast<Eigen::Index>(dim);
    if (params.sigma == 0.0) return Matrix(0, d);
    const Eigen::Index rows =
        params.noise == NoiseMode::common ? 1 : static_cast<Eigen::Index>(n_particles);
    Matrix w(rows, d);
    const double sd = std::sqrt(params.h);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index l = 0; l < d; ++l) w(r, l) = rng.normal(0.0, sd);
    return w;
}

/// Deterministic part of the step for a given consensus point and noise
/// realisation. Written as M + (1 - l0 h - sigma W) (.) (x - M) - l1 h (xbar - M)
/// so that pairwise differences are formed from O(diameter) quantities.
[[nodiscard]] inline Matrix apply_update(const Matrix& positions, const Vector& consensus,
                                         const CboParams& params, const Matrix& noise) {
    const Eigen::Index n = positions.rows();
    const Eigen::Index d = positions.cols();
    if (consensus.size() != d) throw InputError("apply_update: consensus dimension mismatch");
    if (noise.rows() != 0 && noise.rows() != 1 && noise.rows() != n)
        throw InputError("apply_update: noise must have 0, 1 or N rows");
    if (noise.rows() != 0 && noise.cols() != d) throw InputError("apply_update: noise dimension mismatch");

    const Vector ref = positions.row(0).transpose();
    const Vector mean = ref + (positions.rowwise() - ref.transpose()).colwise().mean().transpose();
    const Eigen::RowVectorXd shift =
        (consensus - params.lambda1 * params.h * (mean - consensus)).transpose();
    const double base = 1.0 - params.lambda0 * params.h;

    Matrix next(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index l = 0; l < d; ++l) {
            double factor = base;
            if (noise.rows() == 1) factor -= params.sigma * noise(0, l);
            else if (noise.rows() == n) factor -= params.sigma * noise(i, l);
            next(i, l) = shift[l] + factor * (positions(i, l) - consensus[l]);
        }
    }
    return next;
}

struct StepRecord {
    Ensemble ensemble;       // state after the step
    Vector consensus;        // M_beta at the pre-step state
    Matrix noise;            // the draw used (see draw_noise)
    Vector objective_values; // L at the pre-step positions
};

template <StaticObjective F>
[[nodiscard]] StepRecord ad_cbo_step_detailed(const Ensemble& ensemble, const CboParams& params,
                                              const F& objective, RngHandle& rng) {
    params.validate();
    if (ensemble.size() < 1) throw InputError("ad_cbo_step: empty ensemble");

    StepRecord rec;
    rec.objective_values = evaluate(ensemble.positions, objective);
    rec.consensus = weighted_consensus_point(
        ensemble.positions,
        std::span<const double>(rec.objective_values.data(), rec.objective_values.size()),
        params.beta);
    rec.noise = draw_noise(params, ensemble.size(), ensemble.dim(), rng);
    rec.ensemble.positions = apply_update(ensemble.positions, rec.consensus, params, rec.noise);
    rec.ensemble.step_index = ensemble.step_index + 1;
    for (Eigen::Index i = 0; i < rec.ensemble.positions.rows(); ++i)
        if (!rec.ensemble.positions.row(i).allFinite())
            throw StepError(static_cast<std::size_t>(i), "non-finite position after update");
    return rec;
}

template <StaticObjective F>
[[nodiscard]] Ensemble ad_cbo_step(const Ensemble& ensemble, const CboParams& params,
                                   const F& objective, RngHandle& rng) {
    return ad_cbo_step_detailed(ensemble, params, objective, rng).ensemble;
}

// ---------------------------------------------------------------------------
// Drivers

struct ConsensusResult {
    Matrix final_positions;
    Vector consensus_point;  // ensemble mean at stop
    std::size_t iterations = 0;
    bool converged = false;
    double objective_at_consensus = 0.0;
};

/// Iterates until the per-coordinate diameter drops below eps_tol (checked
/// before the first step and after every step) or max_iters is reached.
template <StaticObjective F>
[[nodiscard]] ConsensusResult run_until_consensus(const Ensemble& initial, const CboParams& params,
                                                  const F& objective, RngHandle& rng) {
    params.validate();
    Ensemble current = initial;
    std::size_t iters = 0;
    bool converged = coordinate_consensus(current.positions, params.eps_tol);
    while (!converged && iters < params.max_iters) {
        current = ad_cbo_step(current, params, objective, rng);
        ++iters;
        converged = coordinate_consensus(current.positions, params.eps_tol);
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

/// In-place map of one particle into an admissible set.
using Projection = std::function<void(std::span<double>)>;

inline void project_rows(Matrix& positions, const Projection& projection) {
    if (!projection) return;
    for (Eigen::Index i = 0; i < positions.rows(); ++i) projection(row_span(positions, i));
}

/// Runs exactly `horizon` steps against L_0, L_1, ...; returns horizon + 1
/// ensembles (the initial one first).
template <TimeIndexedObjective F>
[[nodiscard]] std::vector<Ensemble> run_dynamic(const Ensemble& initial, const CboParams& params,
                                                const F& objective, std::size_t horizon,
                                                const Projection& projection, RngHandle& rng) {
    params.validate();
    std::vector<Ensemble> trajectory;
    trajectory.reserve(horizon + 1);
    trajectory.push_back(initial);
    for (std::size_t n = 0; n < horizon; ++n) {
        const auto step_objective = [&objective, n](std::span<const double> x) {
            return objective(n, x);
        };
        Ensemble next = ad_cbo_step(trajectory.back(), params, step_objective, rng);
        project_rows(next.positions, projection);
        trajectory.push_back(std::move(next));
    }
    return trajectory;
}

// ---------------------------------------------------------------------------
// Initial data

[[nodiscard]] inline Ensemble uniform_box_ensemble(std::size_t n, std::size_t d, double lo, double hi,
                                                   RngHandle& rng) {
    Ensemble e;
    e.positions.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < e.positions.rows(); ++i)
        for (Eigen::Index l = 0; l < e.positions.cols(); ++l) e.positions(i, l) = rng.uniform(lo, hi);
    return e;
}

/// x^{i,l} ~ N(0, s_l^2), independent.
[[nodiscard]] inline Ensemble gaussian_ensemble(std::size_t n, std::span<const double> s,
                                                RngHandle& rng) {
    Ensemble e;
    e.positions.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s.size()));
    for (Eigen::Index i = 0; i < e.positions.rows(); ++i)
        for (Eigen::Index l = 0; l < e.positions.cols(); ++l) e.positions(i, l) = rng.normal(0.0, s[l]);
    return e;
}

// ---------------------------------------------------------------------------
// Export

/// CSV columns: step,particle,coord_0,...,coord_{d-1}; rows ordered by step
/// then particle.
inline void write_trajectory_csv(std::ostream& os, const std::vector<Ensemble>& trajectory) {
    if (trajectory.empty()) return;
    const auto d = trajectory.front().dim();
    os << "step,particle";
    for (std::size_t l = 0; l < d; ++l) os << ",coord_" << l;
    os << '\n';
    const auto old_precision = os.precision(17);
    for (const auto& e : trajectory) {
        for (std::size_t i = 0; i < e.size(); ++i) {
            os << e.step_index << ',' << i;
            for (std::size_t l = 0; l < d; ++l)
                os << ',' << e.positions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l));
            os << '\n';
        }
    }
    os.precision(old_precision);
}

}  // namespace adcbo
