#pragma once

#include "adcbo/errors.hpp"
#include "adcbo/types.hpp"

#include <cmath>
#include <concepts>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>

namespace adcbo {

/// Anything callable as L(x) -> real on a d-vector.
template <class F>
concept StaticObjective = requires(const F& f, std::span<const double> x) {
    { f(x) } -> std::convertible_to<double>;
};

/// Anything callable as L_n(x) -> real, n the time index.
template <class F>
concept TimeIndexedObjective = requires(const F& f, std::size_t n, std::span<const double> x) {
    { f(n, x) } -> std::convertible_to<double>;
};

/// Optional analytic metadata. Both constants are user-supplied diagnostics;
/// nothing at runtime checks them.
struct ObjectiveInfo {
    std::size_t arity = 0;
    std::optional<double> lipschitz;    // C_L
    std::optional<double> lower_bound;  // L_sharp
};

/// f(x) = (1/d) sum_i (x_i^2 - 10 cos(2 pi x_i) + 10)
[[nodiscard]] inline double rastrigin(std::span<const double> x) {
    if (x.empty()) throw InputError("rastrigin: empty input");
    double sum = 0.0;
    for (double xi : x) {
        if (!std::isfinite(xi)) throw InputError("rastrigin: non-finite coordinate");
        sum += xi * xi - 10.0 * std::cos(2.0 * std::numbers::pi * xi) + 10.0;
    }
    return sum / static_cast<double>(x.size());
}

struct Rastrigin {
    std::size_t dim = 0;

    double operator()(std::span<const double> x) const { return rastrigin(x); }

    // Lipschitz only on compacts, so no global C_L.
    [[nodiscard]] ObjectiveInfo info() const { return {dim, std::nullopt, 0.0}; }
};

inline constexpr double kSharpeVarianceEpsilon = 1e-12;

/// L(x) = -(mu . x) / sqrt(x' Sigma x) for one rolling window.
struct RollingSharpeObjective {
    Vector mu;
    Eigen::MatrixXd cov;
    double variance_epsilon = kSharpeVarianceEpsilon;

    double operator()(std::span<const double> x) const;

    [[nodiscard]] ObjectiveInfo info() const {
        return {static_cast<std::size_t>(mu.size()), std::nullopt, std::nullopt};
    }
};

/// Throws DomainError when x' Sigma x <= epsilon (constant-price window).
[[nodiscard]] inline double negative_sharpe(const RollingSharpeObjective& obj,
                                            std::span<const double> x) {
    if (static_cast<Eigen::Index>(x.size()) != obj.mu.size())
        throw InputError("negative_sharpe: dimension mismatch");
    const auto xv = as_vector(x);
    const double variance = std::max(0.0, xv.dot(obj.cov * xv));
    if (!(variance > obj.variance_epsilon))
        throw DomainError("negative_sharpe: degenerate portfolio variance");
    return -obj.mu.dot(xv) / std::sqrt(variance);
}

inline double RollingSharpeObjective::operator()(std::span<const double> x) const {
    return negative_sharpe(*this, x);
}

}  // namespace adcbo
