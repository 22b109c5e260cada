#pragma once

#include "adcbo/errors.hpp"
#include "adcbo/rng.hpp"
#include "adcbo/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

namespace adcbo {

/// A point of the probability simplex: nonnegative, summing to one.
struct SimplexPoint {
    Vector weights;

    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(weights.size()); }
};

/// Clamp negatives to zero and renormalise by the sum. Requires a
/// positive sum.
inline void clean_simplex(std::span<double> x) {
    double total = 0.0;
    for (double& v : x) {
        if (v < 0.0) v = 0.0;
        total += v;
    }
    if (!(total > 0.0)) throw NumericalError("clean_simplex: nonpositive mass");
    for (double& v : x) v /= total;
}

inline constexpr double kSimplexTolerance = 1e-12;

/// In-place Euclidean projection onto {x >= 0, sum x = 1} by the
/// sort-and-threshold rule: with u sorted descending, k the largest index
/// where u_k - (sum_{j<=k} u_j - 1)/k > 0, output max(y - theta, 0) with
/// theta = (sum_{j<=k} u_j - 1)/k.
///
/// Inputs that are already nonnegative and sum to 1 within 1e-12 are left
/// untouched, which makes the map exactly idempotent. The input is shifted
/// by its maximum before thresholding; the result depends on y only through
/// those differences.
inline void project_simplex_inplace(std::span<double> y) {
    if (y.empty()) throw InputError("project_simplex: empty input");
    double top = y[0];
    double total = 0.0;
    bool nonnegative = true;
    for (double v : y) {
        if (!std::isfinite(v)) throw InputError("project_simplex: non-finite input");
        top = std::max(top, v);
        total += v;
        nonnegative = nonnegative && v >= 0.0;
    }
    if (nonnegative && std::abs(total - 1.0) <= kSimplexTolerance) return;

    for (double& v : y) v -= top;
    std::vector<double> u(y.begin(), y.end());
    std::sort(u.begin(), u.end(), std::greater<>());
    double prefix = 0.0;
    double theta = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        prefix += u[k];
        const double candidate = (prefix - 1.0) / static_cast<double>(k + 1);
        if (u[k] - candidate > 0.0) theta = candidate;
    }
    for (double& v : y) v = std::max(v - theta, 0.0);
    clean_simplex(y);
}

[[nodiscard]] inline SimplexPoint project_simplex(std::span<const double> y) {
    SimplexPoint p;
    p.weights = as_vector(y);
    project_simplex_inplace(std::span<double>(p.weights.data(), p.weights.size()));
    return p;
}

/// True when every entry is >= -tol and the entries sum to 1 within tol.
[[nodiscard]] inline bool on_simplex(std::span<const double> x, double tol = 1e-12) {
    double total = 0.0;
    for (double v : x) {
        if (!(v >= -tol)) return false;
        total += v;
    }
    return std::abs(total - 1.0) <= tol;
}

/// Dirichlet(1, ..., 1) draw, i.e. uniform on the simplex.
[[nodiscard]] inline Vector uniform_simplex_point(std::size_t d, RngHandle& rng) {
    Vector x(static_cast<Eigen::Index>(d));
    for (Eigen::Index l = 0; l < x.size(); ++l) x[l] = rng.exponential();
    x /= x.sum();
    return x;
}

}  // namespace adcbo
