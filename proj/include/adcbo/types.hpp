#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>

namespace adcbo {

/// Row-major so that each particle (row) is contiguous and can be handed to
/// objectives as a std::span.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

[[nodiscard]] inline std::span<const double> row_span(const Matrix& m, Eigen::Index i) {
    return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

[[nodiscard]] inline std::span<double> row_span(Matrix& m, Eigen::Index i) {
    return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

[[nodiscard]] inline Eigen::Map<const Vector> as_vector(std::span<const double> x) {
    return {x.data(), static_cast<Eigen::Index>(x.size())};
}

}  // namespace adcbo
