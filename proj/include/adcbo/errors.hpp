#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace adcbo {

/// Malformed or out-of-contract input (non-finite values, empty ensembles,
/// dimension mismatches, non-PSD correlation matrices, ...).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A quantity was requested outside the region where it is defined,
/// e.g. a Sharpe ratio with zero portfolio variance.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Root bracketing or quadrature failure.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The objective produced a non-finite value (or threw) during an update.
class StepError : public std::runtime_error {
public:
    StepError(std::size_t particle, const std::string& what)
        : std::runtime_error("particle " + std::to_string(particle) + ": " + what),
          particle_(particle) {}

    [[nodiscard]] std::size_t particle() const noexcept { return particle_; }

private:
    std::size_t particle_;
};

/// Output could not be written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Price CSV rejected; row is 1-based counting the header, column is 0-based.
class IngestionError : public std::runtime_error {
public:
    IngestionError(std::size_t row, std::size_t column, const std::string& what)
        : std::runtime_error("row " + std::to_string(row) + ", column " +
                             std::to_string(column) + ": " + what),
          row_(row), column_(column) {}

    [[nodiscard]] std::size_t row() const noexcept { return row_; }
    [[nodiscard]] std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

}  // namespace adcbo
