#pragma once

#include <stdexcept>
#include <string>

namespace hfanova {

/// Base class of every error raised by the library. `kind()` is a stable,
/// machine-readable name used by the CLI error reports.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    [[nodiscard]] const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define HFANOVA_DEFINE_ERROR(Name, tag)                                   \
    class Name : public Error {                                           \
    public:                                                               \
        explicit Name(const std::string& message) : Error(tag, message) {} \
    }

HFANOVA_DEFINE_ERROR(DimensionError, "dimension_error");
HFANOVA_DEFINE_ERROR(BasisError, "basis_error");
HFANOVA_DEFINE_ERROR(SingularityError, "singularity_error");
HFANOVA_DEFINE_ERROR(DomainError, "domain_error");
HFANOVA_DEFINE_ERROR(RankError, "rank_error");
HFANOVA_DEFINE_ERROR(ValidationError, "validation_error");
HFANOVA_DEFINE_ERROR(ConvergenceError, "convergence_error");
HFANOVA_DEFINE_ERROR(NumericError, "numeric_error");
HFANOVA_DEFINE_ERROR(ConfigError, "config_error");

#undef HFANOVA_DEFINE_ERROR

/// Raised when numerical quadrature cannot reach the requested accuracy.
class AccuracyError : public Error {
public:
    AccuracyError(const std::string& message, double achieved)
        : Error("accuracy_error", message), achieved_(achieved) {}

    [[nodiscard]] double achieved_tolerance() const noexcept { return achieved_; }

private:
    double achieved_;
};

}  // namespace hfanova
