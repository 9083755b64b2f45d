#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace hfanova {

/// Default tail tolerance for convergence verdicts on truncated series.
inline constexpr double kDefaultTailTolerance = 1e-6;

/// Partial sums of a truncated nonnegative series together with a tail
/// diagnostic. `converged` is a heuristic judgment from finitely many terms:
/// last increment relative to the running total below `tolerance`.
struct SeriesReport {
    std::vector<double> partial_sums;
    double total = 0.0;
    double last_term = 0.0;
    double tail_ratio = 0.0;
    double tolerance = kDefaultTailTolerance;
    bool converged = false;
    std::string note =
        "convergence verdict is a tail-ratio heuristic on the truncated series, not a proof";
};

/// Sums `terms` sequentially in index order (bit-stable) and fills the report.
[[nodiscard]] inline SeriesReport summarize_series(const std::vector<double>& terms,
                                                   double tolerance = kDefaultTailTolerance) {
    SeriesReport r;
    r.tolerance = tolerance;
    r.partial_sums.reserve(terms.size());
    double acc = 0.0;
    for (double t : terms) {
        acc += t;
        r.partial_sums.push_back(acc);
    }
    r.total = acc;
    r.last_term = terms.empty() ? 0.0 : terms.back();
    if (terms.empty() || r.last_term == 0.0) {
        r.tail_ratio = 0.0;
    } else if (acc == 0.0) {
        r.tail_ratio = std::numeric_limits<double>::infinity();
    } else {
        r.tail_ratio = std::abs(r.last_term) / std::abs(acc);
    }
    r.converged = std::isfinite(acc) && r.tail_ratio < tolerance;
    return r;
}

}  // namespace hfanova
