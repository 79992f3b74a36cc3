#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "raftsplit/analysis.hpp"
#include "raftsplit/sim.hpp"

namespace raftsplit {

/// Right-continuous step function built from uncensored split steps.
/// probabilities are cumulative fractions of *all* samples (censored trials
/// never enter the numerator), so the last value is below 1 whenever
/// anything was censored.
struct EmpiricalCdf {
    std::vector<std::int64_t> steps;     // ascending jump locations
    std::vector<double> probabilities;   // value from steps[i] onward
    std::int64_t sample_count = 0;
    std::int64_t censored_count = 0;
};

/// Throws std::invalid_argument for an empty batch, std::domain_error when
/// every trial was censored.
EmpiricalCdf empirical_cdf(const std::vector<TrialOutcome>& outcomes);

/// Kolmogorov–Smirnov distance between two CDFs, evaluated on the union of
/// their step grids with right-continuous interpolation, restricted to
/// steps up to the smaller of the two final steps.
double ks_distance(const EmpiricalCdf& a, const EmpiricalCdf& b);
double ks_distance(const SplitDistribution& analytical, const EmpiricalCdf& empirical);
double ks_distance(const SplitDistribution& a, const SplitDistribution& b);

/// Moments and quantiles of the uncensored split steps (variance with the
/// n-1 divisor; quantiles at 0.05/0.25/0.5/0.75/0.95 by order statistic).
/// Throws like empirical_cdf.
struct Summary {
    double mean = 0.0;
    double variance = 0.0;
    std::vector<std::pair<double, double>> quantiles;
    std::int64_t sample_count = 0;
    std::int64_t censored_count = 0;
};

Summary summarize(const std::vector<TrialOutcome>& outcomes);

} // namespace raftsplit
