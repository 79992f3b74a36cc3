#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "raftsplit/chain.hpp"
#include "raftsplit/matrix.hpp"

namespace raftsplit {

/// values[n] = probability that one follower has become a candidate by
/// heartbeat step n (absorbed mass after n steps). Monotone nondecreasing,
/// within [0, 1], and exactly 0 for n below the smallest timeout.
struct AbsorptionCurve {
    std::vector<double> values;

    std::size_t last_step() const { return values.empty() ? 0 : values.size() - 1; }
};

/// Per-step distribution of the first step at which a majority of followers
/// are candidates simultaneously ("split step"). cdf[n] = P(split <= n),
/// pdf[n] = cdf[n] - cdf[n-1]. Moments are taken over the evaluated range;
/// truncated_tail_mass = 1 - cdf.back(), and capped marks a range that hit
/// the step cap while the tail was still above the requested epsilon.
struct SplitDistribution {
    std::vector<double> cdf;
    std::vector<double> pdf;
    double mean_steps = 0.0;
    double variance_steps = 0.0;
    std::size_t truncation_step = 0;
    double truncated_tail_mass = 0.0;
    bool capped = false;
};

struct SplitMoments {
    double mean_steps = 0.0;
    double variance_steps = 0.0;
    std::size_t truncation_step = 0;
    double truncated_tail_mass = 0.0;
    bool capped = false;
};

/// Fundamental matrix N = (I - Q)^-1 of an absorbing chain, with the
/// heartbeat summaries derived from it under the chain's initial
/// distribution pi:
///   expected_heartbeats      — expected visits to reset states before
///                              absorption (counting the initial reset),
///   time_to_candidate_steps  — expected steps to absorption,
///   mean_receipt_interval    — their ratio, the mean heartbeat spacing a
///                              follower observes before turning candidate.
struct FundamentalMatrix {
    Matrix n_matrix;
    double expected_heartbeats = 0.0;
    double time_to_candidate_steps = 0.0;
    double mean_receipt_interval_steps = 0.0;
};

/// Absorption curve by the scalar recurrence (single timeout only):
///   a_n = 0                                   for n < K
///   a_K = p^K
///   a_n = a_(n-1) + (1 - a_(n-K-1)) (1-p) p^K for n > K.
/// Returns max_step + 1 values.
AbsorptionCurve absorption_curve_recurrence(int k, double loss_rate,
                                            std::size_t max_step);

/// Same curve for params with one timeout; throws std::invalid_argument for
/// a timeout mixture (use absorption_curve_matrix on the built chain).
AbsorptionCurve absorption_curve_recurrence(const ModelParams& params,
                                            std::size_t max_step);

/// Absorption curve by propagating the chain's initial distribution and
/// summing absorbed mass. Works for any chain; agrees with the recurrence
/// within 1e-10 for single-timeout chains.
AbsorptionCurve absorption_curve_matrix(const TransitionMatrix& chain,
                                        std::size_t max_step);

/// P(at least floor(N/2)+1 of the N-1 followers are candidates) when each
/// is one independently with probability absorption_prob. Upper binomial
/// tail, summed in log space with compensated summation.
double split_probability(double absorption_prob, int n_nodes);

/// Same tail under the Poisson approximation with mean (N-1) *
/// absorption_prob. Accurate when absorption_prob is small (total
/// variation error at most (N-1) * absorption_prob^2).
double split_probability_poisson(double absorption_prob, int n_nodes);

/// Split-step distribution over the curve's range, exact binomial.
SplitDistribution split_cdf(const AbsorptionCurve& curve, int n_nodes);

/// Split-step distribution under the Poisson approximation.
SplitDistribution split_cdf_poisson(const AbsorptionCurve& curve, int n_nodes);

/// Mean and variance of the split step, walking the curve until the tail
/// falls below epsilon or step_cap is reached (then capped = true; values
/// cover the walked range only).
SplitMoments split_moments(const AbsorptionCurve& curve, int n_nodes,
                           double epsilon, std::size_t step_cap);

/// Expected number of candidates (N-1) * a_step at the given step.
double expected_candidates(const AbsorptionCurve& curve, int n_nodes,
                           std::size_t step);

/// Expected number of followers still answering heartbeats: (N-1) * (1 - a_step).
double expected_replies(const AbsorptionCurve& curve, int n_nodes,
                        std::size_t step);

/// Fundamental matrix of the chain. Requires a chain that can absorb
/// (loss_rate > 0); throws std::domain_error otherwise.
FundamentalMatrix fundamental_matrix(const TransitionMatrix& chain);

/// One full analytical evaluation: the absorption curve grown adaptively
/// until the binomial split tail falls below epsilon (or step_cap), the
/// exact and Poisson split distributions over that range, and the
/// fundamental-matrix summaries. Throws std::domain_error for loss_rate 0
/// (the chain never absorbs, so the split distribution is degenerate).
struct ModelEvaluation {
    TransitionMatrix chain;
    AbsorptionCurve curve;
    SplitDistribution binomial;
    SplitDistribution poisson;
    FundamentalMatrix fm;
};

ModelEvaluation evaluate_model(const ModelParams& params, double epsilon,
                               std::size_t step_cap);

} // namespace raftsplit
