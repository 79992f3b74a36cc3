#pragma once

#include <cstddef>
#include <vector>

#include "raftsplit/matrix.hpp"

namespace raftsplit {

/// Parameters of the analytical election model. The unit of time is one
/// heartbeat interval; milliseconds enter only at the reporting layer.
///
/// A follower's election timeout spans a whole number of heartbeat steps
/// K = floor(E_t / h). When the configured timeout range covers several
/// values, timeout_steps holds the ascending list {K_1..K_r} and the model
/// mixes the r chains uniformly.
struct ModelParams {
    int n_nodes = 5;                      // N, total nodes including the leader
    double loss_rate = 0.1;               // p, per-message loss probability
    std::vector<int> timeout_steps{3};    // {K_1..K_r}, ascending, each >= 1
    double heartbeat_interval_ms = 50.0;  // h

    /// Throws std::invalid_argument when any field is out of range.
    void validate() const;

    /// Candidates needed for a split: floor(N/2) + 1 of the N-1 followers.
    int majority_threshold() const { return n_nodes / 2 + 1; }
    int follower_count() const { return n_nodes - 1; }
};

/// Absorbing chain over one follower's timeout counter, in canonical block
/// form: transient states first, absorbing states last, so
///
///     full = | Q  R |
///            | 0  I |
///
/// Transient states are ordered stage by stage with the counter descending;
/// index 0 is "stage 1, freshly reset to K_1". Absorbing state i (full index
/// transient_count + i) is "stage i's counter reached zero" — the follower
/// became a candidate. initial_distribution spans the full chain and puts
/// mass 1/r on each stage's reset state.
struct TransitionMatrix {
    Matrix full;
    Matrix q_block;
    Matrix r_block;
    std::size_t transient_count = 0;       // sum of the K_i
    std::size_t absorbing_count = 0;       // r
    std::vector<std::size_t> reset_states; // transient index of each stage's reset state
    RowVector initial_distribution;
};

/// Chain for a single timeout of K steps: (K+1) x (K+1). Transient row i
/// holds 1-p in column 0 (heartbeat received, counter reset) and p in
/// column i+1 (heartbeat lost, counter decremented; the last decrement
/// absorbs).
TransitionMatrix build_single_timeout_chain(int k, double loss_rate);

/// Chain mixing timeouts {K_1..K_r}: a lost heartbeat decrements the
/// current counter (absorbing when it expires), a received one resets to a
/// freshly drawn timeout — probability (1-p)/r for each stage's reset
/// state. With a single timeout this reduces exactly to
/// build_single_timeout_chain.
TransitionMatrix build_multi_timeout_chain(const std::vector<int>& timeouts,
                                           double loss_rate);

/// Dispatches on params.timeout_steps.size().
TransitionMatrix build_chain(const ModelParams& params);

} // namespace raftsplit
