#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

namespace raftsplit {

/// lockstep — heartbeats and timeouts advance on the heartbeat grid; the
///            trial is a direct sample of the analytical chain.
/// timed    — timeouts and latencies are real-valued (uniform on their
///            ranges); steps are reported as floor(time / h).
enum class Fidelity { lockstep, timed };

struct SimConfig {
    int n_nodes = 5;
    double loss_rate = 0.1;
    double heartbeat_interval_ms = 50.0;
    std::pair<double, double> timeout_range_ms{150.0, 150.0};
    std::pair<double, double> latency_range_ms{0.5, 10.0};
    Fidelity fidelity = Fidelity::lockstep;
    std::int64_t trials = 10000;
    std::uint64_t master_seed = 1;
    std::int64_t max_steps = 1000000;

    /// Throws std::invalid_argument when any field is out of range
    /// (notably: floor(timeout_lo / h) must be >= 1, and the latency range
    /// must sit inside [0, h) so a heartbeat arrives before the next one).
    void validate() const;

    /// Timeout steps the lockstep mode draws from:
    /// {floor(lo/h), ..., floor(hi/h)}.
    std::vector<int> lockstep_timeout_steps() const;

    int majority_threshold() const { return n_nodes / 2 + 1; }
    int follower_count() const { return n_nodes - 1; }
};

/// One trial. split_step counts heartbeat broadcasts emitted when the
/// majority-th candidacy occurs; a censored trial carries max_steps as a
/// sentinel. candidacy_steps[f] is empty while follower f never timed out.
/// heartbeats_received[f] counts deliveries to f during the trial — the
/// heartbeat that opened f's first timeout window is not in this count.
struct TrialOutcome {
    std::int64_t split_step = 0;
    double split_time_ms = 0.0;
    bool censored = false;
    std::vector<std::optional<std::int64_t>> candidacy_steps;
    std::vector<std::int64_t> heartbeats_received;
    std::uint64_t seed = 0;
};

/// Deterministic per-trial seed: splitmix64 over (master_seed, trial_index).
std::uint64_t derive_trial_seed(std::uint64_t master_seed, std::uint64_t trial_index);

/// Runs one trial. Deterministic in (config, trial_index): draws come from
/// an mt19937_64 seeded with derive_trial_seed, consumed in a fixed order —
/// followers ascending within each heartbeat step; per follower in timed
/// mode: loss, then latency, then fresh timeout.
TrialOutcome run_trial(const SimConfig& config, std::int64_t trial_index);

/// Trials 0..trials-1 in order.
std::vector<TrialOutcome> run_batch(const SimConfig& config);

/// Heartbeat bookkeeping over all (trial, follower) pairs that reached
/// candidacy. Heartbeats are counted per election term, so the one that
/// started the follower's window counts too: mean_heartbeats averages
/// 1 + heartbeats_received, and mean_receipt_interval_steps divides total
/// candidacy steps by total heartbeats (a ratio of sums, which converges
/// to the analytical interval; a mean of per-pair ratios would not).
/// Throws std::domain_error when no pair reached candidacy.
struct HeartbeatStats {
    double mean_heartbeats = 0.0;
    double mean_receipt_interval_steps = 0.0;
    std::int64_t candidate_pairs = 0;
    std::int64_t zero_receipt_pairs = 0;
};

HeartbeatStats empirical_heartbeat_stats(const std::vector<TrialOutcome>& outcomes);

} // namespace raftsplit
