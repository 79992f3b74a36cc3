#include "raftsplit/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace raftsplit {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// All randomness flows through uniform01 so trials are reproducible from
/// the seed alone: 53-bit mantissa draws in [0, 1).
class TrialRng {
public:
    explicit TrialRng(std::uint64_t seed) : engine_(seed) {}

    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

    /// Index into [0, n) by inversion.
    std::size_t uniform_index(std::size_t n) {
        return std::min(static_cast<std::size_t>(uniform01() * static_cast<double>(n)),
                        n - 1);
    }

private:
    std::mt19937_64 engine_;
};

TrialOutcome lockstep_trial(const SimConfig& cfg, std::uint64_t seed) {
    TrialRng rng(seed);
    const int nf = cfg.follower_count();
    const int thr = cfg.majority_threshold();
    const double p = cfg.loss_rate;
    const std::vector<int> timeout_set = cfg.lockstep_timeout_steps();

    TrialOutcome out;
    out.seed = seed;
    out.candidacy_steps.assign(static_cast<std::size_t>(nf), std::nullopt);
    out.heartbeats_received.assign(static_cast<std::size_t>(nf), 0);

    auto fresh_timeout = [&]() {
        // a single-valued set consumes no draw
        return timeout_set.size() == 1 ? timeout_set.front()
                                       : timeout_set[rng.uniform_index(timeout_set.size())];
    };

    std::vector<int> counters(static_cast<std::size_t>(nf));
    for (int f = 0; f < nf; ++f) counters[static_cast<std::size_t>(f)] = fresh_timeout();

    int candidates = 0;
    for (std::int64_t step = 1; step <= cfg.max_steps; ++step) {
        for (int f = 0; f < nf; ++f) {
            const std::size_t fi = static_cast<std::size_t>(f);
            if (out.candidacy_steps[fi]) continue;
            if (rng.uniform01() < p) {
                if (--counters[fi] == 0) {
                    out.candidacy_steps[fi] = step;
                    ++candidates;
                }
            } else {
                ++out.heartbeats_received[fi];
                counters[fi] = fresh_timeout();
            }
        }
        if (candidates >= thr) {
            out.split_step = step;
            out.split_time_ms = static_cast<double>(step) * cfg.heartbeat_interval_ms;
            return out;
        }
    }

    out.split_step = cfg.max_steps;
    out.split_time_ms = static_cast<double>(cfg.max_steps) * cfg.heartbeat_interval_ms;
    out.censored = true;
    return out;
}

TrialOutcome timed_trial(const SimConfig& cfg, std::uint64_t seed) {
    TrialRng rng(seed);
    const int nf = cfg.follower_count();
    const int thr = cfg.majority_threshold();
    const double p = cfg.loss_rate;
    const double h = cfg.heartbeat_interval_ms;
    const auto [to_lo, to_hi] = cfg.timeout_range_ms;
    const auto [lat_lo, lat_hi] = cfg.latency_range_ms;

    TrialOutcome out;
    out.seed = seed;
    out.candidacy_steps.assign(static_cast<std::size_t>(nf), std::nullopt);
    out.heartbeats_received.assign(static_cast<std::size_t>(nf), 0);

    // deadline[f]: when f's current election timeout fires (absolute ms)
    std::vector<double> deadline(static_cast<std::size_t>(nf));
    for (int f = 0; f < nf; ++f)
        deadline[static_cast<std::size_t>(f)] = rng.uniform(to_lo, to_hi);

    std::vector<double> candidacy_time;
    candidacy_time.reserve(static_cast<std::size_t>(nf));

    for (std::int64_t step = 1; step <= cfg.max_steps; ++step) {
        const double now = static_cast<double>(step) * h;  // broadcast `step` leaves
        for (int f = 0; f < nf; ++f) {
            const std::size_t fi = static_cast<std::size_t>(f);
            if (out.candidacy_steps[fi]) continue;
            if (deadline[fi] <= now) {
                // timed out before this broadcast
                out.candidacy_steps[fi] =
                    static_cast<std::int64_t>(std::floor(deadline[fi] / h));
                candidacy_time.push_back(deadline[fi]);
                continue;
            }
            if (rng.uniform01() < p) continue;  // broadcast to f lost
            const double arrival = now + rng.uniform(lat_lo, lat_hi);
            if (deadline[fi] <= arrival) {
                // fires while the heartbeat is in flight; the late arrival is stale
                out.candidacy_steps[fi] =
                    static_cast<std::int64_t>(std::floor(deadline[fi] / h));
                candidacy_time.push_back(deadline[fi]);
                continue;
            }
            ++out.heartbeats_received[fi];
            deadline[fi] = arrival + rng.uniform(to_lo, to_hi);
        }

        // candidacies recorded during this step can postdate `now` by up to
        // one latency; only those settled (<= now) count toward the split,
        // which also guarantees the settled set is complete up to `now`.
        int settled = 0;
        for (double t : candidacy_time)
            if (t <= now) ++settled;
        if (settled >= thr) {
            std::vector<double> times;
            times.reserve(candidacy_time.size());
            for (double t : candidacy_time)
                if (t <= now) times.push_back(t);
            std::nth_element(times.begin(), times.begin() + (thr - 1), times.end());
            const double split_time = times[static_cast<std::size_t>(thr - 1)];
            out.split_time_ms = split_time;
            out.split_step = static_cast<std::int64_t>(std::floor(split_time / h));
            return out;
        }
    }

    out.split_step = cfg.max_steps;
    out.split_time_ms = static_cast<double>(cfg.max_steps) * h;
    out.censored = true;
    return out;
}

} // namespace

void SimConfig::validate() const {
    if (n_nodes < 3)
        throw std::invalid_argument("n_nodes must be at least 3");
    if (!std::isfinite(loss_rate) || loss_rate < 0.0 || loss_rate > 1.0)
        throw std::invalid_argument("loss_rate must be within [0, 1]");
    if (!std::isfinite(heartbeat_interval_ms) || heartbeat_interval_ms <= 0.0)
        throw std::invalid_argument("heartbeat_interval_ms must be positive");
    if (!std::isfinite(timeout_range_ms.first) || !std::isfinite(timeout_range_ms.second) ||
        timeout_range_ms.first <= 0.0 || timeout_range_ms.second < timeout_range_ms.first)
        throw std::invalid_argument("timeout range must satisfy 0 < lo <= hi");
    if (std::floor(timeout_range_ms.first / heartbeat_interval_ms) < 1.0)
        throw std::invalid_argument(
            "timeout range must cover at least one heartbeat interval");
    if (!std::isfinite(latency_range_ms.first) || !std::isfinite(latency_range_ms.second) ||
        latency_range_ms.first < 0.0 || latency_range_ms.second < latency_range_ms.first)
        throw std::invalid_argument("latency range must satisfy 0 <= lo <= hi");
    if (latency_range_ms.second >= heartbeat_interval_ms)
        throw std::invalid_argument(
            "latency must stay below the heartbeat interval");
    if (trials < 1)
        throw std::invalid_argument("trials must be at least 1");
    if (max_steps < 1)
        throw std::invalid_argument("max_steps must be at least 1");
}

std::vector<int> SimConfig::lockstep_timeout_steps() const {
    const int lo = static_cast<int>(std::floor(timeout_range_ms.first / heartbeat_interval_ms));
    const int hi = static_cast<int>(std::floor(timeout_range_ms.second / heartbeat_interval_ms));
    std::vector<int> steps;
    for (int k = lo; k <= hi; ++k) steps.push_back(k);
    return steps;
}

std::uint64_t derive_trial_seed(std::uint64_t master_seed, std::uint64_t trial_index) {
    return splitmix64(splitmix64(master_seed) ^
                      (0x9e3779b97f4a7c15ULL * (trial_index + 1)));
}

TrialOutcome run_trial(const SimConfig& config, std::int64_t trial_index) {
    config.validate();
    if (trial_index < 0)
        throw std::invalid_argument("trial_index must be nonnegative");
    const std::uint64_t seed =
        derive_trial_seed(config.master_seed, static_cast<std::uint64_t>(trial_index));
    return config.fidelity == Fidelity::lockstep ? lockstep_trial(config, seed)
                                                 : timed_trial(config, seed);
}

std::vector<TrialOutcome> run_batch(const SimConfig& config) {
    config.validate();
    std::vector<TrialOutcome> outcomes;
    outcomes.reserve(static_cast<std::size_t>(config.trials));
    for (std::int64_t i = 0; i < config.trials; ++i)
        outcomes.push_back(run_trial(config, i));
    return outcomes;
}

HeartbeatStats empirical_heartbeat_stats(const std::vector<TrialOutcome>& outcomes) {
    if (outcomes.empty())
        throw std::invalid_argument("empirical_heartbeat_stats: empty batch");

    HeartbeatStats stats;
    double sum_heartbeats = 0.0;
    double sum_steps = 0.0;
    for (const TrialOutcome& out : outcomes) {
        for (std::size_t f = 0; f < out.candidacy_steps.size(); ++f) {
            if (!out.candidacy_steps[f]) continue;
            // per-pair count: the heartbeat that opened the window, plus
            // in-trial deliveries
            sum_heartbeats += 1.0 + static_cast<double>(out.heartbeats_received[f]);
            sum_steps += static_cast<double>(*out.candidacy_steps[f]);
            ++stats.candidate_pairs;
            if (out.heartbeats_received[f] == 0) ++stats.zero_receipt_pairs;
        }
    }
    if (stats.candidate_pairs == 0)
        throw std::domain_error(
            "empirical_heartbeat_stats: no follower reached candidacy");
    stats.mean_heartbeats = sum_heartbeats / static_cast<double>(stats.candidate_pairs);
    // ratio of totals, not mean of per-pair ratios: the handful of pairs
    // that reach candidacy with very few heartbeats would otherwise drag
    // the interval upward by a percent-scale bias that never averages out
    stats.mean_receipt_interval_steps = sum_steps / sum_heartbeats;
    return stats;
}

} // namespace raftsplit
