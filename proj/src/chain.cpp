#include "raftsplit/chain.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace raftsplit {

namespace {

void check_loss_rate(double p) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0)
        throw std::invalid_argument("loss_rate must be within [0, 1]");
}

void check_timeouts(const std::vector<int>& timeouts) {
    if (timeouts.empty())
        throw std::invalid_argument("timeout_steps must not be empty");
    int prev = 0;
    for (int k : timeouts) {
        if (k < 1)
            throw std::invalid_argument("every timeout must be at least 1 step");
        if (k <= prev)
            throw std::invalid_argument("timeout_steps must be strictly ascending");
        prev = k;
    }
}

/// Split full into the canonical blocks and attach bookkeeping.
TransitionMatrix finish_chain(Matrix full, std::size_t t, std::size_t r,
                              std::vector<std::size_t> reset_states) {
    TransitionMatrix chain;
    chain.transient_count = t;
    chain.absorbing_count = r;
    chain.reset_states = std::move(reset_states);

    chain.q_block = Matrix(t, t);
    chain.r_block = Matrix(t, r);
    for (std::size_t i = 0; i < t; ++i) {
        for (std::size_t j = 0; j < t; ++j) chain.q_block(i, j) = full(i, j);
        for (std::size_t j = 0; j < r; ++j) chain.r_block(i, j) = full(i, t + j);
    }

    chain.initial_distribution.assign(t + r, 0.0);
    for (std::size_t s : chain.reset_states)
        chain.initial_distribution[s] = 1.0 / static_cast<double>(chain.reset_states.size());

    chain.full = std::move(full);
    if (!chain.full.is_row_stochastic(1e-12))
        throw std::logic_error("chain construction produced a non-stochastic matrix");
    return chain;
}

} // namespace

void ModelParams::validate() const {
    if (n_nodes < 3)
        throw std::invalid_argument("n_nodes must be at least 3");
    check_loss_rate(loss_rate);
    check_timeouts(timeout_steps);
    if (!std::isfinite(heartbeat_interval_ms) || heartbeat_interval_ms <= 0.0)
        throw std::invalid_argument("heartbeat_interval_ms must be positive");
}

TransitionMatrix build_single_timeout_chain(int k, double loss_rate) {
    if (k < 1) throw std::invalid_argument("timeout must be at least 1 step");
    check_loss_rate(loss_rate);

    const std::size_t t = static_cast<std::size_t>(k);
    const double p = loss_rate;
    Matrix full(t + 1, t + 1, 0.0);
    // transient row i: counter at K-i; a receipt resets, a loss decrements
    for (std::size_t i = 0; i < t; ++i) {
        full(i, 0) += 1.0 - p;
        full(i, i + 1) += p;
    }
    full(t, t) = 1.0;  // counter expired: candidate, absorbing
    return finish_chain(std::move(full), t, 1, {0});
}

TransitionMatrix build_multi_timeout_chain(const std::vector<int>& timeouts,
                                           double loss_rate) {
    check_timeouts(timeouts);
    check_loss_rate(loss_rate);

    const std::size_t r = timeouts.size();
    const double p = loss_rate;
    std::vector<std::size_t> offsets(r);
    std::size_t t = 0;
    for (std::size_t i = 0; i < r; ++i) {
        offsets[i] = t;
        t += static_cast<std::size_t>(timeouts[i]);
    }

    Matrix full(t + r, t + r, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
        const std::size_t k = static_cast<std::size_t>(timeouts[i]);
        for (std::size_t d = 0; d < k; ++d) {
            const std::size_t s = offsets[i] + d;  // stage i, counter k - d
            for (std::size_t j = 0; j < r; ++j)    // receipt: fresh timeout, any stage
                full(s, offsets[j]) += (1.0 - p) / static_cast<double>(r);
            if (d + 1 < k)
                full(s, s + 1) += p;               // loss: counter decrements
            else
                full(s, t + i) += p;               // last decrement: candidate
        }
        full(t + i, t + i) = 1.0;
    }
    return finish_chain(std::move(full), t, r, offsets);
}

TransitionMatrix build_chain(const ModelParams& params) {
    params.validate();
    if (params.timeout_steps.size() == 1)
        return build_single_timeout_chain(params.timeout_steps.front(), params.loss_rate);
    return build_multi_timeout_chain(params.timeout_steps, params.loss_rate);
}

} // namespace raftsplit
