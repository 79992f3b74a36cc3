#include "raftsplit/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace raftsplit {

namespace {

/// Compensated (Kahan) accumulator; the split sums run over millions of
/// terms spanning many orders of magnitude.
struct KahanSum {
    double sum = 0.0;
    double comp = 0.0;
    void add(double x) {
        const double y = x - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
};

void check_nodes(int n_nodes) {
    if (n_nodes < 3)
        throw std::invalid_argument("n_nodes must be at least 3");
}

/// (I - Q)^-1 by Grassmann–Taksar–Heyman-style elimination. Every pivot is
/// rebuilt from the row's absorption mass plus its remaining off-diagonal
/// magnitudes, and every update adds nonnegative terms, so nothing ever
/// cancels: each entry keeps near-full relative accuracy even when Q is
/// within 1e-10 of stochastic and the plain inverse would lose eight digits.
Matrix fundamental_inverse(const Matrix& q, std::vector<double> absorb) {
    const std::size_t t = q.rows();
    // work packs the factorization: below the diagonal the multipliers,
    // above it the magnitudes of the U off-diagonals. The diagonal slots
    // still hold Q's self-loops and are never read; the true diagonal of
    // I - Q lives in diag[], rebuilt additively at elimination time.
    Matrix work = q;
    std::vector<double> diag(t, 0.0);
    for (std::size_t k = 0; k < t; ++k) {
        double d = absorb[k];
        for (std::size_t j = k + 1; j < t; ++j) d += work(k, j);
        if (!(d > 0.0))
            throw std::domain_error(
                "fundamental_matrix: a transient state cannot reach absorption");
        diag[k] = d;
        for (std::size_t i = k + 1; i < t; ++i) {
            const double l = work(i, k) / d;
            work(i, k) = l;
            if (l == 0.0) continue;
            for (std::size_t j = k + 1; j < t; ++j)
                if (j != i) work(i, j) += l * work(k, j);
            absorb[i] += l * absorb[k];
        }
    }

    // Both solves stay in nonnegative territory as well.
    Matrix inverse(t, t);
    std::vector<double> y(t);
    for (std::size_t c = 0; c < t; ++c) {
        for (std::size_t i = 0; i < t; ++i) {
            double v = i == c ? 1.0 : 0.0;
            for (std::size_t k = 0; k < i; ++k) v += work(i, k) * y[k];
            y[i] = v;
        }
        for (std::size_t ri = t; ri-- > 0;) {
            double v = y[ri];
            for (std::size_t j = ri + 1; j < t; ++j) v += work(ri, j) * inverse(j, c);
            inverse(ri, c) = v / diag[ri];
        }
    }
    return inverse;
}

void check_prob(double a) {
    if (!std::isfinite(a) || a < 0.0 || a > 1.0)
        throw std::invalid_argument("absorption probability must be within [0, 1]");
}

/// log C(nf, m) for m = 0..nf.
std::vector<double> log_binomial_row(int nf) {
    std::vector<double> row(static_cast<std::size_t>(nf) + 1);
    const double lnf = std::lgamma(static_cast<double>(nf) + 1.0);
    for (int m = 0; m <= nf; ++m)
        row[static_cast<std::size_t>(m)] =
            lnf - std::lgamma(static_cast<double>(m) + 1.0) -
            std::lgamma(static_cast<double>(nf - m) + 1.0);
    return row;
}

/// P(Bin(nf, a) >= thr), summed in log space so values like 1e-70 keep
/// full relative accuracy.
double binomial_tail(double a, int nf, int thr, const std::vector<double>& lrow) {
    if (a <= 0.0) return 0.0;
    if (a >= 1.0) return 1.0;
    const double la = std::log(a);
    const double l1a = std::log1p(-a);
    KahanSum s;
    for (int m = thr; m <= nf; ++m) {
        const double lt = lrow[static_cast<std::size_t>(m)] + m * la + (nf - m) * l1a;
        s.add(std::exp(lt));
    }
    return std::clamp(s.sum, 0.0, 1.0);
}

/// P(Pois(nf * a) >= thr) via the term recurrence on the lower sum.
double poisson_tail(double a, int nf, int thr) {
    if (a <= 0.0) return 0.0;
    const double lambda = static_cast<double>(nf) * a;
    double term = std::exp(-lambda);
    KahanSum lower;
    for (int m = 0; m < thr; ++m) {
        lower.add(term);
        term *= lambda / static_cast<double>(m + 1);
    }
    return std::clamp(1.0 - lower.sum, 0.0, 1.0);
}

/// Clamp a per-step CDF monotone, derive the PDF, and fill range moments.
SplitDistribution make_distribution(std::vector<double> cdf) {
    SplitDistribution d;
    double prev = 0.0;
    for (double& v : cdf) {
        v = std::clamp(v, prev, 1.0);
        prev = v;
    }
    d.pdf.resize(cdf.size(), 0.0);
    KahanSum mean;
    KahanSum second;
    prev = 0.0;
    for (std::size_t n = 0; n < cdf.size(); ++n) {
        d.pdf[n] = cdf[n] - prev;
        prev = cdf[n];
        mean.add(1.0 - cdf[n]);
        second.add(static_cast<double>(n) * static_cast<double>(n) * d.pdf[n]);
    }
    d.mean_steps = mean.sum;
    d.variance_steps = second.sum - mean.sum * mean.sum;
    d.truncation_step = cdf.empty() ? 0 : cdf.size() - 1;
    d.truncated_tail_mass = cdf.empty() ? 1.0 : 1.0 - cdf.back();
    d.cdf = std::move(cdf);
    return d;
}

void check_curve(const AbsorptionCurve& curve) {
    if (curve.values.empty())
        throw std::invalid_argument("absorption curve must not be empty");
}

} // namespace

AbsorptionCurve absorption_curve_recurrence(int k, double loss_rate,
                                            std::size_t max_step) {
    if (k < 1) throw std::invalid_argument("timeout must be at least 1 step");
    if (!std::isfinite(loss_rate) || loss_rate < 0.0 || loss_rate > 1.0)
        throw std::invalid_argument("loss_rate must be within [0, 1]");

    const double p = loss_rate;
    const double pk = std::pow(p, k);
    const double step_gain = (1.0 - p) * pk;
    const std::size_t kk = static_cast<std::size_t>(k);

    AbsorptionCurve curve;
    curve.values.assign(max_step + 1, 0.0);
    for (std::size_t n = kk; n <= max_step; ++n) {
        if (n == kk)
            curve.values[n] = pk;
        else
            curve.values[n] = std::min(
                1.0, curve.values[n - 1] + (1.0 - curve.values[n - kk - 1]) * step_gain);
    }
    return curve;
}

AbsorptionCurve absorption_curve_recurrence(const ModelParams& params,
                                            std::size_t max_step) {
    params.validate();
    if (params.timeout_steps.size() > 1)
        throw std::invalid_argument(
            "timeout mixtures have no scalar recurrence; use absorption_curve_matrix "
            "on the built chain");
    return absorption_curve_recurrence(params.timeout_steps.front(), params.loss_rate,
                                       max_step);
}

AbsorptionCurve absorption_curve_matrix(const TransitionMatrix& chain,
                                        std::size_t max_step) {
    const std::size_t t = chain.transient_count;
    const std::size_t total = t + chain.absorbing_count;
    if (chain.full.rows() != total || chain.initial_distribution.size() != total)
        throw std::invalid_argument("absorption_curve_matrix: inconsistent chain");

    const auto dists = propagate(chain.initial_distribution, chain.full, max_step);
    AbsorptionCurve curve;
    curve.values.reserve(dists.size());
    double prev = 0.0;
    for (const auto& d : dists) {
        double absorbed = 0.0;
        for (std::size_t j = t; j < total; ++j) absorbed += d[j];
        absorbed = std::clamp(absorbed, prev, 1.0);
        prev = absorbed;
        curve.values.push_back(absorbed);
    }
    return curve;
}

double split_probability(double absorption_prob, int n_nodes) {
    check_nodes(n_nodes);
    check_prob(absorption_prob);
    const int nf = n_nodes - 1;
    const int thr = n_nodes / 2 + 1;
    return binomial_tail(absorption_prob, nf, thr, log_binomial_row(nf));
}

double split_probability_poisson(double absorption_prob, int n_nodes) {
    check_nodes(n_nodes);
    check_prob(absorption_prob);
    return poisson_tail(absorption_prob, n_nodes - 1, n_nodes / 2 + 1);
}

SplitDistribution split_cdf(const AbsorptionCurve& curve, int n_nodes) {
    check_nodes(n_nodes);
    check_curve(curve);
    const int nf = n_nodes - 1;
    const int thr = n_nodes / 2 + 1;
    const auto lrow = log_binomial_row(nf);

    std::vector<double> cdf;
    cdf.reserve(curve.values.size());
    for (double a : curve.values) cdf.push_back(binomial_tail(a, nf, thr, lrow));
    return make_distribution(std::move(cdf));
}

SplitDistribution split_cdf_poisson(const AbsorptionCurve& curve, int n_nodes) {
    check_nodes(n_nodes);
    check_curve(curve);
    const int nf = n_nodes - 1;
    const int thr = n_nodes / 2 + 1;

    std::vector<double> cdf;
    cdf.reserve(curve.values.size());
    for (double a : curve.values) cdf.push_back(poisson_tail(a, nf, thr));
    return make_distribution(std::move(cdf));
}

SplitMoments split_moments(const AbsorptionCurve& curve, int n_nodes,
                           double epsilon, std::size_t step_cap) {
    check_nodes(n_nodes);
    check_curve(curve);
    if (!(epsilon > 0.0) || epsilon >= 1.0)
        throw std::invalid_argument("epsilon must be within (0, 1)");
    if (step_cap == 0)
        throw std::invalid_argument("step_cap must be at least 1");

    const int nf = n_nodes - 1;
    const int thr = n_nodes / 2 + 1;
    const auto lrow = log_binomial_row(nf);
    const std::size_t limit = std::min(curve.last_step(), step_cap);

    KahanSum mean;
    KahanSum second;
    double prev_cdf = 0.0;
    double tail = 1.0;
    std::size_t last = 0;
    bool converged = false;
    for (std::size_t n = 0; n <= limit; ++n) {
        const double cdf =
            std::clamp(binomial_tail(curve.values[n], nf, thr, lrow), prev_cdf, 1.0);
        mean.add(1.0 - cdf);
        second.add(static_cast<double>(n) * static_cast<double>(n) * (cdf - prev_cdf));
        prev_cdf = cdf;
        tail = 1.0 - cdf;
        last = n;
        if (tail < epsilon) {
            converged = true;
            break;
        }
    }

    SplitMoments m;
    m.mean_steps = mean.sum;
    m.variance_steps = second.sum - mean.sum * mean.sum;
    m.truncation_step = last;
    m.truncated_tail_mass = tail;
    m.capped = !converged;  // curve exhausted or step cap hit with tail >= epsilon
    return m;
}

double expected_candidates(const AbsorptionCurve& curve, int n_nodes,
                           std::size_t step) {
    check_nodes(n_nodes);
    check_curve(curve);
    if (step >= curve.values.size())
        throw std::out_of_range("step is beyond the curve's range");
    return static_cast<double>(n_nodes - 1) * curve.values[step];
}

double expected_replies(const AbsorptionCurve& curve, int n_nodes, std::size_t step) {
    check_nodes(n_nodes);
    check_curve(curve);
    if (step >= curve.values.size())
        throw std::out_of_range("step is beyond the curve's range");
    return static_cast<double>(n_nodes - 1) * (1.0 - curve.values[step]);
}

FundamentalMatrix fundamental_matrix(const TransitionMatrix& chain) {
    const std::size_t t = chain.transient_count;
    if (t == 0 || chain.q_block.rows() != t)
        throw std::invalid_argument("fundamental_matrix: inconsistent chain");
    if (chain.r_block.max_abs() == 0.0)
        throw std::domain_error(
            "chain never absorbs (loss rate 0); the fundamental matrix is undefined");

    std::vector<double> absorb(t, 0.0);
    for (std::size_t i = 0; i < t; ++i)
        for (std::size_t j = 0; j < chain.r_block.cols(); ++j)
            absorb[i] += chain.r_block(i, j);

    FundamentalMatrix fm;
    fm.n_matrix = fundamental_inverse(chain.q_block, std::move(absorb));

    // Initial mass sits on the reset states (all transient), so the pi-weighted
    // row sums below are exact expectations under the chain's start law.
    double heartbeats = 0.0;
    double steps = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
        const double pi = chain.initial_distribution[i];
        if (pi == 0.0) continue;
        double reset_visits = 0.0;
        for (std::size_t s : chain.reset_states) reset_visits += fm.n_matrix(i, s);
        heartbeats += pi * reset_visits;
        double row = 0.0;
        for (std::size_t j = 0; j < t; ++j) row += fm.n_matrix(i, j);
        steps += pi * row;
    }
    fm.expected_heartbeats = heartbeats;
    fm.time_to_candidate_steps = steps;
    fm.mean_receipt_interval_steps = steps / heartbeats;
    return fm;
}

ModelEvaluation evaluate_model(const ModelParams& params, double epsilon,
                               std::size_t step_cap) {
    params.validate();
    if (!(epsilon > 0.0) || epsilon >= 1.0)
        throw std::invalid_argument("epsilon must be within (0, 1)");
    if (step_cap == 0)
        throw std::invalid_argument("step_cap must be at least 1");
    if (params.loss_rate == 0.0)
        throw std::domain_error(
            "loss rate 0: followers never become candidates, so the split "
            "distribution is degenerate and moments are undefined");

    ModelEvaluation ev;
    ev.chain = build_chain(params);

    const int nf = params.follower_count();
    const int thr = params.majority_threshold();
    const auto lrow = log_binomial_row(nf);

    // Grow the absorption curve until the binomial split tail drops below
    // epsilon (the split CDF is monotone in the absorption probability, so
    // the stop condition is monotone too), or until the step cap.
    std::vector<double>& values = ev.curve.values;
    values.reserve(1024);
    if (ev.chain.absorbing_count == 1) {
        const double p = params.loss_rate;
        const int k = params.timeout_steps.front();
        const double pk = std::pow(p, k);
        const double step_gain = (1.0 - p) * pk;
        const std::size_t kk = static_cast<std::size_t>(k);
        for (std::size_t n = 0;; ++n) {
            double a = 0.0;
            if (n == kk)
                a = pk;
            else if (n > kk)
                a = std::min(1.0,
                             values[n - 1] + (1.0 - values[n - kk - 1]) * step_gain);
            values.push_back(a);
            if (1.0 - binomial_tail(a, nf, thr, lrow) < epsilon) break;
            if (n >= step_cap) break;
        }
    } else {
        const std::size_t t = ev.chain.transient_count;
        const std::size_t total = t + ev.chain.absorbing_count;
        RowVector cur = ev.chain.initial_distribution;
        RowVector next(total);
        for (std::size_t n = 0;; ++n) {
            double absorbed = 0.0;
            for (std::size_t j = t; j < total; ++j) absorbed += cur[j];
            absorbed = std::clamp(absorbed, values.empty() ? 0.0 : values.back(), 1.0);
            values.push_back(absorbed);
            if (1.0 - binomial_tail(absorbed, nf, thr, lrow) < epsilon) break;
            if (n >= step_cap) break;
            std::fill(next.begin(), next.end(), 0.0);
            for (std::size_t i = 0; i < total; ++i) {
                const double vi = cur[i];
                if (vi == 0.0) continue;
                for (std::size_t j = 0; j < total; ++j)
                    next[j] += vi * ev.chain.full(i, j);
            }
            cur.swap(next);
        }
    }

    ev.binomial = split_cdf(ev.curve, params.n_nodes);
    const SplitMoments moments =
        split_moments(ev.curve, params.n_nodes, epsilon, step_cap);
    ev.binomial.mean_steps = moments.mean_steps;
    ev.binomial.variance_steps = moments.variance_steps;
    ev.binomial.truncation_step = moments.truncation_step;
    ev.binomial.truncated_tail_mass = moments.truncated_tail_mass;
    ev.binomial.capped = moments.capped;

    ev.poisson = split_cdf_poisson(ev.curve, params.n_nodes);
    ev.poisson.capped = ev.poisson.truncated_tail_mass >= epsilon;

    ev.fm = fundamental_matrix(ev.chain);
    return ev;
}

} // namespace raftsplit
