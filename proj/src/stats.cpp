#include "raftsplit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace raftsplit {

namespace {

/// Common shape for KS evaluation: a right-continuous step function that
/// jumps to values[i] at steps[i].
struct StepCurve {
    std::vector<std::int64_t> steps;
    std::vector<double> values;
};

StepCurve to_curve(const EmpiricalCdf& cdf) {
    if (cdf.steps.empty())
        throw std::invalid_argument("ks_distance: empty empirical CDF");
    return {cdf.steps, cdf.probabilities};
}

StepCurve to_curve(const SplitDistribution& dist) {
    if (dist.cdf.empty())
        throw std::invalid_argument("ks_distance: empty split distribution");
    StepCurve curve;
    curve.steps.resize(dist.cdf.size());
    for (std::size_t i = 0; i < dist.cdf.size(); ++i)
        curve.steps[i] = static_cast<std::int64_t>(i);
    curve.values = dist.cdf;
    return curve;
}

double ks_on_curves(const StepCurve& a, const StepCurve& b) {
    const std::int64_t limit = std::min(a.steps.back(), b.steps.back());
    std::size_t i = 0;
    std::size_t j = 0;
    double va = 0.0;
    double vb = 0.0;
    double best = 0.0;
    while (i < a.steps.size() || j < b.steps.size()) {
        const std::int64_t sa =
            i < a.steps.size() ? a.steps[i] : std::numeric_limits<std::int64_t>::max();
        const std::int64_t sb =
            j < b.steps.size() ? b.steps[j] : std::numeric_limits<std::int64_t>::max();
        const std::int64_t s = std::min(sa, sb);
        if (s > limit) break;
        if (sa == s) va = a.values[i++];
        if (sb == s) vb = b.values[j++];
        best = std::max(best, std::fabs(va - vb));
    }
    return best;
}

std::vector<std::int64_t> uncensored_steps(const std::vector<TrialOutcome>& outcomes,
                                           std::int64_t& censored) {
    if (outcomes.empty())
        throw std::invalid_argument("empty batch");
    std::vector<std::int64_t> steps;
    steps.reserve(outcomes.size());
    censored = 0;
    for (const TrialOutcome& out : outcomes) {
        if (out.censored)
            ++censored;
        else
            steps.push_back(out.split_step);
    }
    if (steps.empty())
        throw std::domain_error("every trial was censored; no split distribution");
    std::sort(steps.begin(), steps.end());
    return steps;
}

} // namespace

EmpiricalCdf empirical_cdf(const std::vector<TrialOutcome>& outcomes) {
    EmpiricalCdf cdf;
    std::int64_t censored = 0;
    const std::vector<std::int64_t> steps = uncensored_steps(outcomes, censored);
    cdf.sample_count = static_cast<std::int64_t>(outcomes.size());
    cdf.censored_count = censored;

    // censored trials stay in the denominator, so the CDF tops out below 1
    // whenever anything was censored
    const double total = static_cast<double>(outcomes.size());
    std::int64_t seen = 0;
    for (std::size_t i = 0; i < steps.size();) {
        std::size_t j = i;
        while (j < steps.size() && steps[j] == steps[i]) ++j;
        seen += static_cast<std::int64_t>(j - i);
        cdf.steps.push_back(steps[i]);
        cdf.probabilities.push_back(static_cast<double>(seen) / total);
        i = j;
    }
    return cdf;
}

double ks_distance(const EmpiricalCdf& a, const EmpiricalCdf& b) {
    return ks_on_curves(to_curve(a), to_curve(b));
}

double ks_distance(const SplitDistribution& analytical, const EmpiricalCdf& empirical) {
    return ks_on_curves(to_curve(analytical), to_curve(empirical));
}

double ks_distance(const SplitDistribution& a, const SplitDistribution& b) {
    return ks_on_curves(to_curve(a), to_curve(b));
}

Summary summarize(const std::vector<TrialOutcome>& outcomes) {
    Summary s;
    std::int64_t censored = 0;
    const std::vector<std::int64_t> steps = uncensored_steps(outcomes, censored);
    s.sample_count = static_cast<std::int64_t>(outcomes.size());
    s.censored_count = censored;

    const std::size_t n = steps.size();
    double sum = 0.0;
    for (std::int64_t v : steps) sum += static_cast<double>(v);
    s.mean = sum / static_cast<double>(n);

    if (n > 1) {
        double ss = 0.0;
        for (std::int64_t v : steps) {
            const double d = static_cast<double>(v) - s.mean;
            ss += d * d;
        }
        s.variance = ss / static_cast<double>(n - 1);
    }

    for (double q : {0.05, 0.25, 0.5, 0.75, 0.95}) {
        const double pos = std::ceil(q * static_cast<double>(n)) - 1.0;
        const std::size_t idx = static_cast<std::size_t>(
            std::clamp(pos, 0.0, static_cast<double>(n - 1)));
        s.quantiles.emplace_back(q, static_cast<double>(steps[idx]));
    }
    return s;
}

} // namespace raftsplit
