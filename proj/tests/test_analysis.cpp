#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "raftsplit/analysis.hpp"
#include "raftsplit/chain.hpp"

using raftsplit::AbsorptionCurve;
using raftsplit::absorption_curve_matrix;
using raftsplit::absorption_curve_recurrence;
using raftsplit::build_multi_timeout_chain;
using raftsplit::build_single_timeout_chain;
using raftsplit::evaluate_model;
using raftsplit::fundamental_matrix;
using raftsplit::ModelParams;
using raftsplit::SplitDistribution;
using raftsplit::SplitMoments;
using raftsplit::TransitionMatrix;

namespace {

/// Exhaustive path enumeration over the mixture rules themselves — the
/// oracle tracks (stage, counter) masses directly and never touches the
/// matrix machinery it cross-checks.
struct MixtureEnumerator {
    std::vector<int> timeouts;
    double p;
    std::map<std::pair<int, int>, double> mass;  // (stage, counter) -> probability
    double absorbed = 0.0;

    MixtureEnumerator(std::vector<int> ts, double loss) : timeouts(std::move(ts)), p(loss) {
        const double share = 1.0 / static_cast<double>(timeouts.size());
        for (std::size_t i = 0; i < timeouts.size(); ++i)
            mass[{static_cast<int>(i), timeouts[i]}] = share;
    }

    void step() {
        std::map<std::pair<int, int>, double> next;
        const double receipt_share =
            (1.0 - p) / static_cast<double>(timeouts.size());
        for (const auto& [state, m] : mass) {
            const auto [stage, counter] = state;
            for (std::size_t j = 0; j < timeouts.size(); ++j)
                next[{static_cast<int>(j), timeouts[j]}] += m * receipt_share;
            if (counter > 1)
                next[{stage, counter - 1}] += m * p;
            else
                absorbed += m * p;
        }
        mass = std::move(next);
    }
};

ModelParams params_for(int n_nodes, double p, std::vector<int> timeouts) {
    ModelParams params;
    params.n_nodes = n_nodes;
    params.loss_rate = p;
    params.timeout_steps = std::move(timeouts);
    return params;
}

} // namespace

TEST_CASE("recurrence edge cases by hand") {
    // p = 0: nothing is ever absorbed
    const AbsorptionCurve none = absorption_curve_recurrence(3, 0.0, 50);
    for (double v : none.values) CHECK(v == 0.0);

    // p = 1: absorption exactly at step K
    const AbsorptionCurve all = absorption_curve_recurrence(3, 1.0, 10);
    for (std::size_t n = 0; n < 3; ++n) CHECK(all.values[n] == 0.0);
    for (std::size_t n = 3; n <= 10; ++n) CHECK(all.values[n] == 1.0);

    // K = 1, p = 0.5: a_n = 1 - 0.5^n
    const AbsorptionCurve half = absorption_curve_recurrence(1, 0.5, 10);
    for (std::size_t n = 0; n <= 10; ++n)
        CHECK(half.values[n] ==
              doctest::Approx(1.0 - std::pow(0.5, static_cast<double>(n))).epsilon(1e-14));
}

TEST_CASE("recurrence agrees with matrix propagation within 1e-10") {
    for (int k : {1, 3, 5}) {
        for (double p : {0.05, 0.5, 0.9}) {
            const AbsorptionCurve rec = absorption_curve_recurrence(k, p, 2000);
            const AbsorptionCurve mat =
                absorption_curve_matrix(build_single_timeout_chain(k, p), 2000);
            REQUIRE(rec.values.size() == mat.values.size());
            for (std::size_t n = 0; n < rec.values.size(); ++n)
                CHECK(std::fabs(rec.values[n] - mat.values[n]) < 1e-10);
        }
    }
}

TEST_CASE("absorption curves are monotone, bounded, and zero before K") {
    for (int k : {1, 2, 4, 8}) {
        for (double p : {0.05, 0.3, 0.7, 0.9}) {
            const AbsorptionCurve curve = absorption_curve_recurrence(k, p, 500);
            for (std::size_t n = 0; n < static_cast<std::size_t>(k); ++n)
                CHECK(curve.values[n] == 0.0);
            double prev = 0.0;
            for (double v : curve.values) {
                CHECK(v >= prev);
                CHECK(v <= 1.0);
                prev = v;
            }
        }
    }
}

TEST_CASE("absorption probability grows with the loss rate") {
    double prev = -1.0;
    for (double p : {0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 0.95}) {
        const double a50 = absorption_curve_recurrence(3, p, 50).values[50];
        CHECK(a50 > prev);
        prev = a50;
    }
}

TEST_CASE("the recurrence refuses timeout mixtures and points at the matrix path") {
    const ModelParams mixture = params_for(5, 0.5, {2, 3});
    CHECK_THROWS_WITH_AS(absorption_curve_recurrence(mixture, 10),
                         doctest::Contains("absorption_curve_matrix"),
                         std::invalid_argument);
    const ModelParams single = params_for(5, 0.5, {2});
    CHECK(absorption_curve_recurrence(single, 10).values[2] == doctest::Approx(0.25));
}

TEST_CASE("mixture chain {2, 3} at p = 0.5 matches exhaustive path enumeration") {
    const TransitionMatrix chain = build_multi_timeout_chain({2, 3}, 0.5);
    const AbsorptionCurve curve = absorption_curve_matrix(chain, 6);

    MixtureEnumerator oracle({2, 3}, 0.5);
    CHECK(curve.values[0] == 0.0);
    for (std::size_t n = 1; n <= 6; ++n) {
        oracle.step();
        CHECK(curve.values[n] == doctest::Approx(oracle.absorbed).epsilon(1e-13));
    }

    // the two fixed points worked out by hand: only double-loss paths absorb
    // by step 2 (initial stage-1 mass 1/2 times p^2), and a_3 doubles it
    CHECK(curve.values[2] == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(curve.values[3] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("mixture enumeration also covers an asymmetric three-stage chain") {
    const std::vector<int> timeouts{1, 3, 4};
    const double p = 0.35;
    const TransitionMatrix chain = build_multi_timeout_chain(timeouts, p);
    const AbsorptionCurve curve = absorption_curve_matrix(chain, 8);
    MixtureEnumerator oracle(timeouts, p);
    for (std::size_t n = 1; n <= 8; ++n) {
        oracle.step();
        CHECK(curve.values[n] == doctest::Approx(oracle.absorbed).epsilon(1e-13));
    }
}

TEST_CASE("split_probability small-N closed forms") {
    // N = 3: both followers must defect, P = a^2
    for (double a : {0.0, 0.1, 0.5, 0.9, 1.0})
        CHECK(raftsplit::split_probability(a, 3) == doctest::Approx(a * a).epsilon(1e-13));
    // N = 4: all three followers, P = a^3
    CHECK(raftsplit::split_probability(0.3, 4) ==
          doctest::Approx(0.3 * 0.3 * 0.3).epsilon(1e-13));
    // N = 5, a = 1/2: P(Bin(4, 1/2) >= 3) = 5/16
    CHECK(raftsplit::split_probability(0.5, 5) == doctest::Approx(0.3125).epsilon(1e-13));
    // N = 6: P(Bin(5, a) >= 4) = 5 a^4 (1-a) + a^5
    const double a = 0.4;
    CHECK(raftsplit::split_probability(a, 6) ==
          doctest::Approx(5.0 * std::pow(a, 4) * (1.0 - a) + std::pow(a, 5))
              .epsilon(1e-13));

    CHECK(raftsplit::split_probability(0.0, 9) == 0.0);
    CHECK(raftsplit::split_probability(1.0, 9) == 1.0);
    CHECK_THROWS_AS(raftsplit::split_probability(0.5, 2), std::invalid_argument);
    CHECK_THROWS_AS(raftsplit::split_probability(-0.1, 5), std::invalid_argument);
    CHECK_THROWS_AS(raftsplit::split_probability(1.1, 5), std::invalid_argument);
}

TEST_CASE("split_probability_poisson spot value and Le Cam closeness") {
    // N = 5, a = 1/2: lambda = 2, P = 1 - e^-2 (1 + 2 + 2)
    CHECK(raftsplit::split_probability_poisson(0.5, 5) ==
          doctest::Approx(1.0 - 5.0 * std::exp(-2.0)).epsilon(1e-13));
    CHECK(raftsplit::split_probability_poisson(0.0, 7) == 0.0);

    // total-variation distance of Bin(n, q) and Pois(nq) is at most n q^2,
    // so any tail event differs by at most that much
    for (int n_nodes : {5, 21}) {
        for (double a : {0.001, 0.005, 0.01, 0.05, 0.1}) {
            const double gap = std::fabs(raftsplit::split_probability(a, n_nodes) -
                                         raftsplit::split_probability_poisson(a, n_nodes));
            CHECK(gap <= static_cast<double>(n_nodes - 1) * a * a + 1e-15);
        }
    }
}

TEST_CASE("split_cdf mirrors the pointwise tail and keeps pdf consistent") {
    const AbsorptionCurve curve = absorption_curve_recurrence(3, 0.3, 500);
    const SplitDistribution dist = raftsplit::split_cdf(curve, 5);
    REQUIRE(dist.cdf.size() == curve.values.size());
    REQUIRE(dist.pdf.size() == curve.values.size());

    for (std::size_t n = 0; n < curve.values.size(); n += 17)
        CHECK(dist.cdf[n] ==
              doctest::Approx(raftsplit::split_probability(curve.values[n], 5))
                  .epsilon(1e-13));

    double prev = 0.0;
    double mass = 0.0;
    for (std::size_t n = 0; n < dist.cdf.size(); ++n) {
        CHECK(dist.cdf[n] >= prev);
        CHECK(dist.pdf[n] == doctest::Approx(dist.cdf[n] - prev).epsilon(1e-15));
        prev = dist.cdf[n];
        mass += dist.pdf[n];
    }
    CHECK(mass == doctest::Approx(dist.cdf.back()).epsilon(1e-9));
    CHECK(dist.truncated_tail_mass == doctest::Approx(1.0 - dist.cdf.back()).epsilon(1e-12));
}

TEST_CASE("split distribution is exact when every heartbeat is lost") {
    const AbsorptionCurve curve = absorption_curve_recurrence(4, 1.0, 20);
    const SplitMoments m = raftsplit::split_moments(curve, 5, 1e-9, 1000);
    CHECK(m.mean_steps == 4.0);
    CHECK(m.variance_steps == 0.0);
    CHECK(m.truncation_step == 4);
    CHECK_FALSE(m.capped);
}

TEST_CASE("split moments match independently frozen references") {
    // frozen before implementation via closed forms plus adaptive truncation
    // at tail < 1e-12, and cross-checked by Monte Carlo
    struct Reference {
        int k;
        double p;
        double mean;
        double variance;
        std::size_t curve_len;
    };
    const std::vector<Reference> refs{
        {3, 0.3, 55.58362184, 1028.985241, 3000},
        {4, 0.3, 189.25382682, 12504.179333, 8000},
        {3, 0.1, 1202.30034249, 519682.04, 40000},
        {4, 0.1, 12035.55083732, 52255307.0, 400000},
    };
    for (const Reference& ref : refs) {
        const AbsorptionCurve curve =
            absorption_curve_recurrence(ref.k, ref.p, ref.curve_len);
        const SplitMoments m = raftsplit::split_moments(curve, 5, 1e-12, ref.curve_len);
        CHECK_FALSE(m.capped);
        CHECK(m.mean_steps == doctest::Approx(ref.mean).epsilon(1e-7));
        CHECK(m.variance_steps == doctest::Approx(ref.variance).epsilon(1e-5));
    }
}

TEST_CASE("split_moments reports truncation instead of hiding it") {
    const AbsorptionCurve curve = absorption_curve_recurrence(3, 0.1, 400);
    // the K=3, p=0.1 split runs for thousands of steps; a 100-step cap must flag
    const SplitMoments capped = raftsplit::split_moments(curve, 5, 1e-9, 100);
    CHECK(capped.capped);
    CHECK(capped.truncation_step == 100);
    CHECK(capped.truncated_tail_mass > 1e-9);

    // a curve that simply ends too early is flagged the same way
    const SplitMoments short_curve = raftsplit::split_moments(curve, 5, 1e-9, 100000);
    CHECK(short_curve.capped);
    CHECK(short_curve.truncation_step == 400);
}

TEST_CASE("expected candidates and replies split N-1 between them") {
    const AbsorptionCurve curve = absorption_curve_recurrence(2, 0.4, 100);
    for (std::size_t n : {0, 2, 10, 100}) {
        const double c = raftsplit::expected_candidates(curve, 7, n);
        const double r = raftsplit::expected_replies(curve, 7, n);
        CHECK(c + r == doctest::Approx(6.0).epsilon(1e-12));
        CHECK(c >= 0.0);
        CHECK(r >= 0.0);
    }
    // K = 1, p = 0.5: half the followers are expected gone after one step
    const AbsorptionCurve fast = absorption_curve_recurrence(1, 0.5, 5);
    CHECK(raftsplit::expected_candidates(fast, 5, 1) == doctest::Approx(2.0));
    CHECK_THROWS_AS(raftsplit::expected_candidates(fast, 5, 6), std::out_of_range);
}

TEST_CASE("fundamental matrix: K = 1, p = 0.5 by hand") {
    const raftsplit::FundamentalMatrix fm =
        fundamental_matrix(build_single_timeout_chain(1, 0.5));
    // N = (I - Q)^-1 = [[2]]
    REQUIRE(fm.n_matrix.rows() == 1);
    CHECK(fm.n_matrix(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(fm.expected_heartbeats == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(fm.time_to_candidate_steps == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(fm.mean_receipt_interval_steps == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fundamental matrix matches the closed forms across a grid") {
    // expected reset visits p^-K, absorption time (1 - p^K) / ((1-p) p^K),
    // receipt interval (1 - p^K) / (1 - p)
    for (int k : {1, 2, 3, 4, 6}) {
        for (double p : {0.05, 0.3, 0.5, 0.9}) {
            const raftsplit::FundamentalMatrix fm =
                fundamental_matrix(build_single_timeout_chain(k, p));
            const double pk = std::pow(p, k);
            CHECK(fm.expected_heartbeats ==
                  doctest::Approx(1.0 / pk).epsilon(1e-9));
            CHECK(fm.time_to_candidate_steps ==
                  doctest::Approx((1.0 - pk) / ((1.0 - p) * pk)).epsilon(1e-9));
            CHECK(fm.mean_receipt_interval_steps ==
                  doctest::Approx((1.0 - pk) / (1.0 - p)).epsilon(1e-9));
            for (std::size_t i = 0; i < fm.n_matrix.rows(); ++i)
                for (std::size_t j = 0; j < fm.n_matrix.cols(); ++j)
                    CHECK(fm.n_matrix(i, j) >= -1e-12);
        }
    }
}

TEST_CASE("fundamental matrix when every heartbeat is lost") {
    const raftsplit::FundamentalMatrix fm =
        fundamental_matrix(build_single_timeout_chain(3, 1.0));
    CHECK(fm.expected_heartbeats == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fm.time_to_candidate_steps == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(fm.mean_receipt_interval_steps == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("receipt interval converges to 1/(1-p) for long timeouts") {
    const raftsplit::FundamentalMatrix fm =
        fundamental_matrix(build_single_timeout_chain(20, 0.5));
    CHECK(std::fabs(fm.mean_receipt_interval_steps - 2.0) < 1e-4);
}

TEST_CASE("fundamental matrix of a mixture cross-checked against the curve") {
    // expected absorption time also equals the sum of survival probabilities
    const TransitionMatrix chain = build_multi_timeout_chain({2, 3}, 0.4);
    const raftsplit::FundamentalMatrix fm = fundamental_matrix(chain);
    const AbsorptionCurve curve = absorption_curve_matrix(chain, 5000);
    CHECK(1.0 - curve.values.back() < 1e-9);
    double survival = 0.0;
    for (double a : curve.values) survival += 1.0 - a;
    CHECK(fm.time_to_candidate_steps == doctest::Approx(survival).epsilon(1e-6));
}

TEST_CASE("fundamental matrix refuses a chain that cannot absorb") {
    CHECK_THROWS_AS(fundamental_matrix(build_single_timeout_chain(3, 0.0)),
                    std::domain_error);
}

TEST_CASE("evaluate_model ties the pieces together consistently") {
    const ModelParams params = params_for(5, 0.3, {3});
    const raftsplit::ModelEvaluation ev = evaluate_model(params, 1e-9, 1000000);

    // the curve stops exactly when the split tail clears epsilon
    CHECK_FALSE(ev.binomial.capped);
    CHECK(ev.binomial.truncated_tail_mass < 1e-9);
    CHECK(ev.binomial.truncation_step == ev.curve.last_step());
    REQUIRE(ev.binomial.cdf.size() == ev.curve.values.size());
    REQUIRE(ev.poisson.cdf.size() == ev.curve.values.size());

    // summary moments equal a direct split_moments call on the same curve
    const SplitMoments m = raftsplit::split_moments(ev.curve, 5, 1e-9, 1000000);
    CHECK(ev.binomial.mean_steps == m.mean_steps);
    CHECK(ev.binomial.variance_steps == m.variance_steps);

    // and the fundamental matrix matches the standalone builder
    const raftsplit::FundamentalMatrix fm =
        fundamental_matrix(build_single_timeout_chain(3, 0.3));
    CHECK(ev.fm.expected_heartbeats == doctest::Approx(fm.expected_heartbeats));

    CHECK_THROWS_AS(evaluate_model(params_for(5, 0.0, {3}), 1e-9, 1000),
                    std::domain_error);
    CHECK_THROWS_AS(evaluate_model(params, 0.0, 1000), std::invalid_argument);
    CHECK_THROWS_AS(evaluate_model(params, 1e-9, 0), std::invalid_argument);
}

TEST_CASE("evaluate_model honors the step cap and flags it") {
    const ModelParams params = params_for(5, 0.1, {3});
    const raftsplit::ModelEvaluation ev = evaluate_model(params, 1e-9, 200);
    CHECK(ev.binomial.capped);
    CHECK(ev.curve.last_step() == 200);
    CHECK(ev.binomial.truncated_tail_mass >= 1e-9);
}

TEST_CASE("evaluate_model handles a timeout mixture end to end") {
    const ModelParams params = params_for(5, 0.4, {2, 3});
    const raftsplit::ModelEvaluation ev = evaluate_model(params, 1e-9, 100000);
    CHECK_FALSE(ev.binomial.capped);
    CHECK(ev.chain.absorbing_count == 2);
    // mixture curve equals the standalone matrix curve over the same range
    const AbsorptionCurve direct =
        absorption_curve_matrix(ev.chain, ev.curve.last_step());
    for (std::size_t n = 0; n < direct.values.size(); ++n)
        CHECK(ev.curve.values[n] == doctest::Approx(direct.values[n]).epsilon(1e-12));
}
