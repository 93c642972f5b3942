#include "support/errc.hpp"
#include "support/oracle.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace rulescreen;

namespace {

// rules on one feature with m = 4; rule i is active on codes [lo_i, hi_i]
RuleSet rules_on_codes(const std::vector<std::pair<int, int>>& ranges, const std::vector<double>& predictions) {
    RuleSet set;
    for (std::size_t i = 0; i < ranges.size(); ++i) {
        Rule r;
        r.condition = Condition({{0, ranges[i].first, ranges[i].second}});
        r.prediction = predictions[i];
        set.rules.push_back(r);
    }
    return set;
}

std::vector<std::size_t> all(std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = i;
    return v;
}

} // namespace

TEST(Predict, SingleActiveRuleReturnsItsPrediction) {
    const auto rules = rules_on_codes({{0, 0}, {1, 3}}, {0.07, -0.01});
    auto s = AggregationState::uniform(2, 0.5);
    s.weights = {0.9, 0.1};
    EXPECT_DOUBLE_EQ(predict(s, rules, std::vector<std::int32_t>{0}), 0.07);
}

TEST(Predict, WeightedMeanHandCases) {
    const auto rules = rules_on_codes({{0, 3}, {0, 3}}, {0.04, 0.0});
    auto s = AggregationState::uniform(2, 0.5);
    s.weights = {0.75, 0.25};
    EXPECT_DOUBLE_EQ(predict(s, rules, std::vector<std::int32_t>{2}), 0.03);
    const auto sym = rules_on_codes({{0, 3}, {0, 3}}, {0.02, -0.02});
    EXPECT_EQ(predict(AggregationState::uniform(2, 0.5), sym, std::vector<std::int32_t>{1}), 0.0);
}

TEST(Predict, NoActiveRuleIsAnError) {
    const auto rules = rules_on_codes({{0, 0}}, {0.01});
    EXPECT_ERRC(predict(AggregationState::uniform(1, 0.1), rules, std::vector<std::int32_t>{2}), Errc::NoActiveRule);
}

TEST(Predict, StaysInsideTheActivePredictionRange) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<double> p(6);
        for (auto& v : p)
            v = u(rng);
        const auto rules = rules_on_codes({{0, 1}, {1, 2}, {2, 3}, {0, 3}, {3, 3}, {0, 0}}, p);
        auto s = AggregationState::uniform(6, 1.0);
        for (auto& w : s.weights)
            w = std::abs(u(rng));
        const std::int32_t x = rep % 4;
        const auto active = rules.active(std::vector<std::int32_t>{x});
        double lo = 1, hi = -1;
        for (auto i : active) {
            lo = std::min(lo, p[i]);
            hi = std::max(hi, p[i]);
        }
        const double y = predict(s, rules, active);
        EXPECT_GE(y, lo);
        EXPECT_LE(y, hi);
    }
}

TEST(Update, ZeroEtaLeavesWeightsUnchanged) {
    const auto rules = rules_on_codes({{0, 3}, {0, 1}, {2, 3}}, {0.1, -0.2, 0.3});
    auto s = AggregationState::uniform(3, 0.0);
    s.weights = {0.5, 0.3, 0.2};
    const auto before = s.weights;
    for (int t = 0; t < 50; ++t)
        s = update(s, rules, std::vector<std::int32_t>{t % 4}, 0.05 * t);
    EXPECT_EQ(s.weights, before);
    EXPECT_EQ(s.step, 50u);
}

TEST(Update, EqualLossesLeaveWeightsUnchanged) {
    const auto rules = rules_on_codes({{0, 3}, {0, 3}, {0, 0}}, {0.1, -0.1, 0.5});
    auto s = AggregationState::uniform(3, 2.0);
    s.weights = {0.5, 0.3, 0.2};
    // rules 0 and 1 are equally wrong when y = 0; rule 2 sleeps on code 3
    s = update(s, rules, std::vector<std::int32_t>{3}, 0.0);
    EXPECT_NEAR(s.weights[0], 0.5, 1e-15);
    EXPECT_NEAR(s.weights[1], 0.3, 1e-15);
    EXPECT_NEAR(s.weights[2], 0.2, 1e-15);
}

TEST(Update, PerfectRuleWeightRisesMonotonicallyToOne) {
    const auto rules = rules_on_codes({{0, 3}, {0, 3}}, {0.5, 0.0});
    const double eta = 4.0;
    auto s = AggregationState::uniform(2, eta);
    // losses 0 and 0.25 every step: w0_t = 1 / (1 + exp(-eta * 0.25 * t))
    double prev = s.weights[0];
    for (int t = 1; t <= 60; ++t) {
        s = update(s, rules, std::vector<std::int32_t>{0}, 0.5);
        if (t <= 30) // saturates at 1 in double precision afterwards
            EXPECT_GT(s.weights[0], prev);
        else
            EXPECT_GE(s.weights[0], prev);
        prev = s.weights[0];
        const double expect = 1.0 / (1.0 + std::exp(-eta * 0.25 * t));
        EXPECT_NEAR(s.weights[0], expect, 1e-12);
    }
    EXPECT_GT(s.weights[0], 1.0 - 1e-9);
}

TEST(Update, SleepingRulesKeepTheirRelativeWeight) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> code(0, 2); // code 3 never occurs
    std::normal_distribution<double> g(0, 0.2);
    const auto rules = rules_on_codes({{0, 1}, {1, 2}, {0, 2}, {3, 3}}, {0.1, -0.1, 0.0, 0.4});
    auto s = AggregationState::uniform(4, 3.0);
    for (int t = 0; t < 2000; ++t) {
        s = update(s, rules, std::vector<std::int32_t>{code(rng)}, g(rng));
        double total = 0.0;
        for (double w : s.weights) {
            EXPECT_GE(w, 0.0);
            total += w;
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
    EXPECT_NEAR(s.weights[3], 0.25, 1e-12);
}

TEST(Update, MatchesHandWrittenSpecialistRecursion) {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> code(0, 3);
    std::normal_distribution<double> g(0, 0.3);
    const std::vector<double> p{0.2, -0.1, 0.05, 0.3};
    const std::vector<std::pair<int, int>> ranges{{0, 1}, {1, 3}, {0, 3}, {3, 3}};
    const auto rules = rules_on_codes(ranges, p);
    const double eta = 1.5;
    auto s = AggregationState::uniform(4, eta);
    std::vector<double> w(4, 0.25);
    for (int t = 0; t < 300; ++t) {
        const int x = code(rng);
        const double y = g(rng);
        s = update(s, rules, std::vector<std::int32_t>{x}, y);
        // active rules: w * exp(-eta l), then rescaled so the active mass is unchanged
        auto on = [&](int i) { return ranges[i].first <= x && x <= ranges[i].second; };
        double mass = 0, re = 0;
        std::vector<double> f(4, 1.0);
        for (int i = 0; i < 4; ++i)
            if (on(i)) {
                f[i] = std::exp(-eta * std::min((p[i] - y) * (p[i] - y), 1.0));
                mass += w[i];
                re += w[i] * f[i];
            }
        for (int i = 0; i < 4; ++i)
            if (on(i))
                w[i] *= f[i] * mass / re;
        for (int i = 0; i < 4; ++i)
            EXPECT_NEAR(s.weights[i], w[i], 1e-12);
    }
}

TEST(Update, LossIsClippedBeforeExponentiation) {
    EXPECT_EQ(clipped_loss(LossKind::squared, 5.0, 0.0, 1.0), 1.0);
    EXPECT_EQ(clipped_loss(LossKind::absolute, 0.25, 0.0, 1.0), 0.25);
    EXPECT_ERRC(clipped_loss(LossKind::squared, std::nan(""), 0.0, 1.0), Errc::NonFiniteLoss);
}

TEST(Update, DefaultEta) {
    EXPECT_DOUBLE_EQ(default_eta(20, 500), std::sqrt(8.0 * std::log(20.0) / 500.0));
    EXPECT_DOUBLE_EQ(default_eta(1, 100), default_eta(2, 100)); // a single rule still gets a finite rate
}

TEST(Score, DeadZoneIsClosed) {
    EXPECT_EQ(score(0.0, 0.01), 0);
    EXPECT_EQ(score(0.01, 0.01), 0);
    EXPECT_EQ(score(-0.01, 0.01), 0);
    EXPECT_EQ(score(0.02, 0.01), 1);
    EXPECT_EQ(score(-0.02, 0.01), -1);
    EXPECT_EQ(score(0.0, 0.0), 0);
}

TEST(Score, OddSymmetry) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0, 0.05);
    for (int i = 0; i < 1000; ++i) {
        const double y = g(rng), eps = std::abs(g(rng));
        EXPECT_EQ(score(-y, eps), -score(y, eps));
    }
}

TEST(Dispersion, SampleStandardDeviation) {
    EXPECT_EQ(dispersion(std::vector<double>{}), 0.0);
    EXPECT_EQ(dispersion(std::vector<double>{3.0}), 0.0);
    EXPECT_DOUBLE_EQ(dispersion(std::vector<double>{1, 2, 3, 4}), std::sqrt(5.0 / 3.0));
}

TEST(Regret, HoeffdingBoundOnRandomStreams) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t R = 20, T = 500;
    const double eta = default_eta(R, T);
    for (int stream = 0; stream < 10; ++stream) {
        RuleSet rules;
        rules.rules.resize(R);
        auto s = AggregationState::uniform(R, eta);
        std::vector<double> cum(R, 0.0);
        double agg = 0.0;
        const auto active = all(R);
        for (std::size_t t = 0; t < T; ++t) {
            for (auto& r : rules.rules)
                r.prediction = u(rng);
            const double y = u(rng);
            const double yhat = predict(s, rules, active);
            agg += (yhat - y) * (yhat - y);
            for (std::size_t i = 0; i < R; ++i)
                cum[i] += (rules.rules[i].prediction - y) * (rules.rules[i].prediction - y);
            update_in_place(s, rules, active, y);
        }
        const double best = *std::min_element(cum.begin(), cum.end());
        EXPECT_LE(agg, best + std::log(double(R)) / eta + double(T) * eta / 8.0);
    }
}
