#pragma once

// Exponentially weighted aggregation of rule predictions with sleeping
// experts: rules that do not activate on an observation abstain.

#include "rulescreen/error.hpp"
#include "rulescreen/rulegen.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace rulescreen {

enum class LossKind { squared, absolute };

inline std::string to_string(LossKind k) { return k == LossKind::squared ? "squared" : "absolute"; }

inline LossKind parse_loss_kind(std::string_view s) {
    if (s == "squared")
        return LossKind::squared;
    if (s == "absolute")
        return LossKind::absolute;
    throw Error(Errc::InvalidConfig, "unknown loss '" + std::string(s) + "'");
}

/// Convex loss clipped at `cap` before exponentiation.
inline double clipped_loss(LossKind kind, double prediction, double outcome, double cap) {
    const double diff = prediction - outcome;
    const double l = kind == LossKind::squared ? diff * diff : std::abs(diff);
    if (!std::isfinite(l))
        throw Error(Errc::NonFiniteLoss, "loss of prediction " + std::to_string(prediction) + " against outcome " +
                                             std::to_string(outcome));
    return std::min(l, cap);
}

struct AggregationState {
    std::vector<double> weights; ///< one per rule, non-negative, summing to 1
    double eta = 0.1;
    LossKind loss = LossKind::squared;
    double loss_cap = 1.0;
    double epsilon = 0.0; ///< score dead zone
    std::size_t step = 0;

    static AggregationState uniform(std::size_t rules, double eta, LossKind loss = LossKind::squared,
                                    double loss_cap = 1.0, double epsilon = 0.0) {
        if (rules == 0)
            throw Error(Errc::InvalidArgument, "aggregation over an empty rule set");
        if (!(eta >= 0.0) || !std::isfinite(eta))
            throw Error(Errc::InvalidConfig, "eta must be finite and non-negative");
        AggregationState s;
        s.weights.assign(rules, 1.0 / double(rules));
        s.eta = eta;
        s.loss = loss;
        s.loss_cap = loss_cap;
        s.epsilon = epsilon;
        return s;
    }

    bool operator==(const AggregationState&) const = default;
};

/// Learning rate minimizing the exponential-weights regret bound over
/// `horizon` updates: sqrt(8 ln R / T).
inline double default_eta(std::size_t rules, std::size_t horizon) {
    const double r = double(std::max<std::size_t>(rules, 2));
    return std::sqrt(8.0 * std::log(r) / double(std::max<std::size_t>(horizon, 1)));
}

/// Weighted mean of the active rules' predictions.
inline double predict(const AggregationState& state, const RuleSet& rules, std::span<const std::size_t> active) {
    if (active.empty())
        throw Error(Errc::NoActiveRule, "no rule activates this observation");
    double num = 0.0, den = 0.0;
    for (std::size_t i : active) {
        num += state.weights[i] * rules.rules[i].prediction;
        den += state.weights[i];
    }
    if (den > 0.0)
        return num / den;
    // every active weight underflowed: fall back to the plain mean
    double sum = 0.0;
    for (std::size_t i : active)
        sum += rules.rules[i].prediction;
    return sum / double(active.size());
}

inline double predict(const AggregationState& state, const RuleSet& rules, std::span<const std::int32_t> x) {
    const auto active = rules.active(x);
    return predict(state, rules, active);
}

/// One update on a realized outcome. Active rules are reweighted by
/// exp(-eta * loss); sleeping rules are charged the mixture loss
/// -ln(sum_active w exp(-eta * loss) / sum_active w) / eta, which leaves
/// their weights, and the total mass of the active rules, unchanged.
inline void update_in_place(AggregationState& state, const RuleSet& rules, std::span<const std::size_t> active,
                            double outcome) {
    if (active.empty())
        throw Error(Errc::NoActiveRule, "no rule activates this observation");
    if (!std::isfinite(outcome))
        throw Error(Errc::NonFiniteLoss, "non-finite outcome");
    std::vector<double> factor(active.size());
    double mass = 0.0, reweighted = 0.0;
    for (std::size_t a = 0; a < active.size(); ++a) {
        const std::size_t i = active[a];
        const double l = clipped_loss(state.loss, rules.rules[i].prediction, outcome, state.loss_cap);
        factor[a] = std::exp(-state.eta * l);
        mass += state.weights[i];
        reweighted += state.weights[i] * factor[a];
    }
    if (mass > 0.0 && reweighted > 0.0) {
        const double scale = mass / reweighted;
        for (std::size_t a = 0; a < active.size(); ++a)
            state.weights[active[a]] *= factor[a] * scale;
        double total = 0.0;
        for (double w : state.weights)
            total += w;
        if (total != 1.0)
            for (double& w : state.weights)
                w /= total;
    }
    ++state.step;
}

inline AggregationState update(AggregationState state, const RuleSet& rules, std::span<const std::int32_t> x,
                               double outcome) {
    const auto active = rules.active(x);
    update_in_place(state, rules, active, outcome);
    return state;
}

/// Ternary score with a closed dead zone [-epsilon, epsilon].
inline int score(double y_hat, double epsilon) {
    if (y_hat > epsilon)
        return 1;
    if (y_hat < -epsilon)
        return -1;
    return 0;
}

/// Sample standard deviation, 0 for fewer than two values.
inline double dispersion(std::span<const double> values) {
    if (values.size() < 2)
        return 0.0;
    double mean = 0.0;
    for (double v : values)
        mean += v;
    mean /= double(values.size());
    double ss = 0.0;
    for (double v : values)
        ss += (v - mean) * (v - mean);
    return std::sqrt(ss / double(values.size() - 1));
}

} // namespace rulescreen
