#pragma once

// One learning pass: discretize, design and select rules on the learning
// set, then fit aggregation weights and the score dead zone on the
// aggregation set.

#include "rulescreen/aggregate.hpp"
#include "rulescreen/panel.hpp"
#include "rulescreen/rulegen.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace rulescreen {

struct ModelConfig {
    SearchParams search;
    double learn_fraction = 0.5;   ///< share of the training rows (oldest first) used to design rules
    std::optional<double> eta;     ///< empty: sqrt(8 ln R / T) with T the aggregation-set size
    LossKind loss = LossKind::squared;
    double loss_cap = 1.0;
    std::optional<double> epsilon; ///< empty: standard deviation of predictions on the aggregation set
    std::size_t workers = 1;
};

struct Model {
    Discretizer discretizer;
    RuleSet rules;
    AggregationState state;
    std::vector<LevelStats> levels;
    std::size_t learn_rows = 0;
    std::size_t aggregate_rows = 0;
    bool aggregation_not_larger = false;

    /// Aggregated prediction, or nullopt when no rule activates x.
    std::optional<double> predict(std::span<const std::int32_t> x) const {
        const auto active = rules.active(x);
        if (active.empty())
            return std::nullopt;
        return rulescreen::predict(state, rules, active);
    }

    std::optional<double> predict_raw(std::span<const RawValue> features) const {
        const auto x = discretizer.encode(features);
        return predict(x);
    }

    /// Applies one realized outcome; observations no rule covers are skipped.
    void observe(std::span<const std::int32_t> x, double outcome) {
        const auto active = rules.active(x);
        if (!active.empty())
            update_in_place(state, rules, active, outcome);
    }

    void observe_raw(std::span<const RawValue> features, double outcome) {
        const auto x = discretizer.encode(features);
        observe(x, outcome);
    }
};

/// Learns a model from labelled observations (any order; rows without a
/// label are ignored).
inline Model learn_model(std::span<const RawObservation> observations, const std::vector<FeatureSpec>& specs,
                         const ModelConfig& cfg, Date learned_at) {
    cfg.search.validate();
    if (!(cfg.learn_fraction > 0.0 && cfg.learn_fraction < 1.0))
        throw Error(Errc::InvalidConfig, "learn_fraction must lie in (0, 1)");
    std::vector<RawObservation> labelled;
    for (const auto& o : observations)
        if (o.y)
            labelled.push_back(o);
    if (labelled.size() < 2)
        throw Error(Errc::InsufficientHistory, "need at least two labelled observations to learn");
    const auto order = chronological_order(labelled);
    std::vector<RawObservation> sorted;
    sorted.reserve(labelled.size());
    for (std::size_t i : order)
        sorted.push_back(std::move(labelled[i]));

    const std::size_t n_total = sorted.size();
    std::size_t n = std::size_t(std::floor(cfg.learn_fraction * double(n_total)));
    n = std::clamp<std::size_t>(n, 1, n_total - 1);

    Model model;
    model.discretizer = fit_discretizer(std::span(sorted).first(n), specs, cfg.search.modalities, cfg.workers);
    const DiscretizedPanel panel = apply_discretizer(sorted, model.discretizer);
    const TrainSplit parts = split(panel, n);
    model.learn_rows = parts.learn.size();
    model.aggregate_rows = parts.aggregate.size();
    model.aggregation_not_larger = parts.aggregation_not_larger;

    const LearningIndex idx(parts.learn);
    DesignResult design = design_rules(idx, cfg.search, cfg.workers);
    model.levels = design.levels;
    model.rules = select_covering(std::move(design.rules), idx, learned_at);

    const double eta = cfg.eta ? *cfg.eta : default_eta(model.rules.size(), parts.aggregate.size());
    model.state = AggregationState::uniform(model.rules.size(), eta, cfg.loss, cfg.loss_cap);
    for (std::size_t i = 0; i < parts.aggregate.size(); ++i)
        model.observe(parts.aggregate.codes(i), parts.aggregate.y(i));

    if (cfg.epsilon) {
        model.state.epsilon = *cfg.epsilon;
    } else {
        std::vector<double> fitted;
        fitted.reserve(parts.aggregate.size());
        for (std::size_t i = 0; i < parts.aggregate.size(); ++i)
            if (auto p = model.predict(parts.aggregate.codes(i)))
                fitted.push_back(*p);
        model.state.epsilon = dispersion(fitted);
    }
    return model;
}

} // namespace rulescreen
