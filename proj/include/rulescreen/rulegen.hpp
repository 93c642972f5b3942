#pragma once

// Rule search: exhaustive complexity-1 enumeration, recursive higher
// complexities by pairwise suitable intersection, and covering selection.

#include "rulescreen/date.hpp"
#include "rulescreen/detail/parallel.hpp"
#include "rulescreen/rules.hpp"

#include <algorithm>
#include <cstddef>
#include <optional>
#include <vector>

namespace rulescreen {

/// Rules selected at one learning date. Every labelled learning row
/// activates at least one rule.
struct RuleSet {
    std::vector<Rule> rules;
    Date learned_at;
    double global_mean = 0.0; ///< mu(X, D_n) at learning time

    std::size_t size() const { return rules.size(); }
    bool empty() const { return rules.empty(); }

    bool has_default() const {
        return std::any_of(rules.begin(), rules.end(), [](const Rule& r) { return r.is_default; });
    }

    /// Indices of rules whose condition contains x.
    std::vector<std::size_t> active(std::span<const std::int32_t> x) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < rules.size(); ++i)
            if (activates(rules[i].condition, x))
                out.push_back(i);
        return out;
    }

    bool operator==(const RuleSet&) const = default;
};

struct LevelResult {
    std::vector<Rule> rules; ///< suitable rules, sorted by criterion
    std::size_t candidates = 0;
};

struct LevelStats {
    int complexity = 0;
    std::size_t candidates = 0;
    std::size_t suitable = 0;
    std::size_t positive = 0;
    std::size_t negative = 0;
};

struct DesignResult {
    std::vector<Rule> rules; ///< all suitable rules, level by level
    std::vector<LevelStats> levels;
};

namespace detail {

inline LevelStats level_stats(int complexity, const LevelResult& level) {
    LevelStats s;
    s.complexity = complexity;
    s.candidates = level.candidates;
    s.suitable = level.rules.size();
    for (const auto& r : level.rules) {
        if (r.sign > 0)
            ++s.positive;
        else if (r.sign < 0)
            ++s.negative;
    }
    return s;
}

inline void sort_by_criterion(std::vector<Rule>& rules, double global_mean) {
    std::sort(rules.begin(), rules.end(), CriterionOrder{global_mean});
}

} // namespace detail

/// Evaluates every single-feature condition [a, b], a <= b, and keeps the
/// suitable ones.
inline LevelResult enumerate_complexity1(const LearningIndex& idx, const SearchParams& params,
                                         std::size_t workers = 1) {
    if (idx.size() == 0)
        throw Error(Errc::EmptyLearningSet, "no labelled rows in the learning set");
    std::vector<Interval> candidates;
    for (std::size_t k = 0; k < idx.dims(); ++k) {
        const std::int32_t card = idx.cardinalities()[k];
        for (std::int32_t a = 0; a < card; ++a)
            for (std::int32_t b = a; b < card; ++b)
                candidates.push_back({k, a, b});
    }
    std::vector<std::optional<Rule>> slots(candidates.size());
    detail::parallel_for(candidates.size(), workers, [&](std::size_t i) {
        const Condition cond({candidates[i]});
        const RowBitset rows = idx.interval_rows(candidates[i]);
        if (!rows.any())
            return;
        Rule r = make_rule(cond, rows, idx);
        if (is_suitable(r, rows, idx, params))
            slots[i] = std::move(r);
    });
    LevelResult out;
    out.candidates = candidates.size();
    for (auto& s : slots)
        if (s)
            out.rules.push_back(std::move(*s));
    detail::sort_by_criterion(out.rules, idx.global_mean());
    return out;
}

/// Combines the top `branching` rules of complexity 1 with the top
/// `branching` rules of complexity c-1 and keeps suitable intersections of
/// complexity exactly c. Both inputs must be sorted by criterion.
inline LevelResult generate_complexity_c(const std::vector<Rule>& level1, const std::vector<Rule>& previous, int c,
                                         const SearchParams& params, const LearningIndex& idx,
                                         std::size_t workers = 1) {
    if (c < 2)
        throw Error(Errc::InvalidArgument, "generate_complexity_c needs c >= 2");
    const std::size_t m1 = std::min(params.branching, level1.size());
    const std::size_t m2 = std::min(params.branching, previous.size());
    std::vector<RowBitset> rows1(m1), rows2(m2);
    for (std::size_t i = 0; i < m1; ++i)
        rows1[i] = idx.activation(level1[i].condition);
    for (std::size_t j = 0; j < m2; ++j)
        rows2[j] = idx.activation(previous[j].condition);

    std::vector<std::optional<Rule>> slots(m1 * m2);
    detail::parallel_for(m1 * m2, workers, [&](std::size_t p) {
        const std::size_t i = p / m2, j = p % m2;
        auto res = intersect(level1[i], previous[j], rows1[i], rows2[j], idx);
        if (!res)
            return;
        if (res.condition->complexity(idx.cardinalities()) != c)
            return;
        RowBitset rows = rows1[i];
        rows &= rows2[j];
        Rule r = make_rule(*res.condition, rows, idx);
        if (is_suitable(r, rows, idx, params))
            slots[p] = std::move(r);
    });

    LevelResult out;
    out.candidates = m1 * m2;
    for (auto& s : slots)
        if (s)
            out.rules.push_back(std::move(*s));
    // the same rectangle can come from several parent pairs
    std::sort(out.rules.begin(), out.rules.end(),
              [](const Rule& a, const Rule& b) { return a.condition < b.condition; });
    out.rules.erase(std::unique(out.rules.begin(), out.rules.end(),
                                [](const Rule& a, const Rule& b) { return a.condition == b.condition; }),
                    out.rules.end());
    detail::sort_by_criterion(out.rules, idx.global_mean());
    return out;
}

/// All suitable rules up to max_complexity; stops at the first empty level.
inline DesignResult design_rules(const LearningIndex& idx, const SearchParams& params, std::size_t workers = 1) {
    params.validate();
    DesignResult out;
    LevelResult level1 = enumerate_complexity1(idx, params, workers);
    out.levels.push_back(detail::level_stats(1, level1));
    out.rules = level1.rules;
    if (level1.rules.empty())
        return out;
    std::vector<Rule> previous = level1.rules;
    for (int c = 2; c <= params.max_complexity; ++c) {
        LevelResult level = generate_complexity_c(level1.rules, previous, c, params, idx, workers);
        out.levels.push_back(detail::level_stats(c, level));
        if (level.rules.empty())
            break;
        out.rules.insert(out.rules.end(), level.rules.begin(), level.rules.end());
        previous = std::move(level.rules);
    }
    return out;
}

inline Rule default_rule(const LearningIndex& idx) {
    Rule r;
    r.prediction = idx.global_mean();
    r.activations = idx.size();
    r.complexity = 0;
    r.sign = 0;
    r.is_default = true;
    return r;
}

/// Greedy cover of the learning rows: walks the candidates in criterion
/// order and keeps each rule that activates at least one still-uncovered
/// row. A full-space default rule is appended when rows remain uncovered.
inline RuleSet select_covering(std::vector<Rule> candidates, const LearningIndex& idx, Date learned_at = {}) {
    RuleSet set;
    set.learned_at = learned_at;
    set.global_mean = idx.global_mean();
    detail::sort_by_criterion(candidates, idx.global_mean());
    RowBitset covered(idx.size());
    std::size_t n_covered = 0;
    for (auto& rule : candidates) {
        if (n_covered == idx.size())
            break;
        const RowBitset rows = idx.activation(rule.condition);
        const std::size_t gain = rows.count_and_not(covered);
        if (gain == 0)
            continue;
        covered |= rows;
        n_covered += gain;
        set.rules.push_back(std::move(rule));
    }
    if (n_covered < idx.size() || set.rules.empty())
        set.rules.push_back(default_rule(idx));
    return set;
}

} // namespace rulescreen
