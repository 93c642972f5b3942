#pragma once

// Rule algebra over a discretized panel: hyper-rectangle conditions,
// activation, conditional means, coverage, significance and suitable
// intersections.

#include "rulescreen/bitset.hpp"
#include "rulescreen/error.hpp"
#include "rulescreen/panel.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace rulescreen {

/// Inverse of the standard normal CDF. Acklam's rational approximation
/// followed by one Halley step; relative error below 1e-15 on (0, 1).
inline double normal_quantile(double p) {
    if (p <= 0.0)
        return -std::numeric_limits<double>::infinity();
    if (p >= 1.0)
        return std::numeric_limits<double>::infinity();
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p <= 1 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    } else {
        const double q = std::sqrt(-2 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2 * M_PI) * std::exp(x * x / 2);
    return x - u / (1 + x * u / 2);
}

struct Interval {
    std::size_t feature = 0;
    std::int32_t lo = 0;
    std::int32_t hi = 0;

    bool contains(std::int32_t code) const { return code != kMissingCode && lo <= code && code <= hi; }
    auto operator<=>(const Interval&) const = default;
};

/// Hyper-rectangle: a sparse list of intervals sorted by feature. Features
/// without an interval are unconstrained.
class Condition {
public:
    Condition() = default;
    explicit Condition(std::vector<Interval> intervals) : intervals_(std::move(intervals)) {
        std::sort(intervals_.begin(), intervals_.end());
        for (std::size_t i = 0; i < intervals_.size(); ++i) {
            if (intervals_[i].lo > intervals_[i].hi)
                throw Error(Errc::InvalidArgument, "interval with lo > hi");
            if (i && intervals_[i].feature == intervals_[i - 1].feature)
                throw Error(Errc::InvalidArgument, "two intervals on feature " +
                                                       std::to_string(intervals_[i].feature));
        }
    }

    static Condition full() { return Condition(); }

    const std::vector<Interval>& intervals() const { return intervals_; }
    bool is_full_space() const { return intervals_.empty(); }

    const Interval* find(std::size_t feature) const {
        for (const auto& iv : intervals_)
            if (iv.feature == feature)
                return &iv;
        return nullptr;
    }

    /// Number of stored intervals strictly narrower than the feature's code set.
    int complexity(std::span<const std::int32_t> cardinalities) const {
        int cp = 0;
        for (const auto& iv : intervals_)
            if (iv.lo > 0 || iv.hi < cardinalities[iv.feature] - 1)
                ++cp;
        return cp;
    }

    auto operator<=>(const Condition&) const = default;

private:
    std::vector<Interval> intervals_;
};

inline bool activates(const Condition& cond, std::span<const std::int32_t> x) {
    for (const auto& iv : cond.intervals()) {
        if (iv.feature >= x.size())
            throw Error(Errc::DimensionMismatch, "condition uses feature " + std::to_string(iv.feature) +
                                                     " but x has " + std::to_string(x.size()) + " entries");
        if (!iv.contains(x[iv.feature]))
            return false;
    }
    return true;
}

struct Rule {
    Condition condition;
    double prediction = 0.0;      ///< conditional mean on the learning set
    std::size_t activations = 0;  ///< activation count on the learning set
    int complexity = 0;
    int sign = 0;                 ///< sign of prediction minus the learning-set mean, fixed at construction
    bool is_default = false;      ///< full-space rule appended to complete a covering

    bool operator==(const Rule&) const = default;
};

enum class ZKind {
    gaussian,         ///< q(1 - alpha/2) * sd(y on learning set) / sqrt(n(r))
    gaussian_in_rule, ///< same with the in-rule standard deviation
};

inline std::string to_string(ZKind z) { return z == ZKind::gaussian ? "gaussian" : "gaussian_in_rule"; }

inline ZKind parse_z_kind(std::string_view s) {
    if (s == "gaussian")
        return ZKind::gaussian;
    if (s == "gaussian_in_rule")
        return ZKind::gaussian_in_rule;
    throw Error(Errc::InvalidConfig, "unknown z_kind '" + std::string(s) + "'");
}

struct SearchParams {
    int modalities = 5;
    double alpha = 0.05;
    double coverage_min = 0.02;
    double coverage_max = 0.5;
    int max_complexity = 2;
    std::size_t branching = 20; ///< M: rules of each parent level combined at higher complexities
    ZKind z_kind = ZKind::gaussian;

    void validate() const {
        if (modalities < 2)
            throw Error(Errc::NonPositiveModalities, "modalities must be >= 2");
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw Error(Errc::InvalidConfig, "alpha must lie in [0, 1]");
        if (!(coverage_min >= 0.0 && coverage_min < coverage_max && coverage_max <= 1.0))
            throw Error(Errc::InvalidConfig, "coverage bounds must satisfy 0 <= coverage_min < coverage_max <= 1");
        if (max_complexity < 1)
            throw Error(Errc::InvalidConfig, "max_complexity must be >= 1");
        if (branching < 1)
            throw Error(Errc::InvalidConfig, "branching must be >= 1");
    }
};

/// Bitset index over the labelled rows of a learning set. Rows without a
/// label are dropped: they never enter training sums or counts.
class LearningIndex {
public:
    explicit LearningIndex(const PanelView& view) : cards_(view.panel->cardinalities()), d_(view.dims()) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < view.size(); ++i)
            if (view.has_y(i))
                rows.push_back(i);
        n_ = rows.size();
        y_.reserve(n_);
        codes_.reserve(n_ * d_);
        for (std::size_t r : rows) {
            y_.push_back(view.y(r));
            const auto x = view.codes(r);
            codes_.insert(codes_.end(), x.begin(), x.end());
        }
        le_.resize(d_);
        for (std::size_t k = 0; k < d_; ++k) {
            const std::int32_t card = cards_[k];
            std::vector<RowBitset> eq(std::size_t(card), RowBitset{n_});
            for (std::size_t i = 0; i < n_; ++i) {
                const std::int32_t c = codes_[i * d_ + k];
                if (c == kMissingCode)
                    continue;
                if (c < 0 || c >= card)
                    throw Error(Errc::SpecMismatch, "code " + std::to_string(c) + " outside feature " +
                                                        std::to_string(k) + "'s code set");
                eq[std::size_t(c)].set(i);
            }
            le_[k].reserve(std::size_t(card));
            for (std::int32_t b = 0; b < card; ++b) {
                if (b == 0)
                    le_[k].push_back(eq[0]);
                else {
                    le_[k].push_back(le_[k].back());
                    le_[k].back() |= eq[std::size_t(b)];
                }
            }
        }
        full_ = RowBitset(n_, true);
        if (n_ > 0) {
            global_mean_ = mean(full_);
            double ss = 0.0;
            for (double v : y_)
                ss += (v - global_mean_) * (v - global_mean_);
            sd_ = n_ > 1 ? std::sqrt(ss / double(n_ - 1)) : 0.0;
        }
    }

    std::size_t size() const { return n_; }
    std::size_t dims() const { return d_; }
    const std::vector<std::int32_t>& cardinalities() const { return cards_; }
    double y(std::size_t i) const { return y_[i]; }
    std::span<const std::int32_t> codes(std::size_t i) const { return {codes_.data() + i * d_, d_}; }
    /// mu(X, D_n)
    double global_mean() const { return global_mean_; }
    /// Sample standard deviation of y on the learning set.
    double sd() const { return sd_; }

    RowBitset interval_rows(const Interval& iv) const {
        check(iv);
        RowBitset out = le_[iv.feature][std::size_t(iv.hi)];
        if (iv.lo > 0)
            out.and_not(le_[iv.feature][std::size_t(iv.lo - 1)]);
        return out;
    }

    RowBitset activation(const Condition& cond) const {
        RowBitset out = full_;
        for (const auto& iv : cond.intervals()) {
            check(iv);
            out &= le_[iv.feature][std::size_t(iv.hi)];
            if (iv.lo > 0)
                out.and_not(le_[iv.feature][std::size_t(iv.lo - 1)]);
        }
        return out;
    }

    /// Mean of y over the set rows, summed in row order; 0 for an empty set.
    double mean(const RowBitset& rows) const {
        double sum = 0.0;
        std::size_t count = 0;
        rows.for_each([&](std::size_t i) {
            sum += y_[i];
            ++count;
        });
        return count ? sum / double(count) : 0.0;
    }

    double sd(const RowBitset& rows) const {
        const double mu = mean(rows);
        double ss = 0.0;
        std::size_t count = 0;
        rows.for_each([&](std::size_t i) {
            ss += (y_[i] - mu) * (y_[i] - mu);
            ++count;
        });
        return count > 1 ? std::sqrt(ss / double(count - 1)) : 0.0;
    }

private:
    void check(const Interval& iv) const {
        if (iv.feature >= d_)
            throw Error(Errc::DimensionMismatch, "feature " + std::to_string(iv.feature) + " out of range");
        if (iv.lo < 0 || iv.hi >= cards_[iv.feature] || iv.lo > iv.hi)
            throw Error(Errc::InvalidArgument, "interval [" + std::to_string(iv.lo) + ", " + std::to_string(iv.hi) +
                                                   "] outside feature " + std::to_string(iv.feature) + "'s codes");
    }

    std::vector<std::int32_t> cards_;
    std::size_t d_ = 0;
    std::size_t n_ = 0;
    std::vector<double> y_;
    std::vector<std::int32_t> codes_;
    std::vector<std::vector<RowBitset>> le_; // le_[k][b]: rows with code <= b on feature k
    RowBitset full_;
    double global_mean_ = 0.0;
    double sd_ = 0.0;
};

inline std::size_t activation_count(const Condition& cond, const LearningIndex& idx) {
    return idx.activation(cond).count();
}

/// mu(E, D): mean label over rows activating E, 0 when none do.
inline double conditional_mean(const Condition& cond, const LearningIndex& idx) {
    return idx.mean(idx.activation(cond));
}

inline double coverage_ratio(const Condition& cond, const LearningIndex& idx) {
    if (idx.size() == 0)
        throw Error(Errc::EmptyLearningSet, "coverage of an empty learning set");
    return double(activation_count(cond, idx)) / double(idx.size());
}

/// Gaussian significance threshold q(1 - alpha/2) * sd / sqrt(n_active).
inline double gaussian_threshold(std::size_t n_active, double sd, double alpha) {
    if (n_active == 0)
        throw Error(Errc::NoActivations, "significance threshold of a rule with no activations");
    if (alpha <= 0.0)
        return std::numeric_limits<double>::infinity();
    if (sd <= 0.0)
        return 0.0;
    return normal_quantile(1.0 - alpha / 2.0) * sd / std::sqrt(double(n_active));
}

inline double significance_threshold(const RowBitset& rows, const LearningIndex& idx, double alpha, ZKind z) {
    const std::size_t n_active = rows.count();
    const double sd = z == ZKind::gaussian ? idx.sd() : idx.sd(rows);
    return gaussian_threshold(n_active, sd, alpha);
}

inline double significance_threshold(const Condition& cond, const LearningIndex& idx, double alpha, ZKind z) {
    return significance_threshold(idx.activation(cond), idx, alpha, z);
}

inline Rule make_rule(const Condition& cond, const RowBitset& rows, const LearningIndex& idx) {
    Rule r;
    r.condition = cond;
    r.activations = rows.count();
    r.prediction = idx.mean(rows);
    r.complexity = cond.complexity(idx.cardinalities());
    const double diff = r.prediction - idx.global_mean();
    r.sign = diff > 0 ? 1 : (diff < 0 ? -1 : 0);
    return r;
}

inline Rule make_rule(const Condition& cond, const LearningIndex& idx) {
    return make_rule(cond, idx.activation(cond), idx);
}

inline bool is_suitable(const Rule& rule, const RowBitset& rows, const LearningIndex& idx, const SearchParams& p) {
    if (idx.size() == 0 || rule.activations == 0)
        return false;
    const double coverage = double(rule.activations) / double(idx.size());
    if (coverage < p.coverage_min || coverage > p.coverage_max)
        return false;
    const double threshold = significance_threshold(rows, idx, p.alpha, p.z_kind);
    return std::abs(rule.prediction - idx.global_mean()) >= threshold;
}

inline bool is_suitable(const Rule& rule, const LearningIndex& idx, const SearchParams& p) {
    return is_suitable(rule, idx.activation(rule.condition), idx, p);
}

/// Selection criterion: |mu(r) - mu(X)| * sqrt(n(r)).
inline double criterion(const Rule& r, double global_mean) {
    return std::abs(r.prediction - global_mean) * std::sqrt(double(r.activations));
}

/// Total order: criterion descending, then lower complexity, then the
/// lexicographically smaller interval list.
struct CriterionOrder {
    double global_mean = 0.0;

    bool operator()(const Rule& a, const Rule& b) const {
        const double ca = criterion(a, global_mean);
        const double cb = criterion(b, global_mean);
        if (ca != cb)
            return ca > cb;
        if (a.complexity != b.complexity)
            return a.complexity < b.complexity;
        return a.condition.intervals() < b.condition.intervals();
    }
};

enum class IntersectFailure {
    none,
    empty,        ///< the rectangles do not overlap
    intersection, ///< the intersection is activated by exactly the rows of one parent
    complexity,   ///< the parents constrain a common feature
};

inline std::string to_string(IntersectFailure f) {
    switch (f) {
    case IntersectFailure::none: return "none";
    case IntersectFailure::empty: return "empty";
    case IntersectFailure::intersection: return "intersection";
    case IntersectFailure::complexity: return "complexity";
    }
    return "none";
}

struct IntersectResult {
    std::optional<Condition> condition;
    IntersectFailure failure = IntersectFailure::none;

    explicit operator bool() const { return condition.has_value(); }
};

/// Geometric intersection of two rectangles; nullopt when empty.
inline std::optional<Condition> intersect_conditions(const Condition& a, const Condition& b) {
    std::vector<Interval> out;
    const auto& ia = a.intervals();
    const auto& ib = b.intervals();
    std::size_t i = 0, j = 0;
    while (i < ia.size() || j < ib.size()) {
        if (j == ib.size() || (i < ia.size() && ia[i].feature < ib[j].feature))
            out.push_back(ia[i++]);
        else if (i == ia.size() || ib[j].feature < ia[i].feature)
            out.push_back(ib[j++]);
        else {
            Interval iv{ia[i].feature, std::max(ia[i].lo, ib[j].lo), std::min(ia[i].hi, ib[j].hi)};
            if (iv.lo > iv.hi)
                return std::nullopt;
            out.push_back(iv);
            ++i;
            ++j;
        }
    }
    return Condition(std::move(out));
}

/// Suitable intersection of two rules. Checks non-emptiness, then the
/// complexity condition, then the activation-count condition.
inline IntersectResult intersect(const Rule& ri, const Rule& rj, const RowBitset& rows_i, const RowBitset& rows_j,
                                 const LearningIndex& idx) {
    IntersectResult res;
    auto cond = intersect_conditions(ri.condition, rj.condition);
    if (!cond) {
        res.failure = IntersectFailure::empty;
        return res;
    }
    if (cond->complexity(idx.cardinalities()) != ri.complexity + rj.complexity) {
        res.failure = IntersectFailure::complexity;
        return res;
    }
    const std::size_t n_both = rows_i.count_and(rows_j);
    if (n_both == rows_i.count() || n_both == rows_j.count()) {
        res.failure = IntersectFailure::intersection;
        return res;
    }
    res.condition = std::move(cond);
    return res;
}

inline IntersectResult intersect(const Rule& ri, const Rule& rj, const LearningIndex& idx) {
    return intersect(ri, rj, idx.activation(ri.condition), idx.activation(rj.condition), idx);
}

/// If-Then rendering in the style "WHEN <feature> is high relative to sector
/// AND ... THEN Opportunity".
inline std::string describe(const Rule& rule, const std::vector<FeatureSpec>& specs,
                            std::span<const std::int32_t> cardinalities) {
    if (rule.is_default || rule.condition.is_full_space()) {
        std::ostringstream ss;
        ss << "DEFAULT THEN predict " << rule.prediction;
        return ss.str();
    }
    std::ostringstream ss;
    ss << "WHEN ";
    bool first = true;
    for (const auto& iv : rule.condition.intervals()) {
        if (!first)
            ss << " AND ";
        first = false;
        const auto& spec = specs[iv.feature];
        const std::int32_t top = cardinalities[iv.feature] - 1;
        ss << spec.id << ' ';
        if (iv.lo == top && iv.hi == top)
            ss << "is at the maximum";
        else if (iv.lo == 0 && iv.hi == 0)
            ss << "is at the minimum";
        else if (iv.hi == top && iv.lo > 0)
            ss << "is high";
        else if (iv.lo == 0 && iv.hi < top)
            ss << "is low";
        else
            ss << "is in [" << iv.lo << ", " << iv.hi << "]";
        if (spec.relative_to == RelativeTo::sector)
            ss << " relative to sector";
        else if (spec.relative_to == RelativeTo::peer_group)
            ss << " relative to peer group";
        else if (spec.relative_to == RelativeTo::delta_score)
            ss << " (change over time)";
    }
    ss << " THEN " << (rule.sign >= 0 ? "Opportunity" : "Risk");
    return ss.str();
}

} // namespace rulescreen
