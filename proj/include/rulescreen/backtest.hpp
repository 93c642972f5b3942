#pragma once

// Portfolio construction (benchmark, best-in-class, score screens, sector
// matching), daily simulation with monthly rebalancing, and KPIs.

#include "rulescreen/date.hpp"
#include "rulescreen/detail/csv.hpp"
#include "rulescreen/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rulescreen {

struct UniverseRow {
    std::string stock_id;
    double cap_weight = 0.0;
    std::string sector;
    std::string peer_group;
    double esg_rating = 0.0;
    std::optional<int> score; ///< absent counts as 0
};

struct UniverseSnapshot {
    Date review_date;
    std::vector<UniverseRow> rows;

    void validate() const {
        double total = 0.0;
        std::set<std::string> ids;
        for (const auto& r : rows) {
            if (!(r.cap_weight >= 0.0))
                throw Error(Errc::InvalidArgument, "negative cap weight for " + r.stock_id);
            total += r.cap_weight;
            if (!ids.insert(r.stock_id).second)
                throw Error(Errc::InvalidArgument, "duplicate stock " + r.stock_id + " on " + review_date.iso());
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw Error(Errc::InvalidArgument, "cap weights on " + review_date.iso() + " sum to " +
                                                   std::to_string(total));
    }
};

/// Portfolio weights aligned with a snapshot's rows.
using WeightVector = std::vector<double>;

namespace detail {

inline WeightVector normalized(WeightVector w, const std::string& what) {
    double total = 0.0;
    for (double v : w)
        total += v;
    if (!(total > 0.0))
        throw Error(Errc::EmptyAfterFilter, what + " selects no stock");
    for (double& v : w)
        v /= total;
    return w;
}

} // namespace detail

inline WeightVector benchmark_weights(const UniverseSnapshot& snap) {
    WeightVector w;
    w.reserve(snap.rows.size());
    for (const auto& r : snap.rows)
        w.push_back(r.cap_weight);
    // same rescaling as the filtered legs, so a filter that keeps everyone is bitwise the benchmark
    return detail::normalized(std::move(w), "benchmark");
}

/// Drops, within each peer group, the stocks whose rating falls in the
/// lowest x-quantile (empirical CDF of the rating within the group <= x),
/// then rescales the surviving cap weights to sum to one.
inline WeightVector best_in_class(const UniverseSnapshot& snap, double x) {
    if (!(x >= 0.0 && x < 1.0))
        throw Error(Errc::InvalidArgument, "best-in-class threshold must lie in [0, 1)");
    std::map<std::string, std::vector<double>> ratings;
    for (const auto& r : snap.rows)
        ratings[r.peer_group].push_back(r.esg_rating);
    for (auto& [group, v] : ratings)
        std::sort(v.begin(), v.end());
    WeightVector w(snap.rows.size(), 0.0);
    for (std::size_t i = 0; i < snap.rows.size(); ++i) {
        const auto& r = snap.rows[i];
        const auto& v = ratings[r.peer_group];
        const auto at_or_below = std::size_t(std::upper_bound(v.begin(), v.end(), r.esg_rating) - v.begin());
        const double cdf = double(at_or_below) / double(v.size());
        if (cdf > x)
            w[i] = r.cap_weight;
    }
    return detail::normalized(std::move(w), "best-in-class filter");
}

/// Keeps the stocks whose score equals `sign`, cap-weighted.
inline WeightVector ml_screen(const UniverseSnapshot& snap, int sign) {
    if (sign != 1 && sign != -1)
        throw Error(Errc::InvalidArgument, "screen sign must be +1 or -1");
    WeightVector w(snap.rows.size(), 0.0);
    for (std::size_t i = 0; i < snap.rows.size(); ++i)
        if (snap.rows[i].score.value_or(0) == sign)
            w[i] = snap.rows[i].cap_weight;
    return detail::normalized(std::move(w), sign > 0 ? "positive screen" : "negative screen");
}

/// Rescales a selection so each populated sector carries the benchmark's
/// sector mass; the mass of sectors with no selected stock is spread
/// pro-rata over the populated ones.
inline WeightVector sector_match(const WeightVector& weights, const UniverseSnapshot& snap) {
    if (weights.size() != snap.rows.size())
        throw Error(Errc::InvalidArgument, "weight vector does not match the snapshot");
    std::map<std::string, double> bench, selected;
    for (std::size_t i = 0; i < snap.rows.size(); ++i) {
        bench[snap.rows[i].sector] += snap.rows[i].cap_weight;
        selected[snap.rows[i].sector] += weights[i];
    }
    double populated_mass = 0.0;
    for (const auto& [sector, w] : selected) {
        if (w <= 0.0)
            continue;
        if (!(bench[sector] > 0.0))
            throw Error(Errc::NoPopulatedSector, "sector '" + sector + "' has no benchmark mass");
        populated_mass += bench[sector];
    }
    if (!(populated_mass > 0.0))
        throw Error(Errc::NoPopulatedSector, "selection is empty");
    WeightVector out(weights.size(), 0.0);
    for (std::size_t i = 0; i < snap.rows.size(); ++i) {
        const auto& s = snap.rows[i].sector;
        if (weights[i] > 0.0)
            out[i] = weights[i] * (bench[s] / populated_mass) / selected[s];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Prices and simulation

/// Daily total returns on a date grid; NaN marks a missing quote.
class PriceTable {
public:
    PriceTable() = default;

    PriceTable(std::vector<Date> dates, std::vector<std::string> stocks)
        : dates_(std::move(dates)), stocks_(std::move(stocks)),
          returns_(dates_.size() * stocks_.size(), std::numeric_limits<double>::quiet_NaN()) {
        for (std::size_t j = 0; j < stocks_.size(); ++j)
            stock_index_.emplace(stocks_[j], j);
    }

    const std::vector<Date>& dates() const { return dates_; }
    const std::vector<std::string>& stocks() const { return stocks_; }

    std::optional<std::size_t> date_index(Date d) const {
        auto it = std::lower_bound(dates_.begin(), dates_.end(), d);
        if (it == dates_.end() || *it != d)
            return std::nullopt;
        return std::size_t(it - dates_.begin());
    }

    std::optional<std::size_t> stock_index(const std::string& id) const {
        auto it = stock_index_.find(id);
        if (it == stock_index_.end())
            return std::nullopt;
        return it->second;
    }

    double ret(std::size_t date, std::size_t stock) const { return returns_[date * stocks_.size() + stock]; }
    void set(std::size_t date, std::size_t stock, double r) { returns_[date * stocks_.size() + stock] = r; }

    static PriceTable load_csv(const std::string& path) {
        const auto t = detail::read_csv(path);
        const auto cd = t.column("date", path), cs = t.column("stock_id", path),
                   cr = t.column("total_return_daily", path);
        std::set<Date> dates;
        std::set<std::string> stocks;
        for (const auto& row : t.rows) {
            dates.insert(Date::parse(row[cd]));
            stocks.insert(row[cs]);
        }
        PriceTable table({dates.begin(), dates.end()}, {stocks.begin(), stocks.end()});
        for (const auto& row : t.rows) {
            if (row[cr].empty())
                continue;
            table.set(*table.date_index(Date::parse(row[cd])), *table.stock_index(row[cs]),
                      detail::to_double(row[cr], path));
        }
        return table;
    }

private:
    std::vector<Date> dates_;
    std::vector<std::string> stocks_;
    std::unordered_map<std::string, std::size_t> stock_index_;
    std::vector<double> returns_; // row-major dates x stocks
};

using Holdings = std::vector<std::pair<std::string, double>>;

inline Holdings to_holdings(const UniverseSnapshot& snap, const WeightVector& w) {
    Holdings h;
    for (std::size_t i = 0; i < w.size(); ++i)
        if (w[i] > 0.0)
            h.emplace_back(snap.rows[i].stock_id, w[i]);
    return h;
}

struct PortfolioSeries {
    std::string name;
    std::vector<Date> dates;
    std::vector<double> values;  ///< total-return level, 100 at dates[0]
    std::vector<double> returns; ///< returns[k] earned from dates[k-1] to dates[k]; returns[0] = 0
    std::vector<std::pair<Date, Holdings>> weights_history;
};

/// Last grid date of every calendar month within [from, to].
inline std::vector<Date> month_end_reviews(std::span<const Date> grid, Date from, Date to) {
    std::vector<Date> out;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] < from || grid[i] > to)
            continue;
        const bool last = i + 1 == grid.size() || grid[i + 1].month() != grid[i].month();
        if (last)
            out.push_back(grid[i]);
    }
    return out;
}

/// Buy-and-hold between reviews with drifting weights, rebalancing to
/// `weights_fn(review)` at the close of each review date. The series starts
/// at the first review with level 100 and runs to `end`.
inline PortfolioSeries simulate(std::string name, const PriceTable& prices, std::span<const Date> reviews, Date end,
                                const std::function<Holdings(Date)>& weights_fn) {
    if (reviews.empty())
        throw Error(Errc::InvalidArgument, "empty review schedule");
    const auto first = prices.date_index(reviews.front());
    const auto last = prices.date_index(end);
    if (!first || !last || *last < *first)
        throw Error(Errc::MissingPriceData, "price grid does not cover " + reviews.front().iso() + " .. " + end.iso());
    std::set<Date> review_set(reviews.begin(), reviews.end());
    for (Date r : reviews)
        if (!prices.date_index(r))
            throw Error(Errc::MissingPriceData, "review date " + r.iso() + " is not a trading date");

    PortfolioSeries s;
    s.name = std::move(name);
    std::vector<std::size_t> held;
    std::vector<double> w;
    auto rebalance = [&](Date d) {
        const Holdings h = weights_fn(d);
        held.clear();
        w.clear();
        for (const auto& [id, weight] : h) {
            if (weight == 0.0)
                continue;
            const auto j = prices.stock_index(id);
            if (!j)
                throw Error(Errc::MissingPriceData, "no prices for " + id);
            held.push_back(*j);
            w.push_back(weight);
        }
        s.weights_history.emplace_back(d, h);
    };

    s.dates.push_back(prices.dates()[*first]);
    s.values.push_back(100.0);
    s.returns.push_back(0.0);
    rebalance(prices.dates()[*first]);
    for (std::size_t t = *first + 1; t <= *last; ++t) {
        const Date d = prices.dates()[t];
        double rp = 0.0;
        for (std::size_t k = 0; k < held.size(); ++k) {
            const double r = prices.ret(t, held[k]);
            if (std::isnan(r))
                throw Error(Errc::MissingPriceData, "missing return for " + prices.stocks()[held[k]] + " on " +
                                                        d.iso());
            rp += w[k] * r;
        }
        for (std::size_t k = 0; k < held.size(); ++k)
            w[k] = w[k] * (1.0 + prices.ret(t, held[k])) / (1.0 + rp);
        s.dates.push_back(d);
        s.returns.push_back(rp);
        s.values.push_back(s.values.back() * (1.0 + rp));
        if (review_set.count(d))
            rebalance(d);
    }
    return s;
}

/// Sub-series starting at `from` (inclusive), rebased to 100. Period
/// returns are copied unchanged.
inline PortfolioSeries slice(const PortfolioSeries& s, Date from) {
    PortfolioSeries out;
    out.name = s.name;
    auto it = std::lower_bound(s.dates.begin(), s.dates.end(), from);
    const std::size_t k0 = std::size_t(it - s.dates.begin());
    for (std::size_t k = k0; k < s.dates.size(); ++k) {
        out.dates.push_back(s.dates[k]);
        out.returns.push_back(k == k0 ? 0.0 : s.returns[k]);
        out.values.push_back(k == k0 ? 100.0 : out.values.back() * (1.0 + s.returns[k]));
    }
    for (const auto& h : s.weights_history)
        if (h.first >= from)
            out.weights_history.push_back(h);
    return out;
}

// ---------------------------------------------------------------------------
// KPIs

struct KpiReport {
    double ann_performance = 0.0;
    double ann_volatility = 0.0;
    double sharpe = 0.0;
    double max_drawdown = 0.0;
    double information_ratio = 0.0;
    double ann_alpha = 0.0;
    std::map<int, double> calendar_excess; ///< year -> strategy minus benchmark return
};

/// Compounded return per calendar year; period k belongs to the year of dates[k].
inline std::map<int, double> calendar_returns(const PortfolioSeries& s) {
    std::map<int, double> growth;
    for (std::size_t k = 1; k < s.returns.size(); ++k) {
        auto [it, inserted] = growth.try_emplace(s.dates[k].year(), 1.0);
        it->second *= 1.0 + s.returns[k];
    }
    for (auto& [year, g] : growth)
        g -= 1.0;
    return growth;
}

/// Compounded return per calendar month, in date order.
inline std::vector<double> monthly_returns(const PortfolioSeries& s) {
    std::vector<double> out;
    int key = -1;
    for (std::size_t k = 1; k < s.returns.size(); ++k) {
        const int this_key = s.dates[k].year() * 12 + int(s.dates[k].month());
        if (this_key != key) {
            out.push_back(1.0);
            key = this_key;
        }
        out.back() *= 1.0 + s.returns[k];
    }
    for (double& g : out)
        g -= 1.0;
    return out;
}

inline double max_drawdown(std::span<const double> levels) {
    double peak = -std::numeric_limits<double>::infinity();
    double worst = 0.0;
    for (double v : levels) {
        peak = std::max(peak, v);
        worst = std::min(worst, v / peak - 1.0);
    }
    return worst;
}

namespace detail {

inline double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v)
        s += x;
    return v.empty() ? 0.0 : s / double(v.size());
}

inline double sample_sd(std::span<const double> v) {
    if (v.size() < 2)
        return 0.0;
    const double mu = mean(v);
    double ss = 0.0;
    for (double x : v)
        ss += (x - mu) * (x - mu);
    return std::sqrt(ss / double(v.size() - 1));
}

/// Intercept of the OLS regression of y on x.
inline double ols_intercept(std::span<const double> y, std::span<const double> x) {
    if (y.size() < 2)
        return 0.0;
    const double my = mean(y), mx = mean(x);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    const double beta = sxx > 0.0 ? sxy / sxx : 0.0;
    return my - beta * mx;
}

} // namespace detail

/// Annualized KPIs of `series` against `benchmark` over a shared date grid.
/// Returns are geometric-annualized, volatility and tracking error scale
/// with sqrt(periods_per_year), alpha is the monthly OLS intercept times 12.
inline KpiReport kpis(const PortfolioSeries& series, const PortfolioSeries& benchmark, double periods_per_year = 252.0,
                      double risk_free = 0.0) {
    if (series.dates != benchmark.dates)
        throw Error(Errc::GridMismatch, series.name + " and " + benchmark.name + " do not share a date grid");
    KpiReport k;
    const std::size_t n = series.returns.size() > 0 ? series.returns.size() - 1 : 0;
    if (n == 0)
        return k;
    const std::span<const double> r(series.returns.data() + 1, n);
    const std::span<const double> b(benchmark.returns.data() + 1, n);

    double growth = 1.0;
    for (double x : r)
        growth *= 1.0 + x;
    k.ann_performance = std::pow(growth, periods_per_year / double(n)) - 1.0;
    k.ann_volatility = detail::sample_sd(r) * std::sqrt(periods_per_year);
    k.sharpe = k.ann_volatility > 0.0 ? (k.ann_performance - risk_free) / k.ann_volatility : 0.0;

    k.max_drawdown = max_drawdown(series.values);

    std::vector<double> excess(n);
    for (std::size_t i = 0; i < n; ++i)
        excess[i] = r[i] - b[i];
    const double te = detail::sample_sd(excess) * std::sqrt(periods_per_year);
    k.information_ratio = te > 0.0 ? detail::mean(excess) * periods_per_year / te : 0.0;

    const auto ms = monthly_returns(series);
    const auto mb = monthly_returns(benchmark);
    k.ann_alpha = detail::ols_intercept(ms, mb) * 12.0;

    const auto cs = calendar_returns(series);
    const auto cb = calendar_returns(benchmark);
    for (const auto& [year, ret] : cs)
        k.calendar_excess[year] = ret - cb.at(year);
    return k;
}

} // namespace rulescreen
