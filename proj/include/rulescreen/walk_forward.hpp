#pragma once

// Walk-forward backtest: yearly re-learning on an expanding window, daily
// aggregation updates as 3-month labels resolve, monthly screened
// portfolios, and frozen-rule (LEARNING Y) variants.

#include "rulescreen/backtest.hpp"
#include "rulescreen/model.hpp"

#include <algorithm>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace rulescreen {

inline constexpr const char* kBenchmark = "Benchmark";
inline constexpr const char* kPositiveMl = "Positive ML";
inline constexpr const char* kPositiveSectorMatched = "Positive Sector-Matched";
inline constexpr const char* kNegativeMl = "Negative ML";
inline constexpr const char* kBestInClass = "Best-in-class 30%";

inline std::string learning_y_name(int year) { return "LEARNING " + std::to_string(year); }

struct BacktestConfig {
    ModelConfig model;
    int initial_years = 3;       ///< calendar years in the first training window
    int horizon_days = 63;       ///< business days until a label resolves
    int score_lag_days = 4;      ///< scores are taken this many business days before each review
    double best_in_class_x = 0.3;
    std::vector<int> learning_years;
    double periods_per_year = 252.0;
    double risk_free = 0.0;
};

struct BacktestReport {
    PortfolioSeries series;
    KpiReport kpis;
};

struct ScoreRow {
    std::string stock_id;
    std::optional<double> y_hat; ///< empty when no rule activates
    int score = 0;
};

struct LearningRecord {
    Date date;
    int year = 0;
    std::size_t training_rows = 0;
    std::size_t rules = 0;
    std::size_t positive_rules = 0;
    std::size_t negative_rules = 0;
    bool has_default = false;
    std::vector<LevelStats> levels;
};

struct WalkForwardResult {
    std::map<std::string, BacktestReport> reports;
    std::map<int, BacktestReport> learning_y;
    std::vector<LearningRecord> learnings;
    std::map<Date, std::vector<ScoreRow>> scores; ///< walk-forward scores by score date
};

/// Universe snapshots sorted by date.
using Universe = std::vector<UniverseSnapshot>;

/// Latest snapshot dated on or before `d`.
inline const UniverseSnapshot& snapshot_asof(const Universe& universe, Date d) {
    auto it = std::upper_bound(universe.begin(), universe.end(), d,
                               [](Date x, const UniverseSnapshot& s) { return x < s.review_date; });
    if (it == universe.begin())
        throw Error(Errc::InsufficientHistory, "no universe snapshot on or before " + d.iso());
    return *std::prev(it);
}

inline Universe load_universe_csv(const std::string& path) {
    const auto t = detail::read_csv(path);
    const auto cd = t.column("date", path), cs = t.column("stock_id", path), cw = t.column("cap_weight", path),
               csec = t.column("sector", path), cp = t.column("peer_group", path),
               cr = t.column("esg_rating", path);
    std::map<Date, UniverseSnapshot> by_date;
    for (const auto& row : t.rows) {
        const Date d = Date::parse(row[cd]);
        auto& snap = by_date[d];
        snap.review_date = d;
        UniverseRow r;
        r.stock_id = row[cs];
        r.cap_weight = detail::to_double(row[cw], path);
        r.sector = row[csec];
        r.peer_group = row[cp];
        r.esg_rating = detail::to_double(row[cr], path);
        snap.rows.push_back(std::move(r));
    }
    Universe out;
    for (auto& [d, snap] : by_date) {
        std::sort(snap.rows.begin(), snap.rows.end(),
                  [](const UniverseRow& a, const UniverseRow& b) { return a.stock_id < b.stock_id; });
        snap.validate();
        out.push_back(std::move(snap));
    }
    if (out.empty())
        throw Error(Errc::EmptyPanel, path + ": no universe rows");
    return out;
}

namespace detail {

struct Schedule {
    std::vector<Date> reviews;                 // month-end reviews, first is the start of the test period
    std::map<Date, Date> score_date;           // review -> score date
    std::map<std::size_t, int> learning_index; // grid index -> year learned
    std::map<int, Date> december_review;       // year -> last review of the year
    int first_year = 0;
    int initial_end = 0;
    int last_year = 0;
};

inline Schedule make_schedule(const RawPanel& panel, const PriceTable& prices, const BacktestConfig& cfg) {
    if (panel.observations.empty())
        throw Error(Errc::EmptyPanel, "no observations");
    if (prices.dates().empty())
        throw Error(Errc::MissingPriceData, "empty price table");
    if (cfg.initial_years < 1 || cfg.horizon_days < 1 || cfg.score_lag_days < 0)
        throw Error(Errc::InvalidConfig, "initial_years and horizon_days must be >= 1, score_lag_days >= 0");
    const auto& grid = prices.dates();
    Schedule s;
    Date first = panel.observations.front().date;
    for (const auto& o : panel.observations)
        first = std::min(first, o.date);
    s.first_year = first.year();
    s.initial_end = s.first_year + cfg.initial_years - 1;
    s.last_year = grid.back().year();
    if (s.last_year <= s.initial_end)
        throw Error(Errc::InsufficientHistory, "data ends in " + std::to_string(s.last_year) +
                                                   " but the first training window runs to " +
                                                   std::to_string(s.initial_end));
    const Date start_bound(s.initial_end, 12, 31);
    auto start_it = std::upper_bound(grid.begin(), grid.end(), start_bound);
    if (start_it == grid.begin())
        throw Error(Errc::MissingPriceData, "no trading dates in " + std::to_string(s.initial_end));
    const Date start = *std::prev(start_it);
    if (start.year() != s.initial_end)
        throw Error(Errc::MissingPriceData, "no trading dates in " + std::to_string(s.initial_end));
    s.reviews = month_end_reviews(grid, start, grid.back());
    for (Date r : s.reviews) {
        const std::size_t i = *prices.date_index(r);
        if (i < std::size_t(cfg.score_lag_days))
            throw Error(Errc::InsufficientHistory, "no score date before review " + r.iso());
        s.score_date[r] = grid[i - std::size_t(cfg.score_lag_days)];
        if (r.month() == 12 && r.year() < s.last_year)
            s.december_review[r.year()] = r;
    }
    for (const auto& [year, review] : s.december_review)
        s.learning_index[*prices.date_index(s.score_date[review])] = year;
    return s;
}

} // namespace detail

/// Runs the walk-forward protocol and returns one report per strategy plus
/// the LEARNING Y variants requested in `cfg.learning_years`.
inline WalkForwardResult walk_forward(const RawPanel& panel, const Universe& universe, const PriceTable& prices,
                                      const BacktestConfig& cfg) {
    const auto sched = detail::make_schedule(panel, prices, cfg);
    for (int y : cfg.learning_years)
        if (!sched.december_review.count(y))
            throw Error(Errc::UnknownLearningYear,
                        "LEARNING " + std::to_string(y) + ": rules are learned at the end of years " +
                            std::to_string(sched.initial_end) + ".." + std::to_string(sched.last_year - 1));
    const auto& grid = prices.dates();

    // chronological observations and the grid index at which each label resolves
    const auto order = chronological_order(panel.observations);
    std::vector<const RawObservation*> obs;
    obs.reserve(order.size());
    for (std::size_t i : order)
        obs.push_back(&panel.observations[i]);
    std::map<std::size_t, std::vector<std::size_t>> resolving; // grid index -> obs positions
    std::vector<std::size_t> resolve_at(obs.size(), grid.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (!obs[i]->y)
            continue;
        auto it = std::lower_bound(grid.begin(), grid.end(), obs[i]->date);
        const std::size_t t = std::size_t(it - grid.begin()) + std::size_t(cfg.horizon_days);
        if (t < grid.size()) {
            resolve_at[i] = t;
            resolving[t].push_back(i);
        }
    }
    for (auto& [t, v] : resolving)
        std::sort(v.begin(), v.end(),
                  [&](std::size_t a, std::size_t b) { return obs[a]->stock_id < obs[b]->stock_id; });

    WalkForwardResult result;
    std::optional<Model> live;
    std::map<int, Model> frozen;
    // review -> stock -> score, per engine
    std::map<Date, std::map<std::string, int>> live_scores;
    std::map<int, std::map<Date, std::map<std::string, int>>> frozen_scores;
    std::map<Date, Date> review_of_score_date;
    for (const auto& [r, s] : sched.score_date)
        review_of_score_date[s] = r;

    std::map<std::string, std::size_t> latest; // stock -> position of its latest observation
    std::size_t cursor = 0;
    const std::size_t t0 = sched.learning_index.begin()->first;

    auto score_with = [&](const Model& m, const UniverseSnapshot& snap, std::vector<ScoreRow>* rows) {
        std::map<std::string, int> out;
        for (const auto& u : snap.rows) {
            auto it = latest.find(u.stock_id);
            ScoreRow row{u.stock_id, std::nullopt, 0};
            if (it != latest.end()) {
                row.y_hat = m.predict_raw(obs[it->second]->features);
                row.score = row.y_hat ? score(*row.y_hat, m.state.epsilon) : 0;
            }
            out[u.stock_id] = row.score;
            if (rows)
                rows->push_back(std::move(row));
        }
        return out;
    };

    for (std::size_t t = t0; t < grid.size(); ++t) {
        const Date d = grid[t];
        while (cursor < obs.size() && obs[cursor]->date <= d) {
            latest[obs[cursor]->stock_id] = cursor;
            ++cursor;
        }
        if (auto it = resolving.find(t); it != resolving.end()) {
            for (std::size_t i : it->second) {
                if (live)
                    live->observe_raw(obs[i]->features, *obs[i]->y);
                for (auto& [y, m] : frozen)
                    m.observe_raw(obs[i]->features, *obs[i]->y);
            }
        }
        if (auto it = sched.learning_index.find(t); it != sched.learning_index.end()) {
            std::vector<RawObservation> training;
            for (std::size_t i = 0; i < obs.size(); ++i)
                if (resolve_at[i] <= t)
                    training.push_back(*obs[i]);
            live = learn_model(training, panel.specs, cfg.model, d);
            LearningRecord rec;
            rec.date = d;
            rec.year = it->second;
            rec.training_rows = training.size();
            rec.rules = live->rules.size();
            for (const auto& r : live->rules.rules) {
                rec.positive_rules += r.sign > 0;
                rec.negative_rules += r.sign < 0;
            }
            rec.has_default = live->rules.has_default();
            rec.levels = live->levels;
            result.learnings.push_back(std::move(rec));
            if (std::find(cfg.learning_years.begin(), cfg.learning_years.end(), it->second) !=
                cfg.learning_years.end())
                frozen.emplace(it->second, *live);
        }
        if (auto it = review_of_score_date.find(d); it != review_of_score_date.end() && live) {
            const Date review = it->second;
            const auto& snap = snapshot_asof(universe, d);
            auto& rows = result.scores[d];
            live_scores[review] = score_with(*live, snap, &rows);
            for (const auto& [y, m] : frozen)
                frozen_scores[y][review] = score_with(m, snap, nullptr);
        }
    }

    auto screened = [&](const std::map<Date, std::map<std::string, int>>& scores, Date review,
                        const std::function<WeightVector(const UniverseSnapshot&)>& build) {
        UniverseSnapshot snap = snapshot_asof(universe, sched.score_date.at(review));
        const auto& sc = scores.at(review);
        for (auto& row : snap.rows)
            if (auto it = sc.find(row.stock_id); it != sc.end())
                row.score = it->second;
        WeightVector w;
        try {
            w = build(snap);
        } catch (const Error& e) {
            // an empty screen holds the benchmark for the month
            if (e.code() != Errc::EmptyAfterFilter && e.code() != Errc::NoPopulatedSector)
                throw;
            w = benchmark_weights(snap);
        }
        return to_holdings(snap, w);
    };

    const Date end = grid.back();
    auto run = [&](const std::string& name, std::span<const Date> reviews, auto&& weights_fn) {
        return simulate(name, prices, reviews, end, weights_fn);
    };

    const auto& reviews = sched.reviews;
    auto bench = run(kBenchmark, reviews, [&](Date r) {
        const auto& snap = snapshot_asof(universe, sched.score_date.at(r));
        return to_holdings(snap, benchmark_weights(snap));
    });
    std::vector<PortfolioSeries> legs;
    legs.push_back(run(kPositiveMl, reviews, [&](Date r) {
        return screened(live_scores, r, [](const UniverseSnapshot& s) { return ml_screen(s, 1); });
    }));
    legs.push_back(run(kPositiveSectorMatched, reviews, [&](Date r) {
        return screened(live_scores, r,
                        [](const UniverseSnapshot& s) { return sector_match(ml_screen(s, 1), s); });
    }));
    legs.push_back(run(kNegativeMl, reviews, [&](Date r) {
        return screened(live_scores, r, [](const UniverseSnapshot& s) { return ml_screen(s, -1); });
    }));
    const double x = cfg.best_in_class_x;
    legs.push_back(run(kBestInClass, reviews, [&](Date r) {
        const auto& snap = snapshot_asof(universe, sched.score_date.at(r));
        return to_holdings(snap, best_in_class(snap, x));
    }));

    for (auto& leg : legs) {
        auto k = kpis(leg, bench, cfg.periods_per_year, cfg.risk_free);
        const std::string name = leg.name;
        result.reports[name] = {std::move(leg), std::move(k)};
    }
    {
        auto k = kpis(bench, bench, cfg.periods_per_year, cfg.risk_free);
        result.reports[kBenchmark] = {bench, std::move(k)};
    }

    for (const auto& [year, scores] : frozen_scores) {
        const Date from = sched.december_review.at(year);
        std::vector<Date> ly_reviews;
        for (Date r : reviews)
            if (r >= from)
                ly_reviews.push_back(r);
        auto series = run(learning_y_name(year), ly_reviews, [&, &sc = scores](Date r) {
            return screened(sc, r, [](const UniverseSnapshot& s) { return ml_screen(s, 1); });
        });
        const auto b = slice(bench, from);
        auto k = kpis(series, b, cfg.periods_per_year, cfg.risk_free);
        result.learning_y[year] = {std::move(series), std::move(k)};
    }
    return result;
}

/// Positive screen driven by the rules learned at the end of year `year`,
/// never re-learned; aggregation weights keep updating daily.
inline BacktestReport learning_y(const RawPanel& panel, const Universe& universe, const PriceTable& prices,
                                 BacktestConfig cfg, int year) {
    cfg.learning_years = {year};
    auto result = walk_forward(panel, universe, prices, cfg);
    return std::move(result.learning_y.at(year));
}

} // namespace rulescreen
