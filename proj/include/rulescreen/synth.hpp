#pragma once

// Deterministic synthetic panels with planted rules: features, 3-month
// forward excess returns, a cap-weighted universe and daily prices whose
// realized 3-month excess returns reproduce the labels.

#include "rulescreen/backtest.hpp"
#include "rulescreen/panel.hpp"
#include "rulescreen/rules.hpp"
#include "rulescreen/walk_forward.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace rulescreen {

struct PlantedRule {
    Condition condition; ///< over true modalities floor(u * m) of the uniform raw features
    double effect = 0.0; ///< shift of the 3-month excess return, decimal
};

struct RegimeShift {
    Date date;
    std::vector<PlantedRule> planted; ///< replaces SynthSpec::planted for observations dated on or after `date`
};

struct SynthSpec {
    std::size_t n_stocks = 300;
    std::size_t n_dates = 2347; ///< business days; from 2010-01-01 this ends on 2018-12-31
    std::size_t d = 10;
    int m = 5;
    std::vector<PlantedRule> planted;
    double noise_sigma = 0.08;
    std::optional<RegimeShift> regime_shift;
    std::uint64_t seed = 1;

    Date start{2010, 1, 1};
    int horizon_days = 63;
    bool stagger = true;      ///< spread first observation dates over the horizon
    double redraw_prob = 0.3; ///< chance a feature is redrawn at each observation
    std::vector<std::size_t> sector_features; ///< features shared within a sector
    double sector_jitter = 0.02;
    double correlation = 0.0; ///< > 0: gaussian-copula AR blend of neighbouring features
    double missing_rate = 0.0;
    std::size_t n_sectors = 5;
    std::size_t peer_groups_per_sector = 3;
    double market_drift = 0.0003;
    double market_vol = 0.01;
    double idio_vol = 0.012;
    double cap_dispersion = 1.0; ///< sigma of the lognormal initial market caps
    int score_lag_days = 4;
    bool center_effects = false; ///< subtract each rule's activation probability so labels average to zero

    void validate() const {
        auto fail = [](const std::string& what) { throw Error(Errc::InconsistentSpec, what); };
        if (n_stocks == 0 || n_dates < 2 || d == 0)
            fail("n_stocks, n_dates and d must be positive");
        if (m < 2)
            fail("m must be >= 2");
        if (!(noise_sigma >= 0.0) || !(idio_vol >= 0.0) || !(market_vol >= 0.0))
            fail("volatilities must be non-negative");
        if (horizon_days < 1)
            fail("horizon_days must be >= 1");
        if (!(redraw_prob >= 0.0 && redraw_prob <= 1.0) || !(missing_rate >= 0.0 && missing_rate < 1.0))
            fail("probabilities out of range");
        if (!(correlation >= 0.0 && correlation < 1.0))
            fail("correlation must lie in [0, 1)");
        if (!(cap_dispersion >= 0.0))
            fail("cap_dispersion must be non-negative");
        if (n_sectors == 0 || peer_groups_per_sector == 0)
            fail("need at least one sector and peer group");
        auto check = [&](const std::vector<PlantedRule>& rules) {
            for (const auto& p : rules)
                for (const auto& iv : p.condition.intervals())
                    if (iv.feature >= d || iv.lo < 0 || iv.hi >= m)
                        fail("planted interval outside the feature space");
        };
        check(planted);
        if (regime_shift)
            check(regime_shift->planted);
        for (auto k : sector_features)
            if (k >= d)
                fail("sector feature index out of range");
    }
};

struct SynthData {
    RawPanel panel;
    Universe universe;
    PriceTable prices;
    std::vector<std::string> sectors;     ///< per stock
    std::vector<std::string> peer_groups; ///< per stock
};

inline std::string synth_stock_id(std::size_t i) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "S%04zu", i);
    return buf;
}

inline std::vector<Date> business_days(Date start, std::size_t n) {
    std::vector<Date> out;
    out.reserve(n);
    Date d = start;
    while (!d.is_weekday())
        d = d + 1;
    while (out.size() < n) {
        out.push_back(d);
        d = add_business_days(d, 1);
    }
    return out;
}

namespace detail {

inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t id) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(id)};
    return std::mt19937_64(seq);
}

inline std::int32_t true_modality(double u, int m) {
    return std::min<std::int32_t>(std::int32_t(u * m), m - 1);
}

/// Activation probability of a planted condition under independent uniform features.
inline double activation_probability(const Condition& c, int m) {
    double p = 1.0;
    for (const auto& iv : c.intervals())
        p *= double(iv.hi - iv.lo + 1) / double(m);
    return p;
}

inline double planted_effect(const std::vector<PlantedRule>& rules, const std::vector<double>& u, int m,
                             bool centered = false) {
    double effect = 0.0;
    std::vector<std::int32_t> x(u.size());
    for (std::size_t k = 0; k < u.size(); ++k)
        x[k] = std::isnan(u[k]) ? kMissingCode : true_modality(u[k], m);
    for (const auto& p : rules) {
        if (activates(p.condition, x))
            effect += p.effect;
        if (centered)
            effect -= p.effect * activation_probability(p.condition, m);
    }
    return effect;
}

struct SynthObservation {
    std::size_t stock = 0;
    std::size_t t = 0;     ///< grid index of the observation
    double y = 0.0;        ///< drawn label (defined even when it does not resolve in the sample)
    bool resolves = false; ///< t + horizon inside the grid
    std::vector<double> u; ///< raw features, NaN = missing
};

/// Observation stream in (t, stock) order.
inline std::vector<SynthObservation> synth_observations(const SynthSpec& spec, const std::vector<Date>& grid) {
    auto rng = stream(spec.seed, 1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t h = std::size_t(spec.horizon_days);
    const std::size_t d = spec.d;
    std::vector<bool> is_sector_feature(d, false);
    for (auto k : spec.sector_features)
        is_sector_feature[k] = true;

    auto draw = [&](double prev_z) {
        // correlated mode: gaussian copula blending with the previous feature
        const double z = gauss(rng);
        const double blended = spec.correlation * prev_z + std::sqrt(1 - spec.correlation * spec.correlation) * z;
        return blended;
    };
    auto to_uniform = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };

    // latent gaussian state per stock; sector features hold evenly spaced
    // levels shuffled across sectors, so every modality keeps the same share
    std::vector<std::vector<double>> z(spec.n_stocks, std::vector<double>(d, 0.0));
    std::vector<std::vector<double>> sector_level(d, std::vector<double>(spec.n_sectors));
    for (auto& levels : sector_level)
        for (std::size_t s = 0; s < spec.n_sectors; ++s)
            levels[s] = (double(s) + 0.5) / double(spec.n_sectors);
    auto shuffle = [&](std::vector<double>& v) {
        for (std::size_t j = v.size(); j > 1; --j)
            std::swap(v[j - 1], v[std::min(std::size_t(unif(rng) * double(j)), j - 1)]);
    };
    std::vector<bool> seen(spec.n_stocks, false);
    std::size_t sector_epoch = std::size_t(-1);

    std::vector<SynthObservation> out;
    for (std::size_t t = 0; t < grid.size(); ++t) {
        // sector-level features move on a common quarterly clock
        if (const std::size_t epoch = t / h; epoch != sector_epoch) {
            const bool first = sector_epoch == std::size_t(-1);
            sector_epoch = epoch;
            for (std::size_t k = 0; k < d; ++k)
                if (is_sector_feature[k] && (first || unif(rng) < spec.redraw_prob))
                    shuffle(sector_level[k]);
        }
        for (std::size_t i = 0; i < spec.n_stocks; ++i) {
            const std::size_t phase = spec.stagger ? (i * h) / spec.n_stocks % h : 0;
            if (t < phase || (t - phase) % h != 0)
                continue;
            const std::size_t sector = i % spec.n_sectors;
            double prev = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                if (!seen[i] || unif(rng) < spec.redraw_prob)
                    z[i][k] = draw(prev);
                prev = z[i][k];
            }
            seen[i] = true;

            SynthObservation o;
            o.stock = i;
            o.t = t;
            o.u.resize(d);
            for (std::size_t k = 0; k < d; ++k) {
                if (is_sector_feature[k]) {
                    const double jitter = (unif(rng) - 0.5) * 2.0 * spec.sector_jitter;
                    o.u[k] = std::clamp(sector_level[k][sector] + jitter, 0.0, std::nextafter(1.0, 0.0));
                } else {
                    o.u[k] = to_uniform(z[i][k]);
                }
                if (spec.missing_rate > 0.0 && unif(rng) < spec.missing_rate)
                    o.u[k] = std::numeric_limits<double>::quiet_NaN();
            }
            const auto& rules = (spec.regime_shift && grid[t] >= spec.regime_shift->date) ? spec.regime_shift->planted
                                                                                          : spec.planted;
            o.y = planted_effect(rules, o.u, spec.m, spec.center_effects) + spec.noise_sigma * gauss(rng);
            o.y = std::max(o.y, -0.9); // keeps prices positive
            o.resolves = t + h < grid.size();
            out.push_back(std::move(o));
        }
    }
    return out;
}

inline RawObservation to_raw(const SynthObservation& o, const std::vector<Date>& grid) {
    RawObservation r;
    r.date = grid[o.t];
    r.stock_id = synth_stock_id(o.stock);
    r.features.reserve(o.u.size());
    for (double v : o.u) {
        if (std::isnan(v))
            r.features.emplace_back(std::monostate{});
        else
            r.features.emplace_back(v);
    }
    if (o.resolves)
        r.y = o.y;
    return r;
}

inline std::vector<FeatureSpec> synth_specs(const SynthSpec& spec) {
    std::vector<FeatureSpec> specs;
    for (std::size_t k = 0; k < spec.d; ++k) {
        FeatureSpec f;
        f.id = "f" + std::to_string(k);
        f.relative_to = std::find(spec.sector_features.begin(), spec.sector_features.end(), k) !=
                                spec.sector_features.end()
                            ? RelativeTo::all
                            : RelativeTo::sector;
        specs.push_back(std::move(f));
    }
    return specs;
}

} // namespace detail

/// Desk-scale regime-shift panel: persistent stock-level and sector rules,
/// with one stock-level rule inverting and a new one appearing at the end
/// of 2012. Labels are centred so the benchmark carries no planted drift.
inline SynthSpec desk_scale_spec(std::uint64_t seed = 1) {
    auto rule = [](std::size_t k, std::int32_t lo, std::int32_t hi, double effect) {
        return PlantedRule{Condition({{k, lo, hi}}), effect};
    };
    SynthSpec s;
    s.seed = seed;
    s.n_stocks = 500;
    s.noise_sigma = 0.04;
    s.cap_dispersion = 0.5;
    s.sector_features = {9};
    s.center_effects = true;
    s.planted = {rule(0, 4, 4, 0.04), rule(1, 0, 0, -0.04), rule(2, 4, 4, 0.04), rule(9, 4, 4, 0.08),
                 rule(9, 0, 0, -0.08)};
    s.regime_shift = RegimeShift{Date(2012, 12, 1),
                                 {rule(0, 4, 4, 0.04), rule(1, 0, 0, -0.04), rule(2, 4, 4, -0.16),
                                  rule(3, 4, 4, 0.20), rule(9, 4, 4, 0.08), rule(9, 0, 0, -0.08)}};
    return s;
}

/// Features and labels only (no prices or universe).
inline RawPanel generate_observations(const SynthSpec& spec) {
    spec.validate();
    const auto grid = business_days(spec.start, spec.n_dates);
    RawPanel panel;
    panel.specs = detail::synth_specs(spec);
    for (const auto& o : detail::synth_observations(spec, grid))
        panel.observations.push_back(detail::to_raw(o, grid));
    return panel;
}

inline SynthData generate(const SynthSpec& spec) {
    spec.validate();
    const auto grid = business_days(spec.start, spec.n_dates);
    const auto obs = detail::synth_observations(spec, grid);
    const std::size_t h = std::size_t(spec.horizon_days);
    const std::size_t n = spec.n_stocks, T = grid.size();

    SynthData data;
    data.panel.specs = detail::synth_specs(spec);
    for (const auto& o : obs)
        data.panel.observations.push_back(detail::to_raw(o, grid));

    // idiosyncratic daily returns: inside each observation window the path is
    // a centred gaussian walk tilted to compound exactly to 1 + y
    auto rng = detail::stream(spec.seed, 2);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> idio(T * n, 0.0);
    std::vector<bool> filled(T * n, false);
    for (const auto& o : obs) {
        std::vector<double> g(h);
        double mean = 0.0;
        for (auto& v : g) {
            v = spec.idio_vol * gauss(rng);
            mean += v;
        }
        mean /= double(h);
        const double drift = std::log1p(o.y) / double(h);
        for (std::size_t s = 0; s < h; ++s) {
            const std::size_t t = o.t + 1 + s;
            if (t >= T)
                break;
            idio[t * n + o.stock] = std::expm1(g[s] - mean + drift);
            filled[t * n + o.stock] = true;
        }
    }
    for (std::size_t t = 1; t < T; ++t)
        for (std::size_t i = 0; i < n; ++i)
            if (!filled[t * n + i]) // before the stock's first observation
                idio[t * n + i] = std::expm1(spec.idio_vol * gauss(rng) - spec.idio_vol * spec.idio_vol / 2);

    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i)
        ids[i] = synth_stock_id(i);
    data.prices = PriceTable(grid, ids);
    std::vector<double> market(T, 0.0);
    for (std::size_t t = 1; t < T; ++t)
        market[t] = spec.market_drift + spec.market_vol * gauss(rng);
    for (std::size_t t = 1; t < T; ++t)
        for (std::size_t i = 0; i < n; ++i)
            data.prices.set(t, i, (1.0 + market[t]) * (1.0 + idio[t * n + i]) - 1.0);

    // universe snapshots on every score date (month end minus the score lag)
    data.sectors.resize(n);
    data.peer_groups.resize(n);
    std::vector<double> cap(n), rating(n);
    std::lognormal_distribution<double> caps(0.0, spec.cap_dispersion);
    std::uniform_real_distribution<double> unif(0.0, 100.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t s = i % spec.n_sectors;
        const std::size_t p = (i / spec.n_sectors) % spec.peer_groups_per_sector;
        data.sectors[i] = "SEC" + std::to_string(s + 1);
        data.peer_groups[i] = data.sectors[i] + "-PG" + std::to_string(p + 1);
        cap[i] = caps(rng);
        rating[i] = unif(rng);
    }
    const auto reviews = month_end_reviews(grid, grid.front(), grid.back());
    std::vector<std::size_t> snap_idx{0};
    for (Date r : reviews) {
        const std::size_t i = *data.prices.date_index(r);
        if (i >= std::size_t(spec.score_lag_days))
            snap_idx.push_back(i - std::size_t(spec.score_lag_days));
    }
    std::sort(snap_idx.begin(), snap_idx.end());
    snap_idx.erase(std::unique(snap_idx.begin(), snap_idx.end()), snap_idx.end());
    std::size_t t_cap = 0;
    for (std::size_t t : snap_idx) {
        for (; t_cap < t; ++t_cap)
            for (std::size_t i = 0; i < n; ++i)
                cap[i] *= 1.0 + data.prices.ret(t_cap + 1, i);
        double total = 0.0;
        for (double c : cap)
            total += c;
        UniverseSnapshot snap;
        snap.review_date = grid[t];
        for (std::size_t i = 0; i < n; ++i) {
            rating[i] = std::clamp(rating[i] + gauss(rng), 0.0, 100.0);
            snap.rows.push_back({ids[i], cap[i] / total, data.sectors[i], data.peer_groups[i], rating[i], {}});
        }
        data.universe.push_back(std::move(snap));
    }
    return data;
}

// ---------------------------------------------------------------------------
// CSV output in the formats read by the panel and backtest loaders

inline std::string features_csv(const RawPanel& panel) {
    std::string out = "date,stock_id";
    for (const auto& s : panel.specs)
        out += "," + s.id;
    out += '\n';
    for (const auto& o : panel.observations) {
        out += o.date.iso() + "," + o.stock_id;
        for (const auto& v : o.features) {
            out += ',';
            if (const auto* x = std::get_if<double>(&v))
                out += detail::format_double(*x);
            else if (const auto* s = std::get_if<std::string>(&v))
                out += *s;
        }
        out += '\n';
    }
    return out;
}

inline std::string returns_csv(const RawPanel& panel) {
    std::string out = "date,stock_id,fwd_excess_return_3m\n";
    for (const auto& o : panel.observations)
        if (o.y)
            out += o.date.iso() + "," + o.stock_id + "," + detail::format_double(*o.y) + "\n";
    return out;
}

inline std::string universe_csv(const Universe& universe) {
    std::string out = "date,stock_id,cap_weight,sector,peer_group,esg_rating\n";
    for (const auto& snap : universe)
        for (const auto& r : snap.rows)
            out += snap.review_date.iso() + "," + r.stock_id + "," + detail::format_double(r.cap_weight) + "," +
                   r.sector + "," + r.peer_group + "," + detail::format_double(r.esg_rating) + "\n";
    return out;
}

inline std::string prices_csv(const PriceTable& prices) {
    std::string out = "date,stock_id,total_return_daily\n";
    // first-day rows carry an empty return so the loaded grid keeps every date
    for (std::size_t t = 0; t < prices.dates().size(); ++t)
        for (std::size_t j = 0; j < prices.stocks().size(); ++j)
            out += prices.dates()[t].iso() + "," + prices.stocks()[j] + "," +
                   detail::format_double(prices.ret(t, j)) + "\n";
    return out;
}

} // namespace rulescreen
