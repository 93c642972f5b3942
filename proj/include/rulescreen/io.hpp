#pragma once

// JSON persistence for discretizers, rule sets, aggregation states and
// synthetic specs, plus report writers.

#include "rulescreen/aggregate.hpp"
#include "rulescreen/panel.hpp"
#include "rulescreen/rulegen.hpp"
#include "rulescreen/synth.hpp"
#include "rulescreen/walk_forward.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

namespace rulescreen {

using Json = nlohmann::ordered_json;

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline Json parse_json(const std::string& text, const std::string& source) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ParseError, source + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Discretizer: {feature_id: {kind, relative_to, edges | categories}}

inline Json to_json(const Discretizer& disc) {
    Json j = Json::object();
    for (std::size_t k = 0; k < disc.specs.size(); ++k) {
        Json f;
        f["kind"] = to_string(disc.specs[k].kind);
        f["relative_to"] = to_string(disc.specs[k].relative_to);
        if (disc.specs[k].kind == FeatureKind::numeric)
            f["edges"] = disc.bins[k].edges;
        else
            f["categories"] = disc.bins[k].categories;
        j[disc.specs[k].id] = std::move(f);
    }
    return j;
}

inline Discretizer discretizer_from_json(const Json& j) {
    if (!j.is_object())
        throw Error(Errc::ParseError, "discretizer must be a JSON object");
    try {
        Discretizer disc;
        for (const auto& [id, f] : j.items()) {
            FeatureSpec spec;
            spec.id = id;
            spec.kind = parse_feature_kind(f.at("kind").get<std::string>());
            if (f.contains("relative_to"))
                spec.relative_to = parse_relative_to(f.at("relative_to").get<std::string>());
            FeatureBins bins;
            bins.kind = spec.kind;
            if (spec.kind == FeatureKind::numeric)
                bins.edges = f.at("edges").get<std::vector<double>>();
            else
                bins.categories = f.at("categories").get<std::vector<std::string>>();
            disc.modalities = std::max<int>(disc.modalities, bins.cardinality());
            disc.specs.push_back(std::move(spec));
            disc.bins.push_back(std::move(bins));
        }
        return disc;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ParseError, std::string("discretizer: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Rule set: [{intervals: [{feature_id, lo, hi}], prediction, activations, learned_at, ...}]

inline Json to_json(const RuleSet& set, const std::vector<FeatureSpec>& specs) {
    Json arr = Json::array();
    for (const auto& r : set.rules) {
        Json j;
        Json ivs = Json::array();
        for (const auto& iv : r.condition.intervals())
            ivs.push_back({{"feature_id", specs.at(iv.feature).id}, {"lo", iv.lo}, {"hi", iv.hi}});
        j["intervals"] = std::move(ivs);
        j["prediction"] = r.prediction;
        j["activations"] = r.activations;
        j["learned_at"] = set.learned_at.iso();
        j["complexity"] = r.complexity;
        j["sign"] = r.sign;
        j["default"] = r.is_default;
        arr.push_back(std::move(j));
    }
    return arr;
}

inline RuleSet ruleset_from_json(const Json& j, const std::vector<FeatureSpec>& specs) {
    if (!j.is_array())
        throw Error(Errc::ParseError, "rule set must be a JSON array");
    std::map<std::string, std::size_t> index;
    for (std::size_t k = 0; k < specs.size(); ++k)
        index[specs[k].id] = k;
    RuleSet set;
    try {
        for (const auto& jr : j) {
            std::vector<Interval> ivs;
            for (const auto& ji : jr.at("intervals")) {
                const auto id = ji.at("feature_id").get<std::string>();
                auto it = index.find(id);
                if (it == index.end())
                    throw Error(Errc::SpecMismatch, "rule uses unknown feature '" + id + "'");
                ivs.push_back({it->second, ji.at("lo").get<std::int32_t>(), ji.at("hi").get<std::int32_t>()});
            }
            Rule r;
            r.condition = Condition(std::move(ivs));
            r.prediction = jr.at("prediction").get<double>();
            r.activations = jr.at("activations").get<std::size_t>();
            r.complexity = jr.value("complexity", int(r.condition.intervals().size()));
            r.sign = jr.value("sign", r.prediction > 0 ? 1 : (r.prediction < 0 ? -1 : 0));
            r.is_default = jr.value("default", r.condition.is_full_space());
            set.learned_at = Date::parse(jr.at("learned_at").get<std::string>());
            set.rules.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ParseError, std::string("rule set: ") + e.what());
    }
    return set;
}

// ---------------------------------------------------------------------------
// Aggregation state checkpoint: {weights, eta, step, epsilon, loss, loss_cap}

inline Json to_json(const AggregationState& s) {
    Json j;
    j["weights"] = s.weights;
    j["eta"] = s.eta;
    j["step"] = s.step;
    j["epsilon"] = s.epsilon;
    j["loss"] = to_string(s.loss);
    j["loss_cap"] = s.loss_cap;
    return j;
}

inline AggregationState state_from_json(const Json& j) {
    try {
        AggregationState s;
        s.weights = j.at("weights").get<std::vector<double>>();
        s.eta = j.at("eta").get<double>();
        s.step = j.at("step").get<std::size_t>();
        s.epsilon = j.at("epsilon").get<double>();
        s.loss = parse_loss_kind(j.value("loss", std::string("squared")));
        s.loss_cap = j.value("loss_cap", 1.0);
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ParseError, std::string("state: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Synthetic spec

inline Json planted_to_json(const std::vector<PlantedRule>& planted) {
    Json arr = Json::array();
    for (const auto& p : planted) {
        Json ivs = Json::array();
        for (const auto& iv : p.condition.intervals())
            ivs.push_back({{"feature", iv.feature}, {"lo", iv.lo}, {"hi", iv.hi}});
        arr.push_back({{"intervals", ivs}, {"effect", p.effect}});
    }
    return arr;
}

inline std::vector<PlantedRule> planted_from_json(const Json& arr) {
    std::vector<PlantedRule> out;
    for (const auto& jp : arr) {
        std::vector<Interval> ivs;
        for (const auto& ji : jp.at("intervals"))
            ivs.push_back({ji.at("feature").get<std::size_t>(), ji.at("lo").get<std::int32_t>(),
                           ji.at("hi").get<std::int32_t>()});
        out.push_back({Condition(std::move(ivs)), jp.at("effect").get<double>()});
    }
    return out;
}

inline Json to_json(const SynthSpec& s) {
    Json j;
    j["n_stocks"] = s.n_stocks;
    j["n_dates"] = s.n_dates;
    j["d"] = s.d;
    j["m"] = s.m;
    j["planted"] = planted_to_json(s.planted);
    j["noise_sigma"] = s.noise_sigma;
    if (s.regime_shift)
        j["regime_shift"] = {{"date", s.regime_shift->date.iso()},
                             {"planted", planted_to_json(s.regime_shift->planted)}};
    j["seed"] = s.seed;
    j["start"] = s.start.iso();
    j["horizon_days"] = s.horizon_days;
    j["stagger"] = s.stagger;
    j["redraw_prob"] = s.redraw_prob;
    j["sector_features"] = s.sector_features;
    j["sector_jitter"] = s.sector_jitter;
    j["correlation"] = s.correlation;
    j["missing_rate"] = s.missing_rate;
    j["n_sectors"] = s.n_sectors;
    j["peer_groups_per_sector"] = s.peer_groups_per_sector;
    j["market_drift"] = s.market_drift;
    j["market_vol"] = s.market_vol;
    j["idio_vol"] = s.idio_vol;
    j["cap_dispersion"] = s.cap_dispersion;
    j["score_lag_days"] = s.score_lag_days;
    j["center_effects"] = s.center_effects;
    return j;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline SynthSpec synth_spec_from_json(const Json& j) {
    if (!j.is_object())
        throw Error(Errc::InconsistentSpec, "synth spec must be a JSON object");
    SynthSpec s;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "regime_shift") {
                RegimeShift shift;
                shift.date = Date::parse(value.at("date").get<std::string>());
                shift.planted = planted_from_json(value.at("planted"));
                s.regime_shift = std::move(shift);
            } else if (key == "planted")
                s.planted = planted_from_json(value);
            else if (key == "n_stocks")
                s.n_stocks = value.get<std::size_t>();
            else if (key == "n_dates")
                s.n_dates = value.get<std::size_t>();
            else if (key == "d")
                s.d = value.get<std::size_t>();
            else if (key == "m")
                s.m = value.get<int>();
            else if (key == "noise_sigma")
                s.noise_sigma = value.get<double>();
            else if (key == "seed")
                s.seed = value.get<std::uint64_t>();
            else if (key == "start")
                s.start = Date::parse(value.get<std::string>());
            else if (key == "horizon_days")
                s.horizon_days = value.get<int>();
            else if (key == "stagger")
                s.stagger = value.get<bool>();
            else if (key == "redraw_prob")
                s.redraw_prob = value.get<double>();
            else if (key == "sector_features")
                s.sector_features = value.get<std::vector<std::size_t>>();
            else if (key == "sector_jitter")
                s.sector_jitter = value.get<double>();
            else if (key == "correlation")
                s.correlation = value.get<double>();
            else if (key == "missing_rate")
                s.missing_rate = value.get<double>();
            else if (key == "n_sectors")
                s.n_sectors = value.get<std::size_t>();
            else if (key == "peer_groups_per_sector")
                s.peer_groups_per_sector = value.get<std::size_t>();
            else if (key == "market_drift")
                s.market_drift = value.get<double>();
            else if (key == "market_vol")
                s.market_vol = value.get<double>();
            else if (key == "idio_vol")
                s.idio_vol = value.get<double>();
            else if (key == "cap_dispersion")
                s.cap_dispersion = value.get<double>();
            else if (key == "score_lag_days")
                s.score_lag_days = value.get<int>();
            else if (key == "center_effects")
                s.center_effects = value.get<bool>();
            else
                throw Error(Errc::InconsistentSpec, "unknown synth spec key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InconsistentSpec, std::string("synth spec: ") + e.what());
    }
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// Reports

inline Json to_json(const KpiReport& k) {
    Json j;
    j["ann_performance"] = k.ann_performance;
    j["ann_volatility"] = k.ann_volatility;
    j["sharpe"] = k.sharpe;
    j["max_drawdown"] = k.max_drawdown;
    j["information_ratio"] = k.information_ratio;
    j["ann_alpha"] = k.ann_alpha;
    Json cal = Json::object();
    for (const auto& [year, v] : k.calendar_excess)
        cal[std::to_string(year)] = v;
    j["calendar_excess"] = std::move(cal);
    return j;
}

inline std::string scores_csv(const std::vector<std::pair<Date, std::vector<ScoreRow>>>& scores) {
    std::string out = "date,stock_id,y_hat,score\n";
    for (const auto& [date, rows] : scores)
        for (const auto& r : rows)
            out += date.iso() + "," + r.stock_id + "," + (r.y_hat ? detail::format_double(*r.y_hat) : "") + "," +
                   std::to_string(r.score) + "\n";
    return out;
}

inline std::string scores_csv(const std::map<Date, std::vector<ScoreRow>>& scores) {
    return scores_csv(std::vector<std::pair<Date, std::vector<ScoreRow>>>(scores.begin(), scores.end()));
}

namespace detail {

inline std::string csv_header(const std::string& first, const std::vector<std::string>& names) {
    std::string out = first;
    for (const auto& n : names)
        out += "," + n;
    return out + "\n";
}

// strategy legs in display order, benchmark first
inline std::vector<std::string> leg_order(const WalkForwardResult& r) {
    std::vector<std::string> names;
    for (const char* n : {kBenchmark, kPositiveMl, kPositiveSectorMatched, kNegativeMl, kBestInClass})
        if (r.reports.count(n))
            names.push_back(n);
    for (const auto& [n, rep] : r.reports)
        if (std::find(names.begin(), names.end(), n) == names.end())
            names.push_back(n);
    return names;
}

} // namespace detail

/// Daily levels of every leg on the shared grid.
inline std::string levels_csv(const WalkForwardResult& r) {
    const auto names = detail::leg_order(r);
    std::string out = detail::csv_header("date", names);
    const auto& dates = r.reports.at(names.front()).series.dates;
    for (std::size_t k = 0; k < dates.size(); ++k) {
        out += dates[k].iso();
        for (const auto& n : names)
            out += "," + detail::format_double(r.reports.at(n).series.values[k]);
        out += "\n";
    }
    return out;
}

/// KPIs per leg and per frozen-rule variant.
inline std::string kpis_json(const WalkForwardResult& r) {
    Json j = Json::object();
    for (const auto& n : detail::leg_order(r))
        j[n] = to_json(r.reports.at(n).kpis);
    for (const auto& [year, rep] : r.learning_y)
        j[learning_y_name(year)] = to_json(rep.kpis);
    return dump(j);
}

/// Calendar-year excess return over the benchmark, one row per year.
inline std::string calendar_csv(const WalkForwardResult& r) {
    auto names = detail::leg_order(r);
    names.erase(std::remove(names.begin(), names.end(), std::string(kBenchmark)), names.end());
    std::string out = detail::csv_header("year,benchmark_return", names);
    const auto bench = calendar_returns(r.reports.at(kBenchmark).series);
    for (const auto& [year, b] : bench) {
        out += std::to_string(year) + "," + detail::format_double(b);
        for (const auto& n : names)
            out += "," + detail::format_double(r.reports.at(n).kpis.calendar_excess.at(year));
        out += "\n";
    }
    return out;
}

/// Calendar excess of the walk-forward positive screen next to each
/// frozen-rule variant; years before a variant starts are left empty.
inline std::string learning_y_csv(const WalkForwardResult& r) {
    std::vector<std::string> names{kPositiveMl};
    for (const auto& [year, rep] : r.learning_y)
        names.push_back(learning_y_name(year));
    std::string out = detail::csv_header("year", names);
    const auto& wf = r.reports.at(kPositiveMl).kpis.calendar_excess;
    for (const auto& [year, v] : wf) {
        out += std::to_string(year) + "," + detail::format_double(v);
        for (const auto& [y, rep] : r.learning_y) {
            out += ",";
            if (auto it = rep.kpis.calendar_excess.find(year); it != rep.kpis.calendar_excess.end())
                out += detail::format_double(it->second);
        }
        out += "\n";
    }
    return out;
}

/// One row per yearly learning.
inline std::string learnings_csv(const WalkForwardResult& r) {
    std::string out = "date,year,training_rows,rules,positive_rules,negative_rules,has_default\n";
    for (const auto& l : r.learnings)
        out += l.date.iso() + "," + std::to_string(l.year) + "," + std::to_string(l.training_rows) + "," +
               std::to_string(l.rules) + "," + std::to_string(l.positive_rules) + "," +
               std::to_string(l.negative_rules) + "," + (l.has_default ? "1" : "0") + "\n";
    return out;
}

/// Every file a backtest run writes, by file name.
inline std::map<std::string, std::string> backtest_files(const WalkForwardResult& r) {
    return {{"levels.csv", levels_csv(r)},       {"kpis.json", kpis_json(r)},
            {"calendar.csv", calendar_csv(r)},   {"learning-y.csv", learning_y_csv(r)},
            {"learnings.csv", learnings_csv(r)}, {"scores.csv", scores_csv(r.scores)}};
}

/// Per-level search statistics of one learning.
inline std::string learn_report_csv(const std::vector<LevelStats>& levels) {
    std::string out = "complexity,candidates,suitable,positive,negative\n";
    for (const auto& l : levels)
        out += std::to_string(l.complexity) + "," + std::to_string(l.candidates) + "," +
               std::to_string(l.suitable) + "," + std::to_string(l.positive) + "," +
               std::to_string(l.negative) + "\n";
    return out;
}

/// 64-bit FNV-1a, used for run manifests.
inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace rulescreen
