#pragma once

// Feature panel: loading, quantile discretization and the chronological
// learning / aggregation split.

#include "rulescreen/date.hpp"
#include "rulescreen/detail/csv.hpp"
#include "rulescreen/detail/parallel.hpp"
#include "rulescreen/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

namespace rulescreen {

enum class FeatureKind { numeric, categorical };
enum class RelativeTo { all, sector, peer_group, delta_score };

inline std::string to_string(FeatureKind k) { return k == FeatureKind::numeric ? "numeric" : "categorical"; }

inline FeatureKind parse_feature_kind(std::string_view s) {
    if (s == "numeric")
        return FeatureKind::numeric;
    if (s == "categorical")
        return FeatureKind::categorical;
    throw Error(Errc::ParseError, "unknown feature kind '" + std::string(s) + "'");
}

inline std::string to_string(RelativeTo r) {
    switch (r) {
    case RelativeTo::all: return "all";
    case RelativeTo::sector: return "sector";
    case RelativeTo::peer_group: return "peer_group";
    case RelativeTo::delta_score: return "delta_score";
    }
    return "all";
}

inline RelativeTo parse_relative_to(std::string_view s) {
    if (s == "all")
        return RelativeTo::all;
    if (s == "sector")
        return RelativeTo::sector;
    if (s == "peer_group")
        return RelativeTo::peer_group;
    if (s == "delta_score")
        return RelativeTo::delta_score;
    throw Error(Errc::ParseError, "unknown relative_to '" + std::string(s) + "'");
}

/// relative_to is descriptive metadata; it never changes how a feature is binned.
struct FeatureSpec {
    std::string id;
    FeatureKind kind = FeatureKind::numeric;
    RelativeTo relative_to = RelativeTo::all;

    bool operator==(const FeatureSpec&) const = default;
};

/// Raw cell: missing, a number, or a category label.
using RawValue = std::variant<std::monostate, double, std::string>;

inline bool is_missing(const RawValue& v) { return std::holds_alternative<std::monostate>(v); }

struct RawObservation {
    Date date;
    std::string stock_id;
    std::vector<RawValue> features;
    std::optional<double> y; ///< 3-month forward excess return, decimal
};

/// Code of a missing feature value. It lies outside every feature's code
/// set, so no interval ever contains it.
inline constexpr std::int32_t kMissingCode = -1;

struct FeatureBins {
    std::vector<double> edges;           ///< numeric: ascending cut points
    std::vector<std::string> categories; ///< categorical: sorted labels

    FeatureKind kind = FeatureKind::numeric;

    std::int32_t cardinality() const {
        return kind == FeatureKind::numeric ? std::int32_t(edges.size() + 1) : std::int32_t(categories.size());
    }

    /// Bins are right-closed: a value equal to a cut point falls in the lower
    /// bin. Values beyond the fitted range clamp to the extreme modalities.
    std::int32_t code(const RawValue& v) const {
        if (is_missing(v))
            return kMissingCode;
        if (kind == FeatureKind::numeric) {
            const double* x = std::get_if<double>(&v);
            if (!x)
                throw Error(Errc::SpecMismatch, "category label in a numeric feature");
            if (std::isnan(*x))
                return kMissingCode;
            return std::int32_t(std::lower_bound(edges.begin(), edges.end(), *x) - edges.begin());
        }
        const std::string* label = std::get_if<std::string>(&v);
        std::string tmp;
        if (!label) {
            tmp = detail::format_double(std::get<double>(v));
            label = &tmp;
        }
        const auto it = std::lower_bound(categories.begin(), categories.end(), *label);
        if (it == categories.end() || *it != *label)
            return kMissingCode; // unseen category
        return std::int32_t(it - categories.begin());
    }
};

/// Fitted per-feature binning, reusable for out-of-sample data.
struct Discretizer {
    std::vector<FeatureSpec> specs;
    int modalities = 0;
    std::vector<FeatureBins> bins;

    std::size_t dims() const { return specs.size(); }

    std::vector<std::int32_t> cardinalities() const {
        std::vector<std::int32_t> out;
        out.reserve(bins.size());
        for (const auto& b : bins)
            out.push_back(b.cardinality());
        return out;
    }

    std::vector<std::int32_t> encode(std::span<const RawValue> row) const {
        if (row.size() != bins.size())
            throw Error(Errc::SpecMismatch, "observation has " + std::to_string(row.size()) +
                                                " features, discretizer expects " + std::to_string(bins.size()));
        std::vector<std::int32_t> out(row.size());
        for (std::size_t k = 0; k < row.size(); ++k)
            out[k] = bins[k].code(row[k]);
        return out;
    }
};

/// The k/m empirical quantile: smallest sample value whose empirical CDF is >= k/m.
/// `sorted` must be ascending and non-empty.
inline double empirical_quantile(std::span<const double> sorted, std::size_t k, std::size_t m) {
    const std::size_t n = sorted.size();
    std::size_t rank = (k * n + m - 1) / m; // ceil(k n / m)
    rank = std::clamp<std::size_t>(rank, 1, n);
    return sorted[rank - 1];
}

inline Discretizer fit_discretizer(std::span<const RawObservation> raw, const std::vector<FeatureSpec>& specs, int m,
                                   std::size_t workers = 1) {
    if (m < 2)
        throw Error(Errc::NonPositiveModalities, "modalities must be >= 2, got " + std::to_string(m));
    if (raw.empty())
        throw Error(Errc::EmptyPanel, "cannot fit a discretizer on an empty panel");
    {
        std::set<std::string> ids;
        for (const auto& s : specs)
            if (!ids.insert(s.id).second)
                throw Error(Errc::SpecMismatch, "duplicate feature id '" + s.id + "'");
    }
    for (const auto& obs : raw)
        if (obs.features.size() != specs.size())
            throw Error(Errc::SpecMismatch, "observation " + obs.stock_id + "@" + obs.date.iso() + " has " +
                                                std::to_string(obs.features.size()) + " features, expected " +
                                                std::to_string(specs.size()));

    Discretizer disc;
    disc.specs = specs;
    disc.modalities = m;
    disc.bins.resize(specs.size());
    detail::parallel_for(specs.size(), workers, [&](std::size_t k) {
        FeatureBins& bins = disc.bins[k];
        bins.kind = specs[k].kind;
        if (specs[k].kind == FeatureKind::categorical) {
            std::set<std::string> labels;
            for (const auto& obs : raw) {
                const auto& v = obs.features[k];
                if (const auto* s = std::get_if<std::string>(&v))
                    labels.insert(*s);
                else if (const auto* x = std::get_if<double>(&v))
                    labels.insert(detail::format_double(*x));
            }
            bins.categories.assign(labels.begin(), labels.end());
            return;
        }
        std::vector<double> values;
        values.reserve(raw.size());
        for (const auto& obs : raw) {
            const auto& v = obs.features[k];
            if (is_missing(v))
                continue;
            const double* x = std::get_if<double>(&v);
            if (!x)
                throw Error(Errc::SpecMismatch, "feature '" + specs[k].id + "' is numeric but holds a label");
            if (!std::isnan(*x))
                values.push_back(*x);
        }
        std::sort(values.begin(), values.end());
        std::vector<double> distinct = values;
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        if (distinct.size() <= std::size_t(m)) {
            // identity binning: one modality per distinct value
            if (!distinct.empty())
                bins.edges.assign(distinct.begin(), distinct.end() - 1);
            return;
        }
        for (std::size_t q = 1; q < std::size_t(m); ++q) {
            const double edge = empirical_quantile(values, q, std::size_t(m));
            if (bins.edges.empty() || edge > bins.edges.back())
                bins.edges.push_back(edge);
        }
    });
    return disc;
}

/// Immutable discretized panel, sorted by (date, stock_id).
class DiscretizedPanel {
public:
    DiscretizedPanel() = default;

    DiscretizedPanel(Discretizer disc, std::vector<Date> dates, std::vector<std::string> stocks,
                     std::vector<std::int32_t> codes, std::vector<double> y)
        : disc_(std::move(disc)), dates_(std::move(dates)), stocks_(std::move(stocks)), codes_(std::move(codes)),
          y_(std::move(y)), cards_(disc_.cardinalities()) {}

    const Discretizer& discretizer() const { return disc_; }
    const std::vector<FeatureSpec>& specs() const { return disc_.specs; }
    const std::vector<std::int32_t>& cardinalities() const { return cards_; }
    std::size_t size() const { return dates_.size(); }
    std::size_t dims() const { return disc_.dims(); }
    bool empty() const { return dates_.empty(); }

    Date date(std::size_t i) const { return dates_[i]; }
    const std::string& stock_id(std::size_t i) const { return stocks_[i]; }
    std::span<const std::int32_t> codes(std::size_t i) const { return {codes_.data() + i * dims(), dims()}; }
    std::int32_t code(std::size_t i, std::size_t k) const { return codes_[i * dims() + k]; }
    /// NaN when the label is not observed.
    double y(std::size_t i) const { return y_[i]; }
    bool has_y(std::size_t i) const { return !std::isnan(y_[i]); }

    bool operator==(const DiscretizedPanel& o) const {
        return disc_.modalities == o.disc_.modalities && disc_.specs == o.disc_.specs && dates_ == o.dates_ &&
               stocks_ == o.stocks_ && codes_ == o.codes_ &&
               std::equal(y_.begin(), y_.end(), o.y_.begin(), o.y_.end(), [](double a, double b) {
                   return (std::isnan(a) && std::isnan(b)) || a == b;
               });
    }

private:
    Discretizer disc_;
    std::vector<Date> dates_;
    std::vector<std::string> stocks_;
    std::vector<std::int32_t> codes_; // row-major, size() x dims()
    std::vector<double> y_;
    std::vector<std::int32_t> cards_;
};

/// Canonical observation order: by date, then stock id; ties keep input order.
inline std::vector<std::size_t> chronological_order(std::span<const RawObservation> raw) {
    std::vector<std::size_t> order(raw.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(raw[a].date, raw[a].stock_id) < std::tie(raw[b].date, raw[b].stock_id);
    });
    return order;
}

inline DiscretizedPanel apply_discretizer(std::span<const RawObservation> raw, const Discretizer& disc) {
    const auto order = chronological_order(raw);
    const std::size_t d = disc.dims();
    std::vector<Date> dates;
    std::vector<std::string> stocks;
    std::vector<std::int32_t> codes;
    std::vector<double> y;
    dates.reserve(raw.size());
    stocks.reserve(raw.size());
    codes.reserve(raw.size() * d);
    y.reserve(raw.size());
    for (std::size_t i : order) {
        const auto& obs = raw[i];
        if (obs.features.size() != d)
            throw Error(Errc::SpecMismatch, "observation " + obs.stock_id + "@" + obs.date.iso() + " has " +
                                                std::to_string(obs.features.size()) + " features, expected " +
                                                std::to_string(d));
        dates.push_back(obs.date);
        stocks.push_back(obs.stock_id);
        for (std::size_t k = 0; k < d; ++k)
            codes.push_back(disc.bins[k].code(obs.features[k]));
        if (obs.y && !std::isfinite(*obs.y))
            throw Error(Errc::ParseError, "non-finite return for " + obs.stock_id + "@" + obs.date.iso());
        y.push_back(obs.y ? *obs.y : std::numeric_limits<double>::quiet_NaN());
    }
    return DiscretizedPanel(disc, std::move(dates), std::move(stocks), std::move(codes), std::move(y));
}

/// Contiguous row range [begin, end) of a panel.
struct PanelView {
    const DiscretizedPanel* panel = nullptr;
    std::size_t begin = 0;
    std::size_t end = 0;

    PanelView() = default;
    PanelView(const DiscretizedPanel& p) : panel(&p), begin(0), end(p.size()) {}
    PanelView(const DiscretizedPanel& p, std::size_t b, std::size_t e) : panel(&p), begin(b), end(e) {}

    std::size_t size() const { return end - begin; }
    bool empty() const { return begin == end; }
    std::size_t dims() const { return panel->dims(); }
    std::span<const std::int32_t> codes(std::size_t i) const { return panel->codes(begin + i); }
    double y(std::size_t i) const { return panel->y(begin + i); }
    bool has_y(std::size_t i) const { return panel->has_y(begin + i); }
    Date date(std::size_t i) const { return panel->date(begin + i); }
    const std::string& stock_id(std::size_t i) const { return panel->stock_id(begin + i); }
};

struct TrainSplit {
    PanelView learn;     ///< first n observations
    PanelView aggregate; ///< remaining observations
    bool aggregation_not_larger = false; ///< set when t <= n; the aggregation set is meant to dominate
};

inline TrainSplit split(const DiscretizedPanel& panel, std::size_t n) {
    if (n == 0 || n >= panel.size())
        throw Error(Errc::BadSplitPoint, "split point " + std::to_string(n) + " not in (0, " +
                                             std::to_string(panel.size()) + ")");
    TrainSplit s;
    s.learn = PanelView(panel, 0, n);
    s.aggregate = PanelView(panel, n, panel.size());
    s.aggregation_not_larger = s.aggregate.size() <= s.learn.size();
    return s;
}

/// Split with every observation dated on or before `boundary` in the learning set.
inline TrainSplit split_at(const DiscretizedPanel& panel, Date boundary) {
    std::size_t n = 0;
    while (n < panel.size() && panel.date(n) <= boundary)
        ++n;
    return split(panel, n);
}

// ---------------------------------------------------------------------------
// CSV loading

struct RawPanel {
    std::vector<FeatureSpec> specs;
    std::vector<RawObservation> observations;
};

/// Reads features.csv (`date,stock_id,<feature>...`) and optionally
/// returns.csv (`date,stock_id,fwd_excess_return_3m`). A column is numeric
/// when every non-empty cell parses as a number.
inline RawPanel load_raw_panel(const std::string& features_path, const std::string& returns_path = {}) {
    const auto table = detail::read_csv(features_path);
    if (table.header.size() < 2 || table.header[0] != "date" || table.header[1] != "stock_id")
        throw Error(Errc::ParseError, features_path + ": header must start with date,stock_id");
    RawPanel out;
    const std::size_t d = table.header.size() - 2;
    for (std::size_t k = 0; k < d; ++k) {
        FeatureSpec spec;
        spec.id = table.header[k + 2];
        spec.kind = FeatureKind::numeric;
        for (const auto& row : table.rows) {
            double v;
            if (!row[k + 2].empty() && !detail::parse_double(row[k + 2], v)) {
                spec.kind = FeatureKind::categorical;
                break;
            }
        }
        out.specs.push_back(std::move(spec));
    }
    std::map<std::pair<Date, std::string>, double> returns;
    if (!returns_path.empty()) {
        const auto rt = detail::read_csv(returns_path);
        const auto cd = rt.column("date", returns_path);
        const auto cs = rt.column("stock_id", returns_path);
        const auto cy = rt.column("fwd_excess_return_3m", returns_path);
        for (const auto& row : rt.rows) {
            if (row[cy].empty())
                continue;
            const double y = detail::to_double(row[cy], returns_path);
            if (!std::isfinite(y))
                throw Error(Errc::ParseError, returns_path + ": non-finite return");
            returns[{Date::parse(row[cd]), row[cs]}] = y;
        }
    }
    out.observations.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        RawObservation obs;
        obs.date = Date::parse(row[0]);
        obs.stock_id = row[1];
        obs.features.reserve(d);
        for (std::size_t k = 0; k < d; ++k) {
            const auto& cell = row[k + 2];
            if (cell.empty())
                obs.features.emplace_back(std::monostate{});
            else if (out.specs[k].kind == FeatureKind::numeric)
                obs.features.emplace_back(detail::to_double(cell, features_path));
            else
                obs.features.emplace_back(cell);
        }
        if (auto it = returns.find({obs.date, obs.stock_id}); it != returns.end())
            obs.y = it->second;
        out.observations.push_back(std::move(obs));
    }
    if (out.observations.empty())
        throw Error(Errc::EmptyPanel, features_path + ": no observations");
    return out;
}

} // namespace rulescreen
