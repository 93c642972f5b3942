#pragma once

// Flat `key = value` run configuration.

#include "rulescreen/detail/csv.hpp"
#include "rulescreen/error.hpp"
#include "rulescreen/walk_forward.hpp"

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace rulescreen {

struct RunConfig {
    BacktestConfig backtest;
    std::string features;
    std::string returns;
    std::string universe;
    std::string prices;
    std::uint64_t seed = 1;

    SearchParams& search() { return backtest.model.search; }
    const SearchParams& search() const { return backtest.model.search; }
    ModelConfig& model() { return backtest.model; }
    const ModelConfig& model() const { return backtest.model; }

    void validate() const {
        search().validate();
        if (!(model().learn_fraction > 0.0 && model().learn_fraction < 1.0))
            throw Error(Errc::InvalidConfig, "learn_fraction must lie in (0, 1)");
        if (model().eta && !(*model().eta >= 0.0))
            throw Error(Errc::InvalidConfig, "eta must be non-negative");
        if (model().epsilon && !(*model().epsilon >= 0.0))
            throw Error(Errc::InvalidConfig, "epsilon must be non-negative");
        if (!(model().loss_cap > 0.0))
            throw Error(Errc::InvalidConfig, "loss_cap must be positive");
        if (!(backtest.best_in_class_x >= 0.0 && backtest.best_in_class_x < 1.0))
            throw Error(Errc::InvalidConfig, "best_in_class_x must lie in [0, 1)");
        if (backtest.initial_years < 1 || backtest.horizon_days < 1 || backtest.score_lag_days < 0)
            throw Error(Errc::InvalidConfig, "initial_years, horizon_days must be >= 1 and score_lag_days >= 0");
        if (!(backtest.periods_per_year > 0.0))
            throw Error(Errc::InvalidConfig, "periods_per_year must be positive");
        if (model().workers < 1)
            throw Error(Errc::InvalidConfig, "worker_count must be >= 1");
    }

    std::string to_text() const {
        auto opt = [](const std::optional<double>& v) { return v ? detail::format_double(*v) : std::string("auto"); };
        std::string years;
        for (std::size_t i = 0; i < backtest.learning_years.size(); ++i)
            years += (i ? "," : "") + std::to_string(backtest.learning_years[i]);
        std::ostringstream ss;
        ss << "# rule search\n"
           << "modalities = " << search().modalities << "\n"
           << "alpha = " << detail::format_double(search().alpha) << "\n"
           << "coverage_min = " << detail::format_double(search().coverage_min) << "\n"
           << "coverage_max = " << detail::format_double(search().coverage_max) << "\n"
           << "max_complexity = " << search().max_complexity << "\n"
           << "branching = " << search().branching << "\n"
           << "z_kind = " << to_string(search().z_kind) << "\n"
           << "learn_fraction = " << detail::format_double(model().learn_fraction) << "\n"
           << "# aggregation\n"
           << "eta = " << opt(model().eta) << "\n"
           << "loss = " << to_string(model().loss) << "\n"
           << "loss_cap = " << detail::format_double(model().loss_cap) << "\n"
           << "epsilon = " << opt(model().epsilon) << "\n"
           << "# backtest\n"
           << "best_in_class_x = " << detail::format_double(backtest.best_in_class_x) << "\n"
           << "initial_years = " << backtest.initial_years << "\n"
           << "horizon_days = " << backtest.horizon_days << "\n"
           << "score_lag_days = " << backtest.score_lag_days << "\n"
           << "learning_years = " << years << "\n"
           << "periods_per_year = " << detail::format_double(backtest.periods_per_year) << "\n"
           << "risk_free = " << detail::format_double(backtest.risk_free) << "\n"
           << "# inputs\n"
           << "features = " << features << "\n"
           << "returns = " << returns << "\n"
           << "universe = " << universe << "\n"
           << "prices = " << prices << "\n"
           << "# run\n"
           << "worker_count = " << model().workers << "\n"
           << "seed = " << seed << "\n";
        return ss.str();
    }

    /// Parses config text; relative input paths resolve against `base_dir`.
    static RunConfig parse(const std::string& text, const std::string& base_dir = {}) {
        RunConfig cfg;
        std::istringstream in(text);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos)
                line.erase(hash);
            const auto body = detail::trim(line);
            if (body.empty())
                continue;
            const auto eq = body.find('=');
            if (eq == std::string_view::npos)
                throw Error(Errc::InvalidConfig, "line " + std::to_string(line_no) + ": expected key = value");
            cfg.set(std::string(detail::trim(body.substr(0, eq))), std::string(detail::trim(body.substr(eq + 1))),
                    base_dir);
        }
        cfg.validate();
        return cfg;
    }

    static RunConfig load(const std::string& path) {
        const auto base = std::filesystem::path(path).parent_path().string();
        return parse(detail::read_file(path), base);
    }

    void set(const std::string& key, const std::string& value, const std::string& base_dir = {}) {
        auto num = [&] {
            double v;
            if (!detail::parse_double(value, v))
                throw Error(Errc::InvalidConfig, "key '" + key + "': not a number '" + value + "'");
            return v;
        };
        auto integer = [&] {
            const double v = num();
            if (v != std::floor(v))
                throw Error(Errc::InvalidConfig, "key '" + key + "': not an integer '" + value + "'");
            return static_cast<long long>(v);
        };
        auto opt = [&]() -> std::optional<double> {
            if (value == "auto")
                return std::nullopt;
            return num();
        };
        auto path = [&] {
            if (value.empty() || base_dir.empty() || std::filesystem::path(value).is_absolute())
                return value;
            return (std::filesystem::path(base_dir) / value).string();
        };
        if (key == "modalities")
            search().modalities = int(integer());
        else if (key == "alpha")
            search().alpha = num();
        else if (key == "coverage_min")
            search().coverage_min = num();
        else if (key == "coverage_max")
            search().coverage_max = num();
        else if (key == "max_complexity")
            search().max_complexity = int(integer());
        else if (key == "branching") {
            const auto v = integer();
            if (v < 1)
                throw Error(Errc::InvalidConfig, "key 'branching' must be >= 1");
            search().branching = std::size_t(v);
        } else if (key == "z_kind")
            search().z_kind = parse_z_kind(value);
        else if (key == "learn_fraction")
            model().learn_fraction = num();
        else if (key == "eta")
            model().eta = opt();
        else if (key == "loss")
            model().loss = parse_loss_kind(value);
        else if (key == "loss_cap")
            model().loss_cap = num();
        else if (key == "epsilon")
            model().epsilon = opt();
        else if (key == "best_in_class_x")
            backtest.best_in_class_x = num();
        else if (key == "initial_years")
            backtest.initial_years = int(integer());
        else if (key == "horizon_days")
            backtest.horizon_days = int(integer());
        else if (key == "score_lag_days")
            backtest.score_lag_days = int(integer());
        else if (key == "learning_years") {
            backtest.learning_years.clear();
            std::string item;
            std::istringstream ys(value);
            while (std::getline(ys, item, ',')) {
                const auto t = detail::trim(item);
                if (t.empty())
                    continue;
                double v;
                if (!detail::parse_double(t, v) || v != std::floor(v))
                    throw Error(Errc::InvalidConfig, "key 'learning_years': bad year '" + std::string(t) + "'");
                backtest.learning_years.push_back(int(v));
            }
        } else if (key == "periods_per_year")
            backtest.periods_per_year = num();
        else if (key == "risk_free")
            backtest.risk_free = num();
        else if (key == "features")
            features = path();
        else if (key == "returns")
            returns = path();
        else if (key == "universe")
            universe = path();
        else if (key == "prices")
            prices = path();
        else if (key == "worker_count") {
            const auto v = integer();
            if (v < 1)
                throw Error(Errc::InvalidConfig, "key 'worker_count' must be >= 1");
            model().workers = std::size_t(v);
        } else if (key == "seed")
            seed = std::uint64_t(integer());
        else
            throw Error(Errc::InvalidConfig, "unknown config key '" + key + "'");
    }

    /// RULESCREEN_WORKERS overrides worker_count.
    void apply_environment() {
        if (const char* w = std::getenv("RULESCREEN_WORKERS"); w && *w)
            set("worker_count", w);
    }
};

} // namespace rulescreen
