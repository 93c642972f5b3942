// rulescreen: command-line front end.
//
// Exit codes: 0 success, 1 invalid configuration or arguments, 2 data error.

#include "rulescreen/rulescreen.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace rulescreen;

namespace {

struct Outputs {
    fs::path dir;
    std::map<std::string, std::string> hashes;

    void write(const std::string& name, const std::string& body) {
        detail::write_file((dir / name).string(), body);
        hashes[name] = hex64(fnv1a(body));
    }

    // content hashes only, so identical runs give identical manifests
    void manifest(const std::string& command, const std::string& config_text) {
        Json j;
        j["command"] = command;
        if (!config_text.empty())
            j["config_fnv1a"] = hex64(fnv1a(config_text));
        j["outputs"] = hashes;
        detail::write_file((dir / "manifest.json").string(), dump(j));
    }
};

Outputs open_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw Error(Errc::IoError, "cannot create " + dir + ": " + ec.message());
    return {fs::path(dir), {}};
}

std::optional<Date> parse_date_opt(const std::string& s) {
    if (s.empty())
        return std::nullopt;
    return Date::parse(s);
}

// Shared by learn and backtest: config file, then --set overrides, then the environment.
struct ConfigArgs {
    std::string path;
    std::vector<std::string> sets;
    bool print = false;

    void add(CLI::App* cmd) {
        cmd->add_option("--config", path, "run configuration (key = value)");
        cmd->add_option("--set", sets, "override one key, e.g. --set alpha=0.01");
        cmd->add_flag("--print-config", print, "print the effective configuration and exit");
    }

    RunConfig load() const {
        RunConfig cfg = path.empty() ? RunConfig{} : RunConfig::load(path);
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw Error(Errc::InvalidConfig, "--set expects key=value, got '" + kv + "'");
            cfg.set(std::string(detail::trim(kv.substr(0, eq))), std::string(detail::trim(kv.substr(eq + 1))));
        }
        cfg.apply_environment();
        cfg.validate();
        return cfg;
    }
};

RawPanel load_panel(const std::string& features, const std::string& returns) {
    if (features.empty())
        throw Error(Errc::InvalidArgument, "no features file: pass --panel or set 'features' in the config");
    return load_raw_panel(features, returns);
}

// Explicit file paths win over the files inside --model.
Model load_model(const std::string& dir, std::string rules, std::string state, std::string disc) {
    auto pick = [&](std::string& path, const char* name) {
        if (path.empty()) {
            if (dir.empty())
                throw Error(Errc::InvalidArgument, std::string("score needs --model or --") +
                                                       std::string(name).substr(0, std::string(name).find('.')));
            path = (fs::path(dir) / name).string();
        }
    };
    pick(rules, "rules.json");
    pick(state, "state.json");
    pick(disc, "discretizer.json");
    auto read = [](const std::string& p) { return parse_json(detail::read_file(p), p); };
    Model m;
    m.discretizer = discretizer_from_json(read(disc));
    m.rules = ruleset_from_json(read(rules), m.discretizer.specs);
    m.state = state_from_json(read(state));
    if (m.state.weights.size() != m.rules.size())
        throw Error(Errc::SpecMismatch, "state.json holds " + std::to_string(m.state.weights.size()) +
                                            " weights for " + std::to_string(m.rules.size()) + " rules");
    return m;
}

std::string codes_csv(const DiscretizedPanel& p) {
    std::string out = "date,stock_id";
    for (const auto& s : p.specs())
        out += "," + s.id;
    out += '\n';
    for (std::size_t i = 0; i < p.size(); ++i) {
        out += p.date(i).iso() + "," + p.stock_id(i);
        for (std::size_t k = 0; k < p.dims(); ++k) {
            const auto c = p.code(i, k);
            out += ",";
            if (c != kMissingCode)
                out += std::to_string(c);
        }
        out += '\n';
    }
    return out;
}

std::string report_text(const Json& kpis) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-26s %9s %9s %8s %9s %8s %9s\n", "portfolio", "ann.perf", "ann.vol", "sharpe",
                  "max.dd", "IR", "alpha");
    out += line;
    for (const auto& [name, k] : kpis.items()) {
        std::snprintf(line, sizeof line, "%-26s %8.2f%% %8.2f%% %8.2f %8.2f%% %8.2f %8.2f%%\n", name.c_str(),
                      100 * k.at("ann_performance").get<double>(), 100 * k.at("ann_volatility").get<double>(),
                      k.at("sharpe").get<double>(), 100 * k.at("max_drawdown").get<double>(),
                      k.at("information_ratio").get<double>(), 100 * k.at("ann_alpha").get<double>());
        out += line;
    }
    out += "\ncalendar excess return vs benchmark\n";
    std::vector<std::string> years;
    for (const auto& [name, k] : kpis.items())
        for (const auto& [y, v] : k.at("calendar_excess").items())
            if (std::find(years.begin(), years.end(), y) == years.end())
                years.push_back(y);
    std::sort(years.begin(), years.end());
    std::snprintf(line, sizeof line, "%-26s", "portfolio");
    out += line;
    for (const auto& y : years)
        out += "   " + y;
    out += '\n';
    for (const auto& [name, k] : kpis.items()) {
        if (name == kBenchmark)
            continue;
        std::snprintf(line, sizeof line, "%-26s", name.c_str());
        out += line;
        const auto& cal = k.at("calendar_excess");
        for (const auto& y : years) {
            if (cal.contains(y))
                std::snprintf(line, sizeof line, " %+6.2f", 100 * cal.at(y).get<double>());
            else
                std::snprintf(line, sizeof line, " %6s", "");
            out += line;
        }
        out += '\n';
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rule-based ESG-feature stock screening: rule learning, aggregation and walk-forward backtests"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "write a synthetic planted-rule dataset");
    std::string synth_spec, synth_out;
    std::optional<std::uint64_t> synth_seed;
    std::optional<std::size_t> synth_stocks;
    synth->add_option("--spec", synth_spec, "synthetic spec JSON (default: the desk-scale regime-shift panel)");
    synth->add_option("--seed", synth_seed, "override the spec seed");
    synth->add_option("--stocks", synth_stocks, "override the number of stocks");
    synth->add_option("--out", synth_out, "output directory")->required();

    // discretize
    auto* disc = app.add_subcommand("discretize", "fit quantile bins and write the coded panel");
    std::string disc_panel, disc_returns, disc_out, disc_until;
    std::optional<int> disc_m;
    ConfigArgs disc_cfg;
    disc_cfg.add(disc);
    disc->add_option("--panel", disc_panel, "features CSV (default: config 'features')");
    disc->add_option("--returns", disc_returns, "returns CSV (default: config 'returns')");
    disc->add_option("--modalities,-m", disc_m, "number of modalities (default: config 'modalities')");
    disc->add_option("--until", disc_until, "fit bins on observations dated on or before this date");
    disc->add_option("--out", disc_out, "output directory")->required();

    // learn
    auto* learn = app.add_subcommand("learn", "learn a rule set and aggregation state");
    std::string learn_panel, learn_returns, learn_out, learn_until;
    ConfigArgs learn_cfg;
    learn_cfg.add(learn);
    learn->add_option("--panel", learn_panel, "features CSV (default: config 'features')");
    learn->add_option("--returns", learn_returns, "returns CSV (default: config 'returns')");
    learn->add_option("--until", learn_until, "learn on labels resolved on or before this date");
    learn->add_option("--out", learn_out, "output directory");

    // score
    auto* sc = app.add_subcommand("score", "score stocks with a learned model");
    std::string sc_model, sc_rules, sc_state, sc_disc, sc_panel, sc_asof, sc_out;
    sc->add_option("--model", sc_model, "directory holding rules.json, state.json and discretizer.json");
    sc->add_option("--rules", sc_rules, "rules.json (default: inside --model)");
    sc->add_option("--state", sc_state, "state.json (default: inside --model)");
    sc->add_option("--discretizer", sc_disc, "discretizer.json (default: inside --model)");
    sc->add_option("--panel", sc_panel, "features CSV")->required();
    sc->add_option("--asof", sc_asof, "score date; each stock's latest observation on or before it (default: last date)");
    sc->add_option("--out", sc_out, "scores CSV (default: stdout)");

    // backtest
    auto* bt = app.add_subcommand("backtest", "walk-forward backtest of every portfolio leg");
    std::string bt_out;
    ConfigArgs bt_cfg;
    bt_cfg.add(bt);
    bt->add_option("--out", bt_out, "output directory");

    // report
    auto* rep = app.add_subcommand("report", "print a KPI table from a backtest directory");
    std::string rep_dir, rep_out;
    rep->add_option("--dir", rep_dir, "backtest output directory")->required();
    rep->add_option("--out", rep_out, "also write the table to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*synth) {
            SynthSpec spec = desk_scale_spec();
            if (!synth_spec.empty())
                spec = synth_spec_from_json(parse_json(detail::read_file(synth_spec), synth_spec));
            if (synth_seed)
                spec.seed = *synth_seed;
            if (synth_stocks)
                spec.n_stocks = *synth_stocks;
            const auto data = generate(spec);
            auto out = open_dir(synth_out);
            out.write("features.csv", features_csv(data.panel));
            out.write("returns.csv", returns_csv(data.panel));
            out.write("universe.csv", universe_csv(data.universe));
            out.write("prices.csv", prices_csv(data.prices));
            out.write("spec.json", dump(to_json(spec)));
            RunConfig cfg;
            cfg.features = "features.csv";
            cfg.returns = "returns.csv";
            cfg.universe = "universe.csv";
            cfg.prices = "prices.csv";
            cfg.seed = spec.seed;
            const int first = spec.start.year() + cfg.backtest.initial_years - 1;
            const int last = business_days(spec.start, spec.n_dates).back().year();
            for (int y = first; y <= std::min(first + 3, last - 2); ++y)
                cfg.backtest.learning_years.push_back(y);
            out.write("run.cfg", cfg.to_text());
            out.manifest("synth", "");
            std::printf("wrote %zu observations, %zu stocks, %zu dates to %s\n", data.panel.observations.size(),
                        spec.n_stocks, spec.n_dates, synth_out.c_str());
        } else if (*disc) {
            const auto cfg = disc_cfg.load();
            if (disc_cfg.print) {
                std::cout << cfg.to_text();
                return 0;
            }
            const int m = disc_m.value_or(cfg.search().modalities);
            const auto panel = load_panel(disc_panel.empty() ? cfg.features : disc_panel,
                                          disc_returns.empty() ? cfg.returns : disc_returns);
            std::vector<RawObservation> fit;
            const auto until = parse_date_opt(disc_until);
            for (const auto& o : panel.observations)
                if (!until || o.date <= *until)
                    fit.push_back(o);
            const auto d = fit_discretizer(fit, panel.specs, m, cfg.model().workers);
            auto out = open_dir(disc_out);
            out.write("discretizer.json", dump(to_json(d)));
            out.write("codes.csv", codes_csv(apply_discretizer(panel.observations, d)));
            out.manifest("discretize", cfg.to_text());
        } else if (*learn) {
            auto cfg = learn_cfg.load();
            if (learn_cfg.print) {
                std::cout << cfg.to_text();
                return 0;
            }
            if (learn_out.empty())
                throw Error(Errc::InvalidArgument, "learn needs --out");
            const auto panel = load_panel(learn_panel.empty() ? cfg.features : learn_panel,
                                          learn_returns.empty() ? cfg.returns : learn_returns);
            auto until = parse_date_opt(learn_until);
            std::vector<RawObservation> rows;
            Date last;
            // only labels that have resolved by --until
            for (const auto& o : panel.observations)
                if (o.y && (!until || add_business_days(o.date, cfg.backtest.horizon_days) <= *until)) {
                    rows.push_back(o);
                    last = std::max(last, o.date);
                }
            if (rows.empty())
                throw Error(Errc::EmptyLearningSet, "no labelled observations to learn from");
            const auto model = learn_model(rows, panel.specs, cfg.model(), until.value_or(last));
            auto out = open_dir(learn_out);
            out.write("rules.json", dump(to_json(model.rules, model.discretizer.specs)));
            out.write("discretizer.json", dump(to_json(model.discretizer)));
            out.write("state.json", dump(to_json(model.state)));
            out.write("learn-report.csv", learn_report_csv(model.levels));
            out.manifest("learn", cfg.to_text());
            std::printf("%zu rules (%s default) from %zu learning and %zu aggregation rows\n", model.rules.size(),
                        model.rules.has_default() ? "with" : "no", model.learn_rows, model.aggregate_rows);
        } else if (*sc) {
            const auto model = load_model(sc_model, sc_rules, sc_state, sc_disc);
            const auto panel = load_raw_panel(sc_panel);
            if (panel.specs.size() != model.discretizer.specs.size())
                throw Error(Errc::SpecMismatch, "panel has " + std::to_string(panel.specs.size()) +
                                                    " features, the model expects " +
                                                    std::to_string(model.discretizer.specs.size()));
            for (std::size_t k = 0; k < panel.specs.size(); ++k)
                if (panel.specs[k].id != model.discretizer.specs[k].id)
                    throw Error(Errc::SpecMismatch, "feature column " + std::to_string(k) + " is '" +
                                                        panel.specs[k].id + "', the model expects '" +
                                                        model.discretizer.specs[k].id + "'");
            Date asof;
            for (const auto& o : panel.observations)
                asof = std::max(asof, o.date);
            if (auto a = parse_date_opt(sc_asof))
                asof = *a;
            std::map<std::string, const RawObservation*> latest;
            for (const auto& o : panel.observations)
                if (o.date <= asof) {
                    auto& slot = latest[o.stock_id];
                    if (!slot || slot->date < o.date)
                        slot = &o;
                }
            if (latest.empty())
                throw Error(Errc::EmptyPanel, "no observations on or before " + asof.iso());
            std::vector<ScoreRow> rows;
            for (const auto& [id, o] : latest) {
                ScoreRow r{id, model.predict_raw(o->features), 0};
                r.score = r.y_hat ? score(*r.y_hat, model.state.epsilon) : 0;
                rows.push_back(std::move(r));
            }
            const auto text = scores_csv(std::vector<std::pair<Date, std::vector<ScoreRow>>>{{asof, rows}});
            if (sc_out.empty())
                std::cout << text;
            else
                detail::write_file(sc_out, text);
        } else if (*bt) {
            const auto cfg = bt_cfg.load();
            if (bt_cfg.print) {
                std::cout << cfg.to_text();
                return 0;
            }
            if (bt_out.empty())
                throw Error(Errc::InvalidArgument, "backtest needs --out");
            for (const auto* key : {&cfg.features, &cfg.returns, &cfg.universe, &cfg.prices})
                if (key->empty())
                    throw Error(Errc::InvalidConfig, "backtest needs features, returns, universe and prices in the config");
            const auto panel = load_raw_panel(cfg.features, cfg.returns);
            const auto universe = load_universe_csv(cfg.universe);
            const auto prices = PriceTable::load_csv(cfg.prices);
            const auto result = walk_forward(panel, universe, prices, cfg.backtest);
            auto out = open_dir(bt_out);
            for (const auto& [name, body] : backtest_files(result))
                out.write(name, body);
            out.manifest("backtest", cfg.to_text());
            std::cout << report_text(parse_json(kpis_json(result), "kpis.json"));
        } else if (*rep) {
            const auto path = (fs::path(rep_dir) / "kpis.json").string();
            const auto text = report_text(parse_json(detail::read_file(path), path));
            std::cout << text;
            if (!rep_out.empty())
                detail::write_file(rep_out, text);
        }
    } catch (const Error& e) {
        std::cerr << "rulescreen: " << e.what() << "\n";
        return is_validation_error(e.code()) ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "rulescreen: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
