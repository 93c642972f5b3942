#include "rulescreen/rulescreen.hpp"
#include "support/errc.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

using namespace rulescreen;

namespace {

SynthSpec small_spec(std::uint64_t seed = 1) {
    auto s = desk_scale_spec(seed);
    s.n_stocks = 150;
    return s;
}

struct Run {
    SynthData data;
    BacktestConfig cfg;
    WalkForwardResult result;
};

const Run& shared_run() {
    static const Run run = [] {
        Run r;
        r.data = generate(small_spec());
        r.cfg.learning_years = {2012, 2013};
        r.result = walk_forward(r.data.panel, r.data.universe, r.data.prices, r.cfg);
        return r;
    }();
    return run;
}

} // namespace

TEST(WalkForward, EmitsEveryLeg) {
    const auto& r = shared_run().result;
    for (const char* n : {kBenchmark, kPositiveMl, kPositiveSectorMatched, kNegativeMl, kBestInClass})
        EXPECT_TRUE(r.reports.count(n)) << n;
    EXPECT_EQ(r.learning_y.size(), 2u);
}

TEST(WalkForward, OutOfSampleStartsInTheFourthYear) {
    const auto& r = shared_run().result;
    const auto& s = r.reports.at(kPositiveMl).series;
    EXPECT_EQ(s.dates.front().year(), 2012); // base date: last trading day of the initial window
    EXPECT_EQ(s.dates[1].year(), 2013);
    EXPECT_EQ(s.dates[1].month(), 1u);
    ASSERT_FALSE(r.learnings.empty());
    EXPECT_EQ(r.learnings.front().year, 2012);
    // one learning per completed year
    EXPECT_EQ(r.learnings.back().year, 2017);
    for (std::size_t i = 1; i < r.learnings.size(); ++i)
        EXPECT_GT(r.learnings[i].training_rows, r.learnings[i - 1].training_rows);
}

TEST(WalkForward, ScoresAreTakenFourBusinessDaysBeforeReviews) {
    const auto& run = shared_run();
    const auto& s = run.result.reports.at(kPositiveMl).series;
    for (const auto& [review, holdings] : s.weights_history) {
        if (review == s.dates.back())
            continue;
        const Date expected = add_business_days(review, -4);
        EXPECT_TRUE(run.result.scores.count(expected)) << review.iso();
    }
}

TEST(WalkForward, WeightsAreOnTheSimplex) {
    const auto& r = shared_run().result;
    for (const auto& [name, rep] : r.reports)
        for (const auto& [d, h] : rep.series.weights_history) {
            double total = 0.0;
            for (const auto& [id, w] : h) {
                EXPECT_GE(w, 0.0);
                total += w;
            }
            EXPECT_NEAR(total, 1.0, 1e-9) << name << " " << d.iso();
        }
}

TEST(WalkForward, LegsNeverShareAStock) {
    const auto& r = shared_run().result;
    const auto& pos = r.reports.at(kPositiveMl).series.weights_history;
    const auto& neg = r.reports.at(kNegativeMl).series.weights_history;
    ASSERT_EQ(pos.size(), neg.size());
    const std::size_t everyone = shared_run().data.universe.front().rows.size();
    for (std::size_t k = 0; k < pos.size(); ++k) {
        // an empty screen falls back to the benchmark and then overlaps by design
        if (pos[k].second.size() == everyone || neg[k].second.size() == everyone)
            continue;
        std::set<std::string> held;
        for (const auto& [id, w] : pos[k].second)
            held.insert(id);
        for (const auto& [id, w] : neg[k].second)
            EXPECT_FALSE(held.count(id)) << id << " on " << pos[k].first.iso();
    }
}

TEST(WalkForward, PositiveBeatsNegativeOnPlantedPanel) {
    const auto& r = shared_run().result;
    EXPECT_GT(r.reports.at(kPositiveMl).kpis.ann_performance, r.reports.at(kNegativeMl).kpis.ann_performance);
}

TEST(WalkForward, ZeroThresholdBestInClassIsTheBenchmark) {
    const auto& run = shared_run();
    auto cfg = run.cfg;
    cfg.best_in_class_x = 0.0;
    cfg.learning_years.clear();
    const auto r = walk_forward(run.data.panel, run.data.universe, run.data.prices, cfg);
    EXPECT_EQ(r.reports.at(kBestInClass).series.values, r.reports.at(kBenchmark).series.values);
}

TEST(LearningY, FirstYearMatchesWalkForwardBitwise) {
    const auto& r = shared_run().result;
    const auto& wf = r.reports.at(kPositiveMl).series;
    for (const auto& [year, rep] : r.learning_y) {
        const auto& ly = rep.series;
        // the frozen rules equal the live ones until the next learning
        const Date next_review = ly.weights_history.at(12).first;
        EXPECT_EQ(next_review.year(), year + 1);
        EXPECT_EQ(next_review.month(), 12u);
        std::size_t k0 = std::size_t(std::find(wf.dates.begin(), wf.dates.end(), ly.dates.front()) - wf.dates.begin());
        ASSERT_LT(k0, wf.dates.size());
        std::size_t compared = 0;
        for (std::size_t k = 1; k < ly.dates.size() && ly.dates[k] <= next_review; ++k, ++compared) {
            ASSERT_EQ(ly.dates[k], wf.dates[k0 + k]);
            EXPECT_EQ(ly.returns[k], wf.returns[k0 + k]) << ly.dates[k].iso();
        }
        EXPECT_GT(compared, 240u);
    }
}

TEST(LearningY, StandaloneMatchesTheBatchedRun) {
    const auto& run = shared_run();
    const auto one = learning_y(run.data.panel, run.data.universe, run.data.prices, run.cfg, 2013);
    EXPECT_EQ(one.series.values, run.result.learning_y.at(2013).series.values);
}

TEST(LearningY, UnknownYear) {
    const auto& run = shared_run();
    EXPECT_ERRC(learning_y(run.data.panel, run.data.universe, run.data.prices, run.cfg, 2030),
                Errc::UnknownLearningYear);
    EXPECT_ERRC(learning_y(run.data.panel, run.data.universe, run.data.prices, run.cfg, 2010),
                Errc::UnknownLearningYear);
}

TEST(WalkForward, OneYearOfDataIsNotEnough) {
    auto s = small_spec();
    s.n_dates = 250;
    s.regime_shift.reset();
    const auto data = generate(s);
    EXPECT_ERRC(walk_forward(data.panel, data.universe, data.prices, BacktestConfig{}), Errc::InsufficientHistory);
}

TEST(WalkForward, IndependentOfWorkerCount) {
    const auto& run = shared_run();
    auto cfg = run.cfg;
    cfg.model.workers = 4;
    const auto r = walk_forward(run.data.panel, run.data.universe, run.data.prices, cfg);
    for (const auto& [name, rep] : run.result.reports)
        EXPECT_EQ(rep.series.values, r.reports.at(name).series.values) << name;
    EXPECT_EQ(backtest_files(r), backtest_files(run.result));
}
