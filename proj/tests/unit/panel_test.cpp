#include "support/errc.hpp"
#include "support/oracle.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

using namespace rulescreen;

namespace {

std::vector<RawObservation> column(const std::vector<RawValue>& values, Date start = Date(2009, 1, 1)) {
    std::vector<RawObservation> out;
    for (std::size_t i = 0; i < values.size(); ++i)
        out.push_back({start + int(i), "s" + std::to_string(i), {values[i]}, 0.0});
    return out;
}

std::vector<FeatureSpec> one_numeric() { return {{"x", FeatureKind::numeric, RelativeTo::all}}; }

} // namespace

TEST(Discretize, QuartilesOfOneToHundred) {
    std::vector<RawValue> v;
    for (int i = 1; i <= 100; ++i)
        v.emplace_back(double(i));
    const auto disc = fit_discretizer(column(v), one_numeric(), 4);
    EXPECT_EQ(disc.bins[0].edges, (std::vector<double>{25, 50, 75}));
    EXPECT_EQ(disc.bins[0].code(RawValue(25.0)), 0); // cut point lands in the lower bin
    EXPECT_EQ(disc.bins[0].code(RawValue(25.5)), 1);
    EXPECT_EQ(disc.bins[0].code(RawValue(100.0)), 3);
    EXPECT_EQ(disc.bins[0].code(RawValue(-1e9)), 0); // clamps below
    EXPECT_EQ(disc.bins[0].code(RawValue(1e9)), 3);  // and above
}

TEST(Discretize, EdgesMatchScanOracle) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 50 + rep * 37;
        std::vector<RawValue> v;
        std::vector<double> raw;
        for (std::size_t i = 0; i < n; ++i) {
            raw.push_back(std::round(g(rng) * 20.0) / 4.0); // ties on purpose
            v.emplace_back(raw.back());
        }
        for (int m : {3, 5, 10}) {
            const auto disc = fit_discretizer(column(v), one_numeric(), m);
            std::vector<double> expect;
            for (int k = 1; k < m; ++k) {
                const double q = oracle::quantile_scan(raw, std::size_t(k), std::size_t(m));
                if (expect.empty() || q > expect.back())
                    expect.push_back(q);
            }
            EXPECT_EQ(disc.bins[0].edges, expect) << "n=" << n << " m=" << m;
        }
    }
}

TEST(Discretize, ConstantFeatureIsOneModality) {
    const auto disc = fit_discretizer(column({3.0, 3.0, 3.0, 3.0}), one_numeric(), 5);
    EXPECT_EQ(disc.bins[0].cardinality(), 1);
    EXPECT_EQ(disc.bins[0].code(RawValue(3.0)), 0);
    EXPECT_EQ(disc.bins[0].code(RawValue(99.0)), 0);
}

TEST(Discretize, FewDistinctValuesGetIdentityBins) {
    const auto disc = fit_discretizer(column({1.0, 2.0, 2.0, 7.0, 7.0, 7.0}), one_numeric(), 5);
    EXPECT_EQ(disc.bins[0].cardinality(), 3);
    EXPECT_EQ(disc.bins[0].code(RawValue(1.0)), 0);
    EXPECT_EQ(disc.bins[0].code(RawValue(2.0)), 1);
    EXPECT_EQ(disc.bins[0].code(RawValue(7.0)), 2);
}

TEST(Discretize, MissingValuesGetTheMissingCode) {
    const auto disc = fit_discretizer(column({1.0, std::monostate{}, 3.0, 4.0, 5.0, 6.0}), one_numeric(), 2);
    EXPECT_EQ(disc.bins[0].code(RawValue(std::monostate{})), kMissingCode);
    EXPECT_EQ(disc.bins[0].code(RawValue(std::nan(""))), kMissingCode);
    // the missing cell is ignored by the fit: 5 values, median rank 3
    EXPECT_EQ(disc.bins[0].edges, std::vector<double>{4.0});
}

TEST(Discretize, CategoricalCodesFollowSortedLabels) {
    std::vector<FeatureSpec> specs{{"c", FeatureKind::categorical, RelativeTo::all}};
    const auto disc = fit_discretizer(column({std::string("b"), std::string("a"), std::string("c")}), specs, 5);
    EXPECT_EQ(disc.bins[0].code(RawValue(std::string("a"))), 0);
    EXPECT_EQ(disc.bins[0].code(RawValue(std::string("c"))), 2);
    EXPECT_EQ(disc.bins[0].code(RawValue(std::string("zz"))), kMissingCode);
}

TEST(Discretize, RejectsBadModalitiesAndEmptyPanels) {
    EXPECT_ERRC(fit_discretizer(column({1.0}), one_numeric(), 1), Errc::NonPositiveModalities);
    EXPECT_ERRC(fit_discretizer(std::vector<RawObservation>{}, one_numeric(), 5), Errc::EmptyPanel);
}

TEST(Discretize, ModalityFrequenciesStayInBand) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u;
    std::vector<RawValue> v;
    for (int i = 0; i < 5000; ++i)
        v.emplace_back(u(rng));
    const int m = 7;
    const auto obs = column(v);
    const auto disc = fit_discretizer(obs, one_numeric(), m);
    std::vector<int> counts(m, 0);
    for (const auto& o : obs)
        ++counts[std::size_t(disc.bins[0].code(o.features[0]))];
    for (int c : counts) {
        EXPECT_GE(double(c) / 5000.0, 0.5 / m);
        EXPECT_LE(double(c) / 5000.0, 2.0 / m);
    }
}

TEST(Discretize, CodesAreMonotoneAndInvariantToRowOrder) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    std::vector<RawValue> v;
    for (int i = 0; i < 400; ++i)
        v.emplace_back(g(rng));
    auto obs = column(v);
    const auto a = fit_discretizer(obs, one_numeric(), 6);
    std::shuffle(obs.begin(), obs.end(), rng);
    const auto b = fit_discretizer(obs, one_numeric(), 6);
    EXPECT_EQ(a.bins[0].edges, b.bins[0].edges);
    for (int i = 0; i < 200; ++i) {
        const double x1 = g(rng), x2 = g(rng);
        const auto c1 = a.bins[0].code(RawValue(x1)), c2 = a.bins[0].code(RawValue(x2));
        if (x1 <= x2)
            EXPECT_LE(c1, c2);
    }
}

TEST(Discretize, WorkerCountDoesNotChangeTheFit) {
    SynthSpec spec;
    spec.n_stocks = 50;
    spec.n_dates = 300;
    const auto panel = generate_observations(spec);
    const auto a = fit_discretizer(panel.observations, panel.specs, 5, 1);
    const auto b = fit_discretizer(panel.observations, panel.specs, 5, 4);
    for (std::size_t k = 0; k < a.bins.size(); ++k)
        EXPECT_EQ(a.bins[k].edges, b.bins[k].edges);
}

TEST(Split, PartitionsInTimeOrder) {
    std::vector<RawValue> v;
    for (int i = 0; i < 10; ++i)
        v.emplace_back(double(i));
    auto obs = column(v);
    std::reverse(obs.begin(), obs.end()); // input order must not matter
    const auto disc = fit_discretizer(obs, one_numeric(), 2);
    const auto panel = apply_discretizer(obs, disc);
    const auto s = split(panel, 9);
    EXPECT_EQ(s.learn.size(), 9u);
    EXPECT_EQ(s.aggregate.size(), 1u);
    EXPECT_TRUE(s.aggregation_not_larger);
    EXPECT_LT(s.learn.date(8), s.aggregate.date(0));
    EXPECT_FALSE(split(panel, 3).aggregation_not_larger);
    for (std::size_t bad : {std::size_t(0), std::size_t(10), std::size_t(11)})
        EXPECT_ERRC(split(panel, bad), Errc::BadSplitPoint);
}

TEST(Split, AtDateBoundary) {
    std::vector<RawObservation> obs;
    for (int y = 2009; y <= 2012; ++y)
        for (int i = 0; i < 5; ++i)
            obs.push_back({Date(y, 6, 1), "s" + std::to_string(i), {double(i)}, 0.01});
    const auto panel = apply_discretizer(obs, fit_discretizer(obs, one_numeric(), 3));
    const auto s = split_at(panel, Date(2011, 12, 31));
    EXPECT_EQ(s.learn.size(), 15u);
    EXPECT_EQ(s.aggregate.size(), 5u);
    EXPECT_EQ(s.aggregate.date(0).year(), 2012);
}

TEST(Panel, LoadsCsvWithMissingCellsAndLabels) {
    const auto dir = std::filesystem::temp_directory_path() / "rulescreen_panel_test";
    std::filesystem::create_directories(dir);
    detail::write_file((dir / "f.csv").string(), "date,stock_id,a,b\n2010-01-04,X,1.5,lo\n2010-01-04,Y,,hi\n");
    detail::write_file((dir / "r.csv").string(), "date,stock_id,fwd_excess_return_3m\n2010-01-04,X,0.02\n");
    const auto p = load_raw_panel((dir / "f.csv").string(), (dir / "r.csv").string());
    ASSERT_EQ(p.observations.size(), 2u);
    EXPECT_EQ(p.specs[0].kind, FeatureKind::numeric);
    EXPECT_EQ(p.specs[1].kind, FeatureKind::categorical);
    EXPECT_TRUE(is_missing(p.observations[1].features[0]));
    EXPECT_EQ(*p.observations[0].y, 0.02);
    EXPECT_FALSE(p.observations[1].y);
    std::filesystem::remove_all(dir);
}
