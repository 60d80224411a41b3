#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <gtest/gtest.h>

#include "coup/cdfrank.hpp"

using namespace coup;

namespace {

EmpiricalCdf cdf(std::vector<double> done, std::size_t censored = 0, double cap = 10.0, std::string name = "s") {
    return EmpiricalCdf(std::move(name), std::move(done), censored, cap);
}

Ranking ranks(std::vector<int> r) {
    Ranking out;
    for (std::size_t i = 0; i < r.size(); ++i) out["s" + std::to_string(i)] = r[i];
    return out;
}

UtilityFunction U(const std::string& s) { return UtilityFunction::parse(s); }

} // namespace

TEST(Cdf, Counting) {
    const auto c = cdf({1, 3, 5});
    EXPECT_DOUBLE_EQ(c(4), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(c(3), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(c.left_limit(3), 1.0 / 3.0);
    EXPECT_EQ(c(0.5), 0.0);
    EXPECT_EQ(c(10), 1.0);

    const auto all_censored = cdf({}, 4);
    for (double t : {0.0, 1.0, 9.99}) EXPECT_EQ(all_censored(t), 0.0);
    const auto some = cdf({2}, 1);
    EXPECT_LT(some(10), 1.0);
    EXPECT_LT(some(1e9), 1.0);
}

TEST(Cdf, BuildValidates) {
    EXPECT_THROW(build_cdf({}, 10), std::invalid_argument);
    EXPECT_THROW(build_cdf({{11, false}}, 10), std::invalid_argument);
    EXPECT_THROW(build_cdf({{-1, false}}, 10), std::invalid_argument);
    const auto c = build_cdf({{1, false}, {10, true}, {10, true}}, 10, "x");
    EXPECT_EQ(c.censored_count(), 2u);
    EXPECT_EQ(c.total(), 3u);
    EXPECT_EQ(c.solver(), "x");
}

TEST(Fosd, Examples) {
    EXPECT_EQ(fosd(cdf({1, 2}), cdf({3, 4})), Dominance::a_dominates);
    EXPECT_EQ(fosd(cdf({3, 4}), cdf({1, 2})), Dominance::b_dominates);
    EXPECT_EQ(fosd(cdf({1, 2}), cdf({2, 1})), Dominance::equal);
    EXPECT_EQ(fosd(cdf({1, 10}), cdf({2, 3})), Dominance::incomparable);
    // same fractions with different sample sizes
    EXPECT_EQ(fosd(cdf({1, 1, 2, 2}), cdf({1, 2})), Dominance::equal);
    // censoring counts as never finishing
    EXPECT_EQ(fosd(cdf({1, 2}), cdf({1, 2}, 1)), Dominance::a_dominates);
    EXPECT_EQ(to_string(Dominance::incomparable), "incomparable");
}

TEST(Fosd, Regions) {
    auto r = fosd_regions(cdf({1, 2}), cdf({3, 4}));
    ASSERT_EQ(r.a.size(), 1u);
    EXPECT_EQ(r.a[0].lo, 0.0);
    EXPECT_EQ(r.a[0].hi, 10.0);
    EXPECT_TRUE(r.a[0].closed);
    EXPECT_TRUE(r.b.empty());

    r = fosd_regions(cdf({1, 2}), cdf({1, 2}));
    ASSERT_EQ(r.a.size(), 1u);
    EXPECT_TRUE(r.b.empty());

    // F_A - F_B on [0,1): 0, [1,2): +, [2,3): 0, [3,10): -, at 10: 0
    r = fosd_regions(cdf({1, 10}), cdf({2, 3}));
    ASSERT_FALSE(r.a.empty());
    ASSERT_FALSE(r.b.empty());
    double covered = 0.0;
    for (const auto& i : r.a) covered += i.hi - i.lo;
    for (const auto& i : r.b) covered += i.hi - i.lo;
    EXPECT_DOUBLE_EQ(covered, 10.0);
    ASSERT_EQ(r.b.size(), 1u);
    EXPECT_EQ(r.b[0].lo, 3.0);
    EXPECT_EQ(r.b[0].hi, 10.0);
    EXPECT_FALSE(r.b[0].closed);
    EXPECT_EQ(r.a.back().lo, 10.0);
    EXPECT_TRUE(r.a.back().closed);

    EXPECT_THROW(fosd_regions(cdf({1}, 0, 10), cdf({1}, 0, 20)), std::invalid_argument);
}

TEST(ExpectedUtility, Examples) {
    const auto c = cdf({1, 3, 5});
    EXPECT_DOUBLE_EQ(expected_utility(c, U("step:k=4")), 2.0 / 3.0);
    EXPECT_EQ(expected_utility(c, U("step:k=20")), 1.0);
    EXPECT_DOUBLE_EQ(expected_utility_via_measure(c, U("step:k=4")), 2.0 / 3.0);
    EXPECT_EQ(expected_utility_via_measure(c, U("step:k=20")), 1.0);
    // step at an observed runtime: the sample at 3 does not count
    EXPECT_DOUBLE_EQ(expected_utility(c, U("step:k=3")), c.left_limit(3));
    EXPECT_DOUBLE_EQ(expected_utility_via_measure(c, U("step:k=3")), c.left_limit(3));

    const auto par = cdf({2500}, 1, 5000);
    EXPECT_NEAR(expected_utility(par, U("par:c=2,k=5000")), 0.375, 1e-12);
    EXPECT_NEAR(expected_utility_via_measure(par, U("par:c=2,k=5000")), 0.375, 1e-6);
}

TEST(ExpectedUtility, MeasureFormAgrees) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 300; ++i) {
        const double cap = 1 + unit(rng) * 100;
        std::vector<double> done;
        const int n = 1 + static_cast<int>(unit(rng) * 30);
        for (int k = 0; k < n; ++k) done.push_back(unit(rng) * cap);
        const auto c = cdf(done, static_cast<std::size_t>(unit(rng) * 5), cap);
        const double k = unit(rng) * cap * 1.5 + 0.01;
        for (const auto& u : {UtilityFunction(Step{k}), UtilityFunction(Par{1 + unit(rng) * 9, k}),
                              UtilityFunction(LogCapped{k / 10, k}), UtilityFunction(Exponential{unit(rng) + 0.01})})
            EXPECT_NEAR(expected_utility(c, u), expected_utility_via_measure(c, u), 1e-9) << u.to_string();
    }
}

TEST(ExpectedUtility, ParScore) {
    const auto c = cdf({100, 200}, 2, 5000);
    EXPECT_DOUBLE_EQ(mean_par_score(c, 2, 5000), (100 + 200 + 2 * 10000) / 4.0);
}

TEST(Regret, SingleSolverIsZero) {
    const std::vector<EmpiricalCdf> one{cdf({1, 4, 6}, 1, 10, "only")};
    const auto t = regret_curve(one, UtilitySweep::parse("par:c=2,k=*"), parse_grid("1:10:5"));
    for (double r : t.regret[0]) EXPECT_EQ(r, 0.0);
}

TEST(Regret, DominatingSolverHasZeroRegret) {
    const std::vector<EmpiricalCdf> two{cdf({1, 2, 3}, 0, 10, "a"), cdf({2, 5}, 1, 10, "b")};
    ASSERT_EQ(fosd(two[0], two[1]), Dominance::a_dominates);
    for (const char* sweep : {"step:k=*", "par:c=3,k=*", "exp:lambda=*"}) {
        const auto t = regret_curve(two, UtilitySweep::parse(sweep), parse_grid("0.5:9:12"));
        for (std::size_t g = 0; g < t.grid.size(); ++g) {
            EXPECT_EQ(t.regret[0][g], 0.0) << sweep;
            EXPECT_GE(t.regret[1][g], 0.0);
        }
    }
}

TEST(Regret, BestSolverSwitchesAtCrossing) {
    // a: 60% finish at 10, rest time out. b: 30% at 50, 70% at 100. c: slow.
    std::vector<double> a(6, 10.0), b(3, 50.0), c(2, 500.0);
    b.insert(b.end(), 7, 100.0);
    const std::vector<EmpiricalCdf> cdfs{cdf(a, 4, 1000, "a"), cdf(b, 0, 1000, "b"), cdf(c, 8, 1000, "c")};
    const std::vector<double> grid{20, 50, 90, 100, 100.5, 150, 900};
    const auto t = regret_curve(cdfs, UtilitySweep::parse("step:k=*"), grid);
    const std::vector<std::string> want{"a", "a", "a", "a", "b", "b", "b"};
    EXPECT_EQ(t.best, want);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double best = 0.0;
        for (const auto& x : cdfs) best = std::max(best, x.left_limit(grid[g]));
        EXPECT_DOUBLE_EQ(t.utility[g < 4 ? 0 : 1][g], best);
    }
    EXPECT_THROW(regret_curve(cdfs, UtilitySweep::parse("step:k=*"), {2, 1}), std::invalid_argument);
}

TEST(Grid, Parse) {
    EXPECT_EQ(parse_grid("1:3:3"), (std::vector<double>{1, 2, 3}));
    const auto g = parse_grid("1:100:3:log");
    EXPECT_NEAR(g[1], 10.0, 1e-12);
    EXPECT_EQ(g.back(), 100.0);
    EXPECT_EQ(parse_grid("5:5:1"), std::vector<double>{5});
    EXPECT_THROW(parse_grid("3:1:4"), std::invalid_argument);
    EXPECT_THROW(parse_grid("0:1:4:log"), std::invalid_argument);
    EXPECT_THROW(parse_grid("1:2"), std::invalid_argument);
    EXPECT_THROW(parse_grid("1:2:0"), std::invalid_argument);
    EXPECT_THROW(parse_grid("a:2:3"), std::invalid_argument);
}

TEST(Ranking, Examples) {
    const auto r = rank_by_utility({{"x", 0.9}, {"y", 0.5}, {"z", 0.7}});
    EXPECT_EQ(r.at("x"), 1);
    EXPECT_EQ(r.at("y"), 3);
    EXPECT_EQ(r.at("z"), 2);
    const auto neg = rank_by_utility({{"x", -0.9}, {"y", -0.5}, {"z", -0.7}});
    EXPECT_EQ(neg.at("x"), 3);
    EXPECT_EQ(neg.at("y"), 1);
    EXPECT_EQ(rank_by_utility({{"solo", 0.1}}).at("solo"), 1);
    const auto tie = rank_by_utility({{"b", 0.5}, {"a", 0.5}});
    EXPECT_EQ(tie.at("a"), 1);
    EXPECT_EQ(tie.at("b"), 2);
}

TEST(Ranking, FootruleExamples) {
    EXPECT_EQ(l1_distance(ranks({1, 2, 3}), ranks({3, 2, 1})), 4);
    EXPECT_EQ(l1_distance(ranks({1, 2, 3}), ranks({1, 2, 3})), 0);
    std::vector<int> x(42), y(42);
    std::iota(x.begin(), x.end(), 1);
    std::iota(y.rbegin(), y.rend(), 1);
    EXPECT_EQ(l1_distance(ranks(x), ranks(y)), 882);
    EXPECT_EQ(max_footrule(42), 882);
    EXPECT_EQ(max_footrule(3), 4);
    Ranking other{{"q", 1}, {"s1", 2}, {"s2", 3}};
    EXPECT_THROW(l1_distance(ranks({1, 2, 3}), other), std::invalid_argument);
    EXPECT_THROW(l1_distance(ranks({1, 2}), ranks({1, 2, 3})), std::invalid_argument);
}

TEST(Ranking, FootruleIsAMetric) {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 300; ++i) {
        const int n = 1 + static_cast<int>(rng() % 12);
        std::vector<int> p(n);
        std::iota(p.begin(), p.end(), 1);
        auto a = p, b = p, c = p;
        std::shuffle(a.begin(), a.end(), rng);
        std::shuffle(b.begin(), b.end(), rng);
        std::shuffle(c.begin(), c.end(), rng);
        const auto ra = ranks(a), rb = ranks(b), rc = ranks(c);
        EXPECT_EQ(l1_distance(ra, rb), l1_distance(rb, ra));
        EXPECT_EQ(l1_distance(ra, rb) == 0, a == b);
        EXPECT_LE(l1_distance(ra, rc), l1_distance(ra, rb) + l1_distance(rb, rc));
        EXPECT_LE(l1_distance(ra, rb), max_footrule(n));
    }
}

TEST(Csv, ReadsAnyColumnOrder) {
    std::istringstream in("status,runtime,solver,instance\n"
                          "solved,1.5,a,i1\n"
                          "timeout,10,a,i2\n"
                          "\n"
                          "solved,2,b,i1\n"
                          "solved,3,b,i2\n");
    const auto t = read_runtime_csv(in);
    EXPECT_EQ(t.solvers, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(t.max_runtime, 10.0);
    const auto cdfs = build_cdfs(t, 0);
    EXPECT_EQ(cdfs[0].censored_count(), 1u);
    EXPECT_EQ(cdfs[0].cap(), 10.0);
    EXPECT_EQ(cdfs[1].total(), 2u);
}

TEST(Csv, ReportsEveryBadLine) {
    std::istringstream in("solver,instance,runtime,status\n"
                          "a,i1,1.0,solved\n"
                          "a,i2,abc,solved\n"
                          "a,i3,1.0,crashed\n"
                          "a,i4\n"
                          "a,i5,-1,solved\n");
    try {
        read_runtime_csv(in);
        FAIL() << "expected CsvError";
    } catch (const CsvError& e) {
        ASSERT_EQ(e.problems().size(), 4u);
        EXPECT_NE(e.problems()[0].find("line 3"), std::string::npos);
        EXPECT_NE(e.problems()[3].find("line 6"), std::string::npos);
    }
    std::istringstream no_header("a,i1,1.0,solved\n");
    EXPECT_THROW(read_runtime_csv(no_header), CsvError);
    std::istringstream empty("");
    EXPECT_THROW(read_runtime_csv(empty), CsvError);
}
