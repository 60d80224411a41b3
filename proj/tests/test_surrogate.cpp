#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>

#include <gtest/gtest.h>

#include "coup/surrogate.hpp"

using namespace coup;

namespace {

Dataset random_dataset(std::mt19937_64& rng, std::size_t rows, std::size_t dim,
                       const std::function<double(std::span<const double>)>& f) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Dataset d;
    d.dim = dim;
    std::vector<double> x(dim);
    for (std::size_t i = 0; i < rows; ++i) {
        for (auto& v : x) v = unit(rng);
        d.add(x, f(x));
    }
    return d;
}

double mse(const BoostedModel& m, const Dataset& d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d.rows(); ++i) {
        const double e = m.predict(d.row(i)) - d.targets[i];
        s += e * e;
    }
    return s / static_cast<double>(d.rows());
}

EnsembleParams small_ensemble(int models = 10) {
    EnsembleParams p;
    p.models = models;
    p.boosting.rounds = 20;
    return p;
}

} // namespace

TEST(Boosting, ConstantTarget) {
    std::mt19937_64 rng(1);
    const auto d = random_dataset(rng, 50, 3, [](auto) { return 0.42; });
    const auto m = fit_boosted(d, {});
    EXPECT_NEAR(m.base_prediction, 0.42, 1e-15);
    for (const auto& t : m.trees) EXPECT_EQ(t.depth(), 0);
    for (double a : {0.0, 0.3, 1.0}) {
        const std::vector<double> x{a, 1 - a, 0.5};
        EXPECT_NEAR(m.predict(x), 0.42, 1e-6);
    }
}

TEST(Boosting, SinglePoint) {
    Dataset d;
    d.dim = 2;
    d.add(std::vector<double>{0.1, 0.9}, 0.7);
    const auto m = fit_boosted(d, {});
    EXPECT_NEAR(m.predict(std::vector<double>{0.1, 0.9}), 0.7, 1e-6);
}

TEST(Boosting, StepFunctionFitsTightly) {
    Dataset d;
    d.dim = 1;
    for (int i = 0; i < 200; ++i) {
        const double x = (i + 0.5) / 200.0;
        d.add(std::vector<double>{x}, x < 0.37 ? 0.2 : 0.9);
    }
    std::vector<double> loss;
    const auto m = fit_boosted(d, {}, &loss);
    ASSERT_EQ(loss.size(), 101u);
    EXPECT_LE(loss.back(), 1e-3);
    EXPECT_NEAR(loss.back(), mse(m, d), 1e-12);
    EXPECT_EQ(loss.front(), mse(BoostedModel{m.base_prediction, 0.1, {}}, d));
}

TEST(Boosting, LossNonIncreasingAndDepthBounded) {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const auto d = random_dataset(rng, 40 + rep * 5, 1 + rep % 4, [&](std::span<const double> x) {
            return std::clamp(0.5 + 0.4 * std::sin(6 * x[0]) * (x.size() > 1 ? x[1] : 1.0), 0.0, 1.0);
        });
        std::vector<double> loss;
        const auto m = fit_boosted(d, {}, &loss);
        for (std::size_t r = 1; r < loss.size(); ++r) EXPECT_LE(loss[r], loss[r - 1] + 1e-15) << rep << ' ' << r;
        for (const auto& t : m.trees) {
            EXPECT_LE(t.depth(), 3);
            for (const auto& node : t.nodes())
                if (!node.is_leaf()) EXPECT_LT(node.feature, static_cast<int>(d.dim));
        }
        EXPECT_EQ(m.trees.size(), 100u);
    }
}

TEST(Boosting, RejectsBadInput) {
    Dataset empty;
    empty.dim = 1;
    EXPECT_THROW(fit_boosted(empty, {}), std::invalid_argument);
    Dataset d;
    d.dim = 1;
    d.add(std::vector<double>{0.5}, 0.5);
    BoostingParams p;
    p.learning_rate = 0.0;
    EXPECT_THROW(fit_boosted(d, p), std::invalid_argument);
}

TEST(Boosting, JsonDumpIsNested) {
    Dataset d;
    d.dim = 1;
    for (int i = 0; i < 20; ++i) d.add(std::vector<double>{i / 20.0}, i < 10 ? 0.0 : 1.0);
    const auto j = fit_boosted(d, {}).to_json();
    const auto& root = j.at("trees").at(0);
    EXPECT_EQ(root.at("feature"), 0);
    EXPECT_TRUE(root.contains("left"));
    EXPECT_TRUE(root.contains("right"));
}

TEST(Ensemble, SummarizePercentiles) {
    std::vector<double> v(100);
    std::iota(v.begin(), v.end(), 1.0);
    for (auto& x : v) x /= 100.0;
    const auto p = summarize(v);
    // positions 0.025*99 and 0.975*99 between order statistics
    EXPECT_NEAR(p.lo95, 0.03475, 1e-12);
    EXPECT_NEAR(p.hi95, 0.97525, 1e-12);
    EXPECT_NEAR(p.mean, 0.505, 1e-12);
    const auto one = summarize({0.3});
    EXPECT_EQ(one.lo95, 0.3);
    EXPECT_EQ(one.mean, 0.3);
    EXPECT_EQ(one.hi95, 0.3);
}

TEST(Ensemble, ZeroVarianceData) {
    std::mt19937_64 rng(4);
    const auto d = random_dataset(rng, 30, 2, [](auto) { return 0.6; });
    const auto e = fit_ensemble(d, small_ensemble(), 9);
    const auto p = predict_ci(e, std::vector<double>{0.2, 0.2});
    EXPECT_NEAR(p.lo95, 0.6, 1e-12);
    EXPECT_NEAR(p.mean, 0.6, 1e-12);
    EXPECT_NEAR(p.hi95, 0.6, 1e-12);
}

TEST(Ensemble, SingleModel) {
    std::mt19937_64 rng(5);
    const auto d = random_dataset(rng, 30, 2, [](auto x) { return x[0]; });
    const auto e = fit_ensemble(d, small_ensemble(1), 9);
    const auto p = predict_ci(e, std::vector<double>{0.2, 0.7});
    EXPECT_EQ(p.lo95, p.mean);
    EXPECT_EQ(p.hi95, p.mean);
}

TEST(Ensemble, DeterministicAndThreadIndependent) {
    std::mt19937_64 rng(6);
    const auto d = random_dataset(rng, 40, 3, [](auto x) { return x[0] * x[1]; });
    const auto a = fit_ensemble(d, small_ensemble(), 77, 1);
    const auto b = fit_ensemble(d, small_ensemble(), 77, 4);
    const auto c = fit_ensemble(d, small_ensemble(), 78, 1);
    const std::vector<double> x{0.3, 0.6, 0.1};
    const auto pa = predict_ci(a, x);
    const auto pb = predict_ci(b, x);
    EXPECT_EQ(pa.mean, pb.mean);
    EXPECT_EQ(pa.lo95, pb.lo95);
    EXPECT_EQ(pa.hi95, pb.hi95);
    EXPECT_NE(pa.mean, predict_ci(c, x).mean);
    EXPECT_LE(pa.lo95, pa.hi95);
}

TEST(Proposal, ExclusionForcesTheOtherValue) {
    const ConfigurationSpace s({{"c", Categorical{{"a", "b"}}}});
    Configuration seen;
    seen.values = {0.0};
    std::vector<HistoryEntry> history{{seen, 0.8, 3}};
    Dataset d = training_set(s, history);
    const auto e = fit_ensemble(d, small_ensemble(), 1);
    Rng rng(3);
    ProposalParams p;
    p.random_candidates = 50;
    p.ensemble = small_ensemble();
    const auto c = propose(e, history, s, rng, p);
    EXPECT_EQ(c.values, std::vector<double>{1.0});
    EXPECT_EQ(c.provenance, Provenance::model);
}

TEST(Proposal, AllDuplicatesFallsBackToRandom) {
    const ConfigurationSpace s({{"c", Categorical{{"a"}}}});
    Configuration seen;
    seen.values = {0.0};
    std::vector<HistoryEntry> history{{seen, 0.8, 3}};
    const auto e = fit_ensemble(training_set(s, history), small_ensemble(), 1);
    Rng rng(3);
    ProposalParams p;
    p.random_candidates = 20;
    EXPECT_EQ(propose(e, history, s, rng, p).provenance, Provenance::random);
}

TEST(Proposal, FlatPredictorGivesValidNonDuplicate) {
    const ConfigurationSpace s({{"x", Continuous{0, 1, false}}, {"k", Categorical{{"p", "q", "r"}}}});
    Rng rng(8);
    std::vector<HistoryEntry> history;
    for (int i = 0; i < 12; ++i) {
        auto c = sample_random(s, rng);
        c.id = i;
        history.push_back({c, 0.5, 2});
    }
    const auto e = fit_ensemble(training_set(s, history), small_ensemble(), 2);
    ProposalParams p;
    p.random_candidates = 200;
    const auto c = propose(e, history, s, rng, p);
    EXPECT_NO_THROW(s.validate(c));
    for (const auto& h : history) EXPECT_FALSE(same_values(h.config, c));
}

TEST(Proposal, TrainingSetSkipsUnsampled) {
    const ConfigurationSpace s({{"x", Continuous{0, 1, false}}});
    Configuration a, b;
    a.values = {0.2};
    b.values = {0.8};
    std::vector<HistoryEntry> history{{a, 0.3, 1}, {b, 0.0, 0}};
    const auto d = training_set(s, history);
    ASSERT_EQ(d.rows(), 1u);
    EXPECT_EQ(d.targets[0], 0.3);
}

TEST(Proposal, ModelFindsPlantedOptimum) {
    // Target peaks at x = 0.8; the proposal should land near it.
    const ConfigurationSpace s({{"x", Continuous{0, 1, false}}});
    Rng rng(21);
    std::vector<HistoryEntry> history;
    for (int i = 0; i < 30; ++i) {
        auto c = sample_random(s, rng);
        c.id = i;
        const double x = c.values[0];
        history.push_back({c, 1.0 - 2.0 * (x - 0.8) * (x - 0.8), 5});
    }
    ProposalParams p;
    p.random_candidates = 500;
    p.ensemble = small_ensemble(20);
    const auto c = propose_with_model(history, s, rng, p);
    EXPECT_EQ(c.provenance, Provenance::model);
    EXPECT_NEAR(c.values[0], 0.8, 0.2);
}

TEST(Proposal, SmallHistoryFallsBackToRandom) {
    const ConfigurationSpace s({{"x", Continuous{0, 1, false}}});
    Configuration a;
    a.values = {0.5};
    std::vector<HistoryEntry> history{{a, 0.3, 1}};
    Rng rng(2);
    EXPECT_EQ(propose_with_model(history, s, rng, ProposalParams{}).provenance, Provenance::random);
}

TEST(Proposal, Deterministic) {
    const ConfigurationSpace s({{"x", Continuous{0, 1, false}}, {"y", Continuous{1, 100, true}}});
    Rng init(5);
    std::vector<HistoryEntry> history;
    for (int i = 0; i < 15; ++i) {
        auto c = sample_random(s, init);
        c.id = i;
        history.push_back({c, c.values[0], 2});
    }
    ProposalParams p;
    p.random_candidates = 300;
    p.ensemble = small_ensemble();
    Rng r1(99), r2(99);
    const auto a = propose_with_model(history, s, r1, p, 1);
    const auto b = propose_with_model(history, s, r2, p, 3);
    EXPECT_EQ(a.values, b.values);
}
