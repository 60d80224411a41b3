#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

#include "coup/configspace.hpp"

using namespace coup;

namespace {

ConfigurationSpace mixed() {
    return ConfigurationSpace({{"a", Continuous{10, 20, false}},
                               {"b", Continuous{1, 100, true}},
                               {"c", Categorical{{"x", "y", "z"}}}});
}

int differing(const Configuration& p, const Configuration& q) {
    int d = 0;
    for (std::size_t k = 0; k < p.values.size(); ++k) d += p.values[k] != q.values[k];
    return d;
}

} // namespace

TEST(ConfigSpace, RejectsInvalidSpaces) {
    EXPECT_THROW(ConfigurationSpace({}), std::invalid_argument);
    EXPECT_THROW(ConfigurationSpace({{"a", Continuous{1, 1, false}}}), std::invalid_argument);
    EXPECT_THROW(ConfigurationSpace({{"a", Continuous{0, 1, true}}}), std::invalid_argument);
    EXPECT_THROW(ConfigurationSpace({{"a", Categorical{{}}}}), std::invalid_argument);
    EXPECT_THROW(ConfigurationSpace({{"a", Categorical{{"p", "p"}}}}), std::invalid_argument);
    EXPECT_THROW(ConfigurationSpace({{"a", Categorical{{"p"}}}, {"a", Categorical{{"q"}}}}), std::invalid_argument);
}

TEST(ConfigSpace, SingleValueSpaceSamplesThatValue) {
    const ConfigurationSpace s({{"only", Categorical{{"a"}}}});
    Rng rng(3);
    for (int i = 0; i < 5; ++i) EXPECT_EQ(sample_random(s, rng).values, std::vector<double>{0.0});
}

TEST(ConfigSpace, SamplingIsDeterministic) {
    const auto s = mixed();
    Rng r1(42), r2(42);
    for (int i = 0; i < 20; ++i) EXPECT_EQ(sample_random(s, r1).values, sample_random(s, r2).values);
}

TEST(ConfigSpace, UniformMeanWithinTolerance) {
    const ConfigurationSpace s({{"u", Continuous{0, 1, false}}});
    Rng rng(9);
    double sum = 0.0;
    for (int i = 0; i < 10000; ++i) sum += sample_random(s, rng).values[0];
    EXPECT_NEAR(sum / 10000, 0.5, 0.02);
}

TEST(ConfigSpace, LogScaleSamplingIsLogUniform) {
    const ConfigurationSpace s({{"u", Continuous{1, 10000, true}}});
    Rng rng(10);
    int below100 = 0;
    for (int i = 0; i < 10000; ++i) {
        const double v = sample_random(s, rng).values[0];
        ASSERT_GE(v, 1.0);
        ASSERT_LE(v, 10000.0);
        below100 += v < 100.0;
    }
    EXPECT_NEAR(below100 / 10000.0, 0.5, 0.02);
}

TEST(ConfigSpace, Normalize) {
    const auto s = mixed();
    Configuration c{0, {15.0, 10.0, 1.0}, Provenance::random};
    const auto x = normalize(s, c);
    ASSERT_EQ(x.size(), 5u);
    EXPECT_EQ(s.encoded_size(), 5u);
    EXPECT_DOUBLE_EQ(x[0], 0.5);
    EXPECT_NEAR(x[1], 0.5, 1e-15);
    EXPECT_EQ((std::vector<double>{x[2], x[3], x[4]}), (std::vector<double>{0, 1, 0}));
}

TEST(ConfigSpace, NormalizeRejectsMismatch) {
    const auto s = mixed();
    EXPECT_THROW(normalize(s, Configuration{0, {15.0, 10.0}, Provenance::random}), std::invalid_argument);
    EXPECT_THROW(normalize(s, Configuration{0, {25.0, 10.0, 0.0}, Provenance::random}), std::invalid_argument);
    EXPECT_THROW(normalize(s, Configuration{0, {15.0, 10.0, 3.0}, Provenance::random}), std::invalid_argument);
}

TEST(ConfigSpace, NormalizeDenormalizeRoundTrip) {
    const auto s = mixed();
    Rng rng(1);
    for (int i = 0; i < 500; ++i) {
        const auto c = sample_random(s, rng);
        const auto x = normalize(s, c);
        const auto back = normalize(s, denormalize(s, x));
        for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(back[k], x[k], 1e-12);
    }
}

TEST(ConfigSpace, CategoricalNeighbors) {
    const ConfigurationSpace s({{"c", Categorical{{"a", "b", "c"}}}});
    Rng rng(0);
    const auto n = neighbors(s, Configuration{4, {0.0}, Provenance::model}, rng);
    ASSERT_EQ(n.size(), 2u);
    EXPECT_EQ(n[0].values[0], 1.0);
    EXPECT_EQ(n[1].values[0], 2.0);
    EXPECT_EQ(n[0].id, 4u);
    EXPECT_EQ(n[0].provenance, Provenance::model);
}

TEST(ConfigSpace, ContinuousNeighbors) {
    const ConfigurationSpace s({{"u", Continuous{-3, 7, false}}});
    Rng rng(0);
    for (double v : {-3.0, 0.0, 7.0}) {
        const auto n = neighbors(s, Configuration{0, {v}, Provenance::random}, rng);
        ASSERT_EQ(n.size(), 4u);
        for (const auto& c : n) {
            EXPECT_GE(c.values[0], -3.0);
            EXPECT_LE(c.values[0], 7.0);
        }
    }
}

TEST(ConfigSpace, NeighborCountAndSingleChange) {
    const ConfigurationSpace two({{"p", Categorical{{"a", "b", "c"}}}, {"q", Categorical{{"1", "2", "3", "4"}}}});
    Rng rng(0);
    EXPECT_EQ(neighbors(two, Configuration{0, {0, 0}, Provenance::random}, rng).size(), 5u);

    const auto s = mixed();
    for (int i = 0; i < 200; ++i) {
        const auto c = sample_random(s, rng);
        const auto n = neighbors(s, c, rng);
        EXPECT_EQ(n.size(), 4u + 4u + 2u);
        for (const auto& x : n) {
            EXPECT_EQ(differing(c, x), 1);
            EXPECT_NO_THROW(s.validate(x));
        }
    }
}

TEST(ConfigSpace, NeighborSpreadMatchesTruncatedGaussian) {
    // Mean 0.5 is far from both bounds, so truncation is rare and the
    // normalized steps should have a standard deviation close to 0.2.
    const ConfigurationSpace s({{"u", Continuous{0, 1, false}}});
    Rng rng(8);
    double sq = 0.0;
    int n = 0;
    for (int i = 0; i < 3000; ++i) {
        for (const auto& c : neighbors(s, Configuration{0, {0.5}, Provenance::random}, rng)) {
            sq += (c.values[0] - 0.5) * (c.values[0] - 0.5);
            ++n;
        }
    }
    EXPECT_NEAR(std::sqrt(sq / n), 0.2, 0.01);
}

TEST(ConfigSpace, JsonRoundTrip) {
    const auto s = mixed();
    const auto s2 = space_from_json(space_to_json(s));
    EXPECT_EQ(space_to_json(s2), space_to_json(s));
    Rng rng(2);
    auto c = sample_random(s, rng);
    c.id = 17;
    c.provenance = Provenance::model;
    const auto j = config_to_json(s, c);
    EXPECT_EQ(j.at("values").at("c").get<std::string>(), s.render_value(c, 2));
    const auto back = config_from_json(s, j);
    EXPECT_EQ(back.id, 17u);
    EXPECT_EQ(back.provenance, Provenance::model);
    EXPECT_EQ(back.values, c.values);
    EXPECT_THROW(space_from_json(nlohmann::json::object()), std::invalid_argument);
}
