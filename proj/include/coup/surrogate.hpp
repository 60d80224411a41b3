#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "coup/configspace.hpp"
#include "coup/random.hpp"

namespace coup {

/// One slot of a depth-limited regression tree. Trees are stored as implicit
/// complete binary trees: slot k has children 2k+1 and 2k+2.
struct TreeNode {
    int feature = -1; // -1 marks a leaf (or an unused slot below one)
    double threshold = 0.0;
    double value = 0.0;

    bool is_leaf() const { return feature < 0; }
};

class RegressionTree {
public:
    RegressionTree() = default;
    RegressionTree(std::vector<TreeNode> nodes, int max_depth);

    /// Samples with x[feature] <= threshold go left.
    double predict(std::span<const double> x) const;

    /// Number of splits on the longest root-to-leaf path.
    int depth() const;
    std::span<const TreeNode> nodes() const { return nodes_; }
    nlohmann::json to_json() const;

private:
    std::vector<TreeNode> nodes_;
};

struct BoostingParams {
    int rounds = 100;
    int max_depth = 3;
    double learning_rate = 0.1;
};

/// Row-major feature matrix with one target per row.
struct Dataset {
    std::size_t dim = 0;
    std::vector<double> features;
    std::vector<double> targets;

    std::size_t rows() const { return targets.size(); }
    std::span<const double> row(std::size_t i) const { return {features.data() + i * dim, dim}; }
    void add(std::span<const double> x, double y);
};

struct BoostedModel {
    double base_prediction = 0.0;
    double learning_rate = 0.1;
    std::vector<RegressionTree> trees;

    double predict(std::span<const double> x) const;
    nlohmann::json to_json() const;
};

/// Squared-error gradient boosting with exact greedy splits. When
/// `loss_history` is given it receives the training MSE before the first
/// round and after every round (rounds + 1 entries).
BoostedModel fit_boosted(const Dataset& data, const BoostingParams& params,
                         std::vector<double>* loss_history = nullptr);

struct EnsembleParams {
    int models = 100;
    /// Bootstrap resample size as a multiple of the dataset size.
    double bootstrap_factor = 2.0;
    BoostingParams boosting;
};

struct Ensemble {
    std::vector<BoostedModel> models;
};

/// Bagged boosting. Model b resamples with an rng seeded from (seed, b), so
/// the result is independent of `threads`.
Ensemble fit_ensemble(const Dataset& data, const EnsembleParams& params, std::uint64_t seed, int threads = 1);

struct Prediction {
    double mean = 0.0;
    double lo95 = 0.0;
    double hi95 = 0.0;
};

/// Mean and 2.5/97.5 percentiles (linear interpolation between order
/// statistics) of a set of predictions.
Prediction summarize(std::vector<double> predictions);

Prediction predict_ci(const Ensemble& ensemble, std::span<const double> x);

/// An evaluated configuration. Entries with samples == 0 are only used to
/// exclude duplicates.
struct HistoryEntry {
    Configuration config;
    double u_hat = 0.0;
    long samples = 0;
};

struct ProposalParams {
    int starts = 10;
    int walk_budget = 10;
    int random_candidates = 10000;
    std::size_t min_history = 10;
    EnsembleParams ensemble;
};

Dataset training_set(const ConfigurationSpace& space, std::span<const HistoryEntry> history);

/// Local search from the best configurations plus random candidates; returns
/// the candidate with the largest predicted hi95 that is not already in the
/// history. Falls back to a random sample (provenance random) when every
/// candidate is a duplicate.
Configuration propose(const Ensemble& ensemble, std::span<const HistoryEntry> history, const ConfigurationSpace& space,
                      Rng& rng, const ProposalParams& params, int threads = 1);

/// Trains a fresh ensemble on the history and proposes from it. Returns a
/// random sample (provenance random) when fewer than params.min_history
/// configurations have been run.
Configuration propose_with_model(std::span<const HistoryEntry> history, const ConfigurationSpace& space, Rng& rng,
                                 const ProposalParams& params, int threads = 1);

} // namespace coup
