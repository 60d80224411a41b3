#include "coup/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "coup/parallel.hpp"

namespace coup {
namespace {

constexpr double kMinGain = 1e-12;

std::size_t slots_for_depth(int depth) { return (std::size_t{1} << (depth + 1)) - 1; }

nlohmann::json node_to_json(std::span<const TreeNode> nodes, std::size_t k) {
    const TreeNode& n = nodes[k];
    if (n.is_leaf()) return {{"leaf", n.value}};
    return {{"feature", n.feature},
            {"threshold", n.threshold},
            {"left", node_to_json(nodes, 2 * k + 1)},
            {"right", node_to_json(nodes, 2 * k + 2)}};
}

int node_depth(std::span<const TreeNode> nodes, std::size_t k) {
    if (nodes[k].is_leaf()) return 0;
    return 1 + std::max(node_depth(nodes, 2 * k + 1), node_depth(nodes, 2 * k + 2));
}

double mse(std::span<const double> residuals) {
    double s = 0.0;
    for (double r : residuals) s += r * r;
    return s / static_cast<double>(residuals.size());
}

struct SplitCandidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

// Midpoint that still separates a < b after rounding.
double split_point(double a, double b) {
    const double t = a + 0.5 * (b - a);
    return t < b ? t : a;
}

// Grows one tree on the residuals. `order[f]` lists row indices sorted by
// feature f; it is computed once per dataset and shared across rounds.
RegressionTree fit_tree(const Dataset& data, const std::vector<std::vector<std::size_t>>& order,
                        std::span<const double> residuals, int max_depth, std::vector<std::size_t>& slot_of) {
    const std::size_t n = data.rows();
    const std::size_t dim = data.dim;
    std::vector<TreeNode> nodes(slots_for_depth(max_depth));
    std::fill(slot_of.begin(), slot_of.end(), 0);

    std::vector<double> sum(nodes.size(), 0.0);
    std::vector<std::size_t> count(nodes.size(), 0);
    std::vector<char> open(nodes.size(), 0);
    open[0] = 1;

    for (int level = 0; level <= max_depth; ++level) {
        const std::size_t first = slots_for_depth(level - 1);
        const std::size_t last = slots_for_depth(level);

        std::fill(sum.begin() + first, sum.begin() + last, 0.0);
        std::fill(count.begin() + first, count.begin() + last, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = slot_of[i];
            if (k >= first && k < last) {
                sum[k] += residuals[i];
                ++count[k];
            }
        }
        for (std::size_t k = first; k < last; ++k) {
            if (open[k]) nodes[k].value = sum[k] / static_cast<double>(count[k]);
        }
        if (level == max_depth) break;

        std::vector<SplitCandidate> best(last - first);
        std::vector<double> left_sum(last - first);
        std::vector<std::size_t> left_count(last - first);
        std::vector<double> prev(last - first);
        for (std::size_t f = 0; f < dim; ++f) {
            std::fill(left_sum.begin(), left_sum.end(), 0.0);
            std::fill(left_count.begin(), left_count.end(), 0);
            for (std::size_t i : order[f]) {
                const std::size_t k = slot_of[i];
                if (k < first || k >= last || !open[k]) continue;
                const std::size_t s = k - first;
                const double x = data.features[i * dim + f];
                if (left_count[s] > 0 && x > prev[s]) {
                    const double nl = static_cast<double>(left_count[s]);
                    const double nr = static_cast<double>(count[k] - left_count[s]);
                    const double sr = sum[k] - left_sum[s];
                    const double gain = left_sum[s] * left_sum[s] / nl + sr * sr / nr -
                                        sum[k] * sum[k] / static_cast<double>(count[k]);
                    if (gain > best[s].gain) best[s] = {gain, static_cast<int>(f), split_point(prev[s], x)};
                }
                left_sum[s] += residuals[i];
                ++left_count[s];
                prev[s] = x;
            }
        }

        bool any_split = false;
        for (std::size_t k = first; k < last; ++k) {
            const SplitCandidate& c = best[k - first];
            if (!open[k] || c.feature < 0 || c.gain <= kMinGain) continue;
            nodes[k].feature = c.feature;
            nodes[k].threshold = c.threshold;
            open[2 * k + 1] = 1;
            open[2 * k + 2] = 1;
            any_split = true;
        }
        if (!any_split) break;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = slot_of[i];
            if (k < first || k >= last || nodes[k].is_leaf()) continue;
            slot_of[i] = data.features[i * dim + static_cast<std::size_t>(nodes[k].feature)] <= nodes[k].threshold
                             ? 2 * k + 1
                             : 2 * k + 2;
        }
    }
    return RegressionTree(std::move(nodes), max_depth);
}

double percentile(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Ensemble laid out for fast repeated prediction. Every tree is padded to a
// complete tree of the common depth (a leaf above the bottom becomes a split
// that always goes left), so traversal is a fixed number of steps. Sums are
// formed in the same order as BoostedModel::predict, so results match it
// exactly.
class FlatEnsemble {
public:
    explicit FlatEnsemble(const Ensemble& e) {
        for (const auto& m : e.models) {
            for (const auto& t : m.trees) depth_ = std::max(depth_, static_cast<int>(std::log2(t.nodes().size() + 1)) - 1);
        }
        internal_ = (std::size_t{1} << depth_) - 1;
        leaves_ = std::size_t{1} << depth_;
        for (const auto& m : e.models) {
            base_.push_back(m.base_prediction);
            lr_.push_back(m.learning_rate);
            tree_count_.push_back(m.trees.size());
            for (const auto& t : m.trees) add_tree(t);
        }
    }

    std::size_t models() const { return base_.size(); }

    /// Predictions for `rows` row-major inputs; out[r * models() + b].
    void predict_batch(const double* x, std::size_t rows, std::size_t dim, std::vector<double>& out) const {
        out.assign(rows * base_.size(), 0.0);
        std::vector<std::size_t> slot(rows);
        std::size_t tree = 0;
        for (std::size_t b = 0; b < base_.size(); ++b) {
            for (std::size_t t = 0; t < tree_count_[b]; ++t, ++tree) {
                const int* f = feature_.data() + tree * internal_;
                const double* thr = threshold_.data() + tree * internal_;
                const double* val = value_.data() + tree * leaves_;
                std::fill(slot.begin(), slot.end(), 0);
                for (int d = 0; d < depth_; ++d) {
                    for (std::size_t r = 0; r < rows; ++r) {
                        const std::size_t k = slot[r];
                        slot[r] = 2 * k + 1 + (x[r * dim + static_cast<std::size_t>(f[k])] > thr[k] ? 1 : 0);
                    }
                }
                for (std::size_t r = 0; r < rows; ++r) out[r * base_.size() + b] += val[slot[r] - internal_];
            }
            for (std::size_t r = 0; r < rows; ++r) {
                double& o = out[r * base_.size() + b];
                o = base_[b] + lr_[b] * o;
            }
        }
    }

private:
    void add_tree(const RegressionTree& t) {
        const auto nodes = t.nodes();
        std::vector<int> f(internal_, 0);
        std::vector<double> thr(internal_, std::numeric_limits<double>::infinity());
        std::vector<double> val(leaves_, 0.0);
        // Walk the padded tree, remembering the value of the leaf we are under.
        const auto fill = [&](auto&& self, std::size_t padded, std::size_t orig, bool inside, double value) -> void {
            const bool real = inside && orig < nodes.size() && !nodes[orig].is_leaf();
            const double v = inside && orig < nodes.size() && nodes[orig].is_leaf() ? nodes[orig].value : value;
            if (padded >= internal_) {
                val[padded - internal_] = v;
                return;
            }
            if (real) {
                f[padded] = nodes[orig].feature;
                thr[padded] = nodes[orig].threshold;
                self(self, 2 * padded + 1, 2 * orig + 1, true, v);
                self(self, 2 * padded + 2, 2 * orig + 2, true, v);
            } else {
                self(self, 2 * padded + 1, 0, false, v);
                self(self, 2 * padded + 2, 0, false, v);
            }
        };
        fill(fill, 0, 0, true, 0.0);
        feature_.insert(feature_.end(), f.begin(), f.end());
        threshold_.insert(threshold_.end(), thr.begin(), thr.end());
        value_.insert(value_.end(), val.begin(), val.end());
    }

    int depth_ = 0;
    std::size_t internal_ = 0;
    std::size_t leaves_ = 1;
    std::vector<double> base_;
    std::vector<double> lr_;
    std::vector<std::size_t> tree_count_;
    std::vector<int> feature_;
    std::vector<double> threshold_;
    std::vector<double> value_;
};

} // namespace

RegressionTree::RegressionTree(std::vector<TreeNode> nodes, int max_depth) : nodes_(std::move(nodes)) {
    if (max_depth < 0 || nodes_.size() != slots_for_depth(max_depth))
        throw std::invalid_argument("tree storage does not match its depth");
}

double RegressionTree::predict(std::span<const double> x) const {
    std::size_t k = 0;
    while (!nodes_[k].is_leaf()) {
        k = x[static_cast<std::size_t>(nodes_[k].feature)] <= nodes_[k].threshold ? 2 * k + 1 : 2 * k + 2;
    }
    return nodes_[k].value;
}

int RegressionTree::depth() const { return nodes_.empty() ? 0 : node_depth(nodes_, 0); }

nlohmann::json RegressionTree::to_json() const { return node_to_json(nodes_, 0); }

void Dataset::add(std::span<const double> x, double y) {
    if (rows() == 0 && features.empty()) dim = x.size();
    if (x.size() != dim) throw std::invalid_argument("feature vector length mismatch");
    features.insert(features.end(), x.begin(), x.end());
    targets.push_back(y);
}

double BoostedModel::predict(std::span<const double> x) const {
    double s = 0.0;
    for (const auto& t : trees) s += t.predict(x);
    return base_prediction + learning_rate * s;
}

nlohmann::json BoostedModel::to_json() const {
    nlohmann::json trees_json = nlohmann::json::array();
    for (const auto& t : trees) trees_json.push_back(t.to_json());
    return {{"base_prediction", base_prediction}, {"learning_rate", learning_rate}, {"trees", std::move(trees_json)}};
}

BoostedModel fit_boosted(const Dataset& data, const BoostingParams& params, std::vector<double>* loss_history) {
    const std::size_t n = data.rows();
    if (n == 0) throw std::invalid_argument("cannot fit a model to an empty dataset");
    if (params.rounds < 0 || params.max_depth < 0 || !(params.learning_rate > 0.0))
        throw std::invalid_argument("invalid boosting parameters");
    if (data.features.size() != n * data.dim) throw std::invalid_argument("dataset shape mismatch");

    BoostedModel model;
    model.learning_rate = params.learning_rate;
    model.base_prediction = std::accumulate(data.targets.begin(), data.targets.end(), 0.0) / static_cast<double>(n);

    std::vector<std::vector<std::size_t>> order(data.dim, std::vector<std::size_t>(n));
    for (std::size_t f = 0; f < data.dim; ++f) {
        std::iota(order[f].begin(), order[f].end(), std::size_t{0});
        std::stable_sort(order[f].begin(), order[f].end(), [&](std::size_t a, std::size_t b) {
            return data.features[a * data.dim + f] < data.features[b * data.dim + f];
        });
    }

    std::vector<double> residuals(n);
    for (std::size_t i = 0; i < n; ++i) residuals[i] = data.targets[i] - model.base_prediction;
    if (loss_history) {
        loss_history->clear();
        loss_history->push_back(mse(residuals));
    }

    std::vector<std::size_t> slot_of(n);
    model.trees.reserve(static_cast<std::size_t>(params.rounds));
    for (int r = 0; r < params.rounds; ++r) {
        RegressionTree tree = fit_tree(data, order, residuals, params.max_depth, slot_of);
        const auto nodes = tree.nodes();
        for (std::size_t i = 0; i < n; ++i) residuals[i] -= params.learning_rate * nodes[slot_of[i]].value;
        model.trees.push_back(std::move(tree));
        if (loss_history) loss_history->push_back(mse(residuals));
    }
    return model;
}

Ensemble fit_ensemble(const Dataset& data, const EnsembleParams& params, std::uint64_t seed, int threads) {
    const std::size_t n = data.rows();
    if (n == 0) throw std::invalid_argument("cannot fit an ensemble to an empty dataset");
    if (params.models < 1 || !(params.bootstrap_factor > 0.0)) throw std::invalid_argument("invalid ensemble parameters");
    const auto sample_size =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(params.bootstrap_factor * static_cast<double>(n))));

    Ensemble out;
    out.models.resize(static_cast<std::size_t>(params.models));
    parallel_for(out.models.size(), threads, [&](std::size_t b) {
        Rng rng(derive_seed(seed, b));
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        Dataset resample;
        resample.dim = data.dim;
        resample.features.reserve(sample_size * data.dim);
        resample.targets.reserve(sample_size);
        for (std::size_t i = 0; i < sample_size; ++i) {
            const std::size_t j = pick(rng);
            resample.add(data.row(j), data.targets[j]);
        }
        out.models[b] = fit_boosted(resample, params.boosting);
    });
    return out;
}

Prediction summarize(std::vector<double> predictions) {
    if (predictions.empty()) throw std::invalid_argument("no predictions to summarize");
    Prediction p;
    p.mean = std::accumulate(predictions.begin(), predictions.end(), 0.0) / static_cast<double>(predictions.size());
    std::sort(predictions.begin(), predictions.end());
    p.lo95 = percentile(predictions, 0.025);
    p.hi95 = percentile(predictions, 0.975);
    return p;
}

Prediction predict_ci(const Ensemble& ensemble, std::span<const double> x) {
    std::vector<double> preds;
    preds.reserve(ensemble.models.size());
    for (const auto& m : ensemble.models) preds.push_back(m.predict(x));
    return summarize(std::move(preds));
}

Dataset training_set(const ConfigurationSpace& space, std::span<const HistoryEntry> history) {
    Dataset data;
    data.dim = space.encoded_size();
    for (const auto& h : history) {
        if (h.samples < 1) continue;
        data.add(normalize(space, h.config), h.u_hat);
    }
    return data;
}

Configuration propose(const Ensemble& ensemble, std::span<const HistoryEntry> history, const ConfigurationSpace& space,
                      Rng& rng, const ProposalParams& params, int threads) {
    if (ensemble.models.empty()) throw std::invalid_argument("propose needs a trained ensemble");

    const FlatEnsemble flat(ensemble);
    const std::size_t dim = space.encoded_size();
    // hi95 for each configuration, evaluated in blocks so each tree is
    // loaded once per block rather than once per configuration.
    auto hi95_many = [&](std::span<const Configuration> configs, std::span<double> out) {
        constexpr std::size_t kBlock = 256;
        std::vector<double> x;
        std::vector<double> preds;
        for (std::size_t start = 0; start < configs.size(); start += kBlock) {
            const std::size_t rows = std::min(kBlock, configs.size() - start);
            x.clear();
            for (std::size_t r = 0; r < rows; ++r) {
                const auto enc = normalize(space, configs[start + r]);
                x.insert(x.end(), enc.begin(), enc.end());
            }
            flat.predict_batch(x.data(), rows, dim, preds);
            for (std::size_t r = 0; r < rows; ++r) {
                const auto first = preds.begin() + static_cast<std::ptrdiff_t>(r * flat.models());
                out[start + r] = summarize(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(flat.models()))).hi95;
            }
        }
    };
    auto hi95 = [&](const Configuration& c) {
        double v = 0.0;
        hi95_many(std::span<const Configuration>(&c, 1), std::span<double>(&v, 1));
        return v;
    };

    std::vector<const HistoryEntry*> ranked;
    for (const auto& h : history) {
        if (h.samples >= 1) ranked.push_back(&h);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const HistoryEntry* a, const HistoryEntry* b) {
        if (a->u_hat != b->u_hat) return a->u_hat > b->u_hat;
        return a->config.id < b->config.id;
    });
    if (ranked.size() > static_cast<std::size_t>(params.starts)) ranked.resize(static_cast<std::size_t>(params.starts));

    std::vector<Configuration> pool;
    std::vector<double> scores;
    for (const HistoryEntry* start : ranked) {
        Configuration current = start->config;
        double current_score = hi95(current);
        int collected = 0;
        while (collected < params.walk_budget) {
            std::vector<Configuration> nbrs = neighbors(space, current, rng);
            if (nbrs.empty()) break;
            std::vector<double> nbr_scores(nbrs.size());
            hi95_many(nbrs, nbr_scores);
            std::size_t best = 0;
            for (std::size_t i = 1; i < nbrs.size(); ++i) {
                if (nbr_scores[i] > nbr_scores[best]) best = i;
            }
            collected += static_cast<int>(nbrs.size());
            Configuration next = nbrs[best];
            const double best_score = nbr_scores[best];
            pool.insert(pool.end(), nbrs.begin(), nbrs.end());
            scores.insert(scores.end(), nbr_scores.begin(), nbr_scores.end());
            if (!(best_score > current_score)) break;
            current = std::move(next);
            current_score = best_score;
        }
    }
    const std::size_t local = pool.size();
    for (int i = 0; i < params.random_candidates; ++i) pool.push_back(sample_random(space, rng));
    scores.resize(pool.size());

    constexpr std::size_t kChunk = 1024;
    const std::size_t chunks = (pool.size() - local + kChunk - 1) / kChunk;
    parallel_for(chunks, threads, [&](std::size_t c) {
        const std::size_t begin = local + c * kChunk;
        const std::size_t count = std::min(kChunk, pool.size() - begin);
        hi95_many(std::span<const Configuration>(pool).subspan(begin, count),
                  std::span<double>(scores).subspan(begin, count));
    });
    for (std::size_t i = 0; i < pool.size(); ++i) {
        for (const auto& h : history) {
            if (same_values(pool[i], h.config)) {
                scores[i] = -std::numeric_limits<double>::infinity();
                break;
            }
        }
    }

    std::size_t best = pool.size();
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (scores[i] == -std::numeric_limits<double>::infinity()) continue;
        if (best == pool.size() || scores[i] > scores[best]) best = i;
    }
    if (best == pool.size()) {
        Configuration c = sample_random(space, rng);
        c.provenance = Provenance::random;
        return c;
    }
    Configuration out = std::move(pool[best]);
    out.id = 0;
    out.provenance = Provenance::model;
    return out;
}

Configuration propose_with_model(std::span<const HistoryEntry> history, const ConfigurationSpace& space, Rng& rng,
                                 const ProposalParams& params, int threads) {
    const Dataset data = training_set(space, history);
    if (data.rows() < std::max<std::size_t>(params.min_history, 1)) {
        Configuration c = sample_random(space, rng);
        c.provenance = Provenance::random;
        return c;
    }
    const std::uint64_t seed = rng();
    const Ensemble ensemble = fit_ensemble(data, params.ensemble, seed, threads);
    return propose(ensemble, history, space, rng, params, threads);
}

} // namespace coup
