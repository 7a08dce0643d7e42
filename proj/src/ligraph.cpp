#include "lcmito/ligraph.hpp"

#include <cmath>
#include <numeric>

#include "lcmito/parallel.hpp"

namespace lcmito::ligraph {

int LIGraph::edge_count() const {
    int count = 0;
    for (std::uint8_t e : edges) count += e;
    return count;
}

LIGraph recover_lig(const TrajectorySet& data, int K, const ouest::EstimationConfig& config, double level,
                    std::uint64_t seed, bool bonferroni) {
    data.validate();
    const int d = data.dim;
    if (d < 2) {
        LIGraph empty;
        empty.d = d;
        empty.level = level;
        empty.p_values = Matrix::Ones(std::max(d, 0), std::max(d, 0));
        empty.weights = Matrix::Zero(std::max(d, 0), std::max(d, 0));
        empty.edges.assign(static_cast<std::size_t>(d) * d, 0);
        empty.degenerate.assign(static_cast<std::size_t>(d) * d, 0);
        return empty;
    }

    const lcmtest::FoldPartition folds = lcmtest::make_folds(data.n_traj(), K, seed);
    // The per-fold model fit depends only on the training trajectories, so it
    // is shared across all d(d-1) pair tests.
    std::vector<ouest::EstimatedOUModel> models;
    models.reserve(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        TrajectorySet train;
        train.grid = data.grid;
        train.dim = data.dim;
        for (int j : folds.complement_indices(k)) train.paths.push_back(data.traj(j));
        models.push_back(ouest::fit(train, config));
    }

    LIGraph graph;
    graph.d = d;
    graph.level = level;
    graph.p_values = Matrix::Ones(d, d);
    graph.weights = Matrix::Zero(d, d);
    graph.edges.assign(static_cast<std::size_t>(d) * d, 0);
    graph.degenerate.assign(static_cast<std::size_t>(d) * d, 0);

    const double decision_level = bonferroni ? level / (static_cast<double>(d) * (d - 1)) : level;

    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(d) * (d - 1));
    for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
            if (a != b) pairs.emplace_back(a, b);
        }
    }

    parallel_for(pairs.size(), [&](std::size_t i) {
        const auto [a, b] = pairs[i];
        filter::QuerySpec query;
        query.alpha = a;
        query.beta = b;
        for (int c = 0; c < d; ++c) {
            if (c != a) query.cond_set.push_back(c);
        }
        double weight = 0.0;
        for (const auto& model : models) weight += std::abs(model.phi_tilde(b, a)) / static_cast<double>(K);
        graph.weights(a, b) = weight;
        try {
            const lcmtest::TestResult result = lcmtest::run_crossfit_with_models(data, query, folds, models, level);
            graph.p_values(a, b) = result.p_value;
            if (result.degenerate_variance) {
                graph.degenerate[static_cast<std::size_t>(a) * d + b] = 1;
            } else if (result.p_value < decision_level) {
                graph.edges[static_cast<std::size_t>(a) * d + b] = 1;
            }
        } catch (const NumericError&) {
            graph.p_values(a, b) = 1.0;
            graph.degenerate[static_cast<std::size_t>(a) * d + b] = 1;
        }
    });
    return graph;
}

int shd(const LIGraph& g1, const LIGraph& g2) {
    if (g1.d != g2.d) throw ValidationError("shd: graphs have different dimensions");
    int dist = 0;
    for (int a = 0; a < g1.d; ++a) {
        for (int b = 0; b < g1.d; ++b) {
            if (a == b) continue;
            if (g1.edge(a, b) != g2.edge(a, b)) ++dist;
        }
    }
    return dist;
}

StabilityReport stability_report(const TrajectorySet& data, int n_splits, int K,
                                 const ouest::EstimationConfig& config, double level, std::uint64_t seed) {
    if (n_splits < 2) throw ValidationError("stability_report: n_splits must be >= 2");
    StabilityReport report;
    report.graphs.reserve(static_cast<std::size_t>(n_splits));
    for (int s = 0; s < n_splits; ++s) {
        report.graphs.push_back(recover_lig(data, K, config, level, derive_seed(seed, static_cast<std::uint64_t>(s))));
    }
    for (int i = 0; i < n_splits; ++i) {
        for (int j = i + 1; j < n_splits; ++j) {
            SplitComparison cmp;
            cmp.split_i = i;
            cmp.split_j = j;
            const LIGraph& gi = report.graphs[static_cast<std::size_t>(i)];
            const LIGraph& gj = report.graphs[static_cast<std::size_t>(j)];
            for (int a = 0; a < gi.d; ++a) {
                for (int b = 0; b < gi.d; ++b) {
                    if (a != b && gi.edge(a, b) != gj.edge(a, b)) cmp.differing_edges.emplace_back(a, b);
                }
            }
            cmp.shd = static_cast<int>(cmp.differing_edges.size());
            report.comparisons.push_back(std::move(cmp));
        }
    }
    return report;
}

}  // namespace lcmito::ligraph
