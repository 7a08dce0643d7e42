#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lcmito/lcmtest.hpp"

namespace lcmito::ligraph {

using matcore::Matrix;
using sdesim::TrajectorySet;

// Directed graph over process coordinates. edge(a, b) means the history of
// coordinate a was found to influence the drift of coordinate b; self-loops
// are excluded by construction.
struct LIGraph {
    int d = 0;
    double level = 0.05;
    Matrix p_values;                       // p_values(a, b); diagonal fixed at 1
    Matrix weights;                        // |phi_tilde(b, a)| averaged over folds
    std::vector<std::uint8_t> edges;       // row-major a * d + b
    std::vector<std::uint8_t> degenerate;  // pairs whose variance collapsed

    bool edge(int a, int b) const { return edges[static_cast<std::size_t>(a) * d + b] != 0; }
    bool pair_degenerate(int a, int b) const { return degenerate[static_cast<std::size_t>(a) * d + b] != 0; }
    int edge_count() const;
};

// Runs the cross-fitted test for every ordered pair (a, b) with the
// conditioning set V \ {a}. One fold partition, built from the seed, is
// shared by all pairs, and so are the per-fold model fits. A pair whose
// test degenerates contributes no edge and is flagged instead of aborting
// the sweep. With bonferroni set, edge decisions use level / (d (d-1)).
LIGraph recover_lig(const TrajectorySet& data, int K, const ouest::EstimationConfig& config, double level,
                    std::uint64_t seed, bool bonferroni = false);

// Number of ordered pairs whose edge indicator differs.
int shd(const LIGraph& g1, const LIGraph& g2);

struct SplitComparison {
    int split_i = 0;
    int split_j = 0;
    int shd = 0;
    std::vector<std::pair<int, int>> differing_edges;
};

struct StabilityReport {
    std::vector<LIGraph> graphs;
    std::vector<SplitComparison> comparisons;
};

// Recovers one graph per fold-partition seed and reports all pairwise
// structural Hamming distances.
StabilityReport stability_report(const TrajectorySet& data, int n_splits, int K,
                                 const ouest::EstimationConfig& config, double level, std::uint64_t seed);

}  // namespace lcmito::ligraph
