#pragma once

#include <cstdint>
#include <vector>

#include "lcmito/filter.hpp"
#include "lcmito/ouest.hpp"

namespace lcmito::lcmtest {

using matcore::Matrix;
using matcore::Vector;
using sdesim::TimeGrid;
using sdesim::TrajectorySet;

struct FoldPartition {
    std::vector<int> assignment;  // trajectory index -> fold in [0, K)
    int K = 0;

    std::vector<std::vector<int>> fold_indices() const;
    std::vector<int> complement_indices(int fold) const;
    void validate() const;  // folds cover, disjoint by construction, sizes within 1
};

// Seeded shuffle followed by round-robin assignment; fold sizes differ by
// at most one.
FoldPartition make_folds(int n0, int K, std::uint64_t seed);

struct FoldDiagnostics {
    double variance_T = 0.0;
    double gamma_sup = 0.0;
    double sigma_row_sq = 0.0;  // squared norm of the beta row of sigma_hat
    bool degenerate = false;
};

struct TestResult {
    std::vector<double> gamma_path;  // one value per grid point, starts at 0
    double variance_T = 0.0;
    double statistic = 0.0;
    double p_value = 1.0;
    bool degenerate_variance = false;
    std::vector<FoldDiagnostics> per_fold;
};

// Residual paths G_j = X_alpha,j - Pi_j for the given evaluation set.
std::vector<Vector> residual_paths(const TrajectorySet& data, const std::vector<int>& eval_idx,
                                   const filter::FilterPaths& paths, int alpha);

// Estimated local covariance path: the running sum over grid steps of the
// averaged products G_{j,k-1} {dX_beta,k - delta mu_{j,k-1}}.
std::vector<double> compute_lcm(const TrajectorySet& data, const std::vector<int>& eval_idx,
                                const filter::FilterPaths& paths, const filter::QuerySpec& query);

// Plug-in variance path: |sigma_row_beta|^2 averaged left-endpoint Riemann
// sums of G^2.
std::vector<double> compute_variance(const Vector& sigma_row_beta, const std::vector<Vector>& g_paths,
                                     const TimeGrid& grid);

// Distribution function of sup |W| over [0, horizon] for a standard Wiener
// process, via the alternating series summed to term magnitude < 1e-16.
double sup_brownian_cdf(double x, double horizon);

// Inverse of the above by bisection, |F(z) - level| <= 1e-10.
double sup_brownian_quantile(double level, double horizon);

// Single-split test: fit on train_idx, filter and evaluate on eval_idx.
TestResult run_test(const TrajectorySet& data, const filter::QuerySpec& query, const std::vector<int>& train_idx,
                    const std::vector<int>& eval_idx, const ouest::EstimationConfig& config, double level);

// K-fold cross-fitted test. The overload taking a partition and prefitted
// per-fold models exists so that graph recovery can reuse one model fit per
// fold across all coordinate pairs.
TestResult run_crossfit_test(const TrajectorySet& data, const filter::QuerySpec& query, int K,
                             const ouest::EstimationConfig& config, double level, std::uint64_t seed);
TestResult run_crossfit_test(const TrajectorySet& data, const filter::QuerySpec& query, const FoldPartition& folds,
                             const ouest::EstimationConfig& config, double level);
TestResult run_crossfit_with_models(const TrajectorySet& data, const filter::QuerySpec& query,
                                    const FoldPartition& folds, const std::vector<ouest::EstimatedOUModel>& models,
                                    double level);

}  // namespace lcmito::lcmtest
