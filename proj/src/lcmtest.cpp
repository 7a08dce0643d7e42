#include "lcmito/lcmtest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace lcmito::lcmtest {

namespace {
constexpr double kDegenerateVariance = 1e-12;
}

std::vector<std::vector<int>> FoldPartition::fold_indices() const {
    std::vector<std::vector<int>> folds(static_cast<std::size_t>(K));
    for (std::size_t j = 0; j < assignment.size(); ++j) {
        folds[static_cast<std::size_t>(assignment[j])].push_back(static_cast<int>(j));
    }
    return folds;
}

std::vector<int> FoldPartition::complement_indices(int fold) const {
    std::vector<int> out;
    out.reserve(assignment.size());
    for (std::size_t j = 0; j < assignment.size(); ++j) {
        if (assignment[j] != fold) out.push_back(static_cast<int>(j));
    }
    return out;
}

void FoldPartition::validate() const {
    if (K < 2) throw ValidationError("FoldPartition: K must be >= 2");
    std::vector<int> sizes(static_cast<std::size_t>(K), 0);
    for (int a : assignment) {
        if (a < 0 || a >= K) throw ValidationError("FoldPartition: assignment outside [0, K)");
        ++sizes[static_cast<std::size_t>(a)];
    }
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    if (*lo == 0) throw ValidationError("FoldPartition: empty fold");
    if (*hi - *lo > 1) throw ValidationError("FoldPartition: fold sizes differ by more than one");
}

FoldPartition make_folds(int n0, int K, std::uint64_t seed) {
    if (K < 2) throw ValidationError("make_folds: K must be >= 2");
    if (n0 < 2 * K) throw ValidationError("make_folds: need at least 2K trajectories");
    std::vector<int> order(static_cast<std::size_t>(n0));
    std::iota(order.begin(), order.end(), 0);
    RngStream rs(derive_seed(seed, 0x0f01d5));
    // Fisher-Yates with an explicit stream keeps partitions platform-stable.
    for (int i = n0 - 1; i > 0; --i) {
        const auto j = static_cast<int>(rs.uniform_below(static_cast<std::uint64_t>(i) + 1));
        std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    FoldPartition part;
    part.K = K;
    part.assignment.assign(static_cast<std::size_t>(n0), 0);
    for (int pos = 0; pos < n0; ++pos) {
        part.assignment[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])] = pos % K;
    }
    part.validate();
    return part;
}

std::vector<Vector> residual_paths(const TrajectorySet& data, const std::vector<int>& eval_idx,
                                   const filter::FilterPaths& paths, int alpha) {
    if (paths.pi_hat.size() != eval_idx.size()) throw ValidationError("residual_paths: path count mismatch");
    std::vector<Vector> g(eval_idx.size());
    for (std::size_t i = 0; i < eval_idx.size(); ++i) {
        g[i] = data.traj(eval_idx[i]).col(alpha) - paths.pi_hat[i];
    }
    return g;
}

std::vector<double> compute_lcm(const TrajectorySet& data, const std::vector<int>& eval_idx,
                                const filter::FilterPaths& paths, const filter::QuerySpec& query) {
    if (eval_idx.empty()) throw ValidationError("compute_lcm: empty evaluation set");
    if (paths.pi_hat.size() != eval_idx.size() || paths.mu_hat.size() != eval_idx.size()) {
        throw ValidationError("compute_lcm: filter paths do not match the evaluation set");
    }
    const int n = data.grid.n_steps;
    const double delta = data.grid.delta;
    const double inv_n_eval = 1.0 / static_cast<double>(eval_idx.size());

    std::vector<double> gamma(static_cast<std::size_t>(n) + 1, 0.0);
    for (std::size_t i = 0; i < eval_idx.size(); ++i) {
        const Matrix& path = data.traj(eval_idx[i]);
        const Vector& pi = paths.pi_hat[i];
        const Vector& mu = paths.mu_hat[i];
        if (pi.size() != n + 1 || mu.size() != n + 1) throw ValidationError("compute_lcm: path length mismatch");
        for (int k = 1; k <= n; ++k) {
            const double g_prev = path(k - 1, query.alpha) - pi(k - 1);
            const double dm = path(k, query.beta) - path(k - 1, query.beta) - delta * mu(k - 1);
            gamma[static_cast<std::size_t>(k)] += g_prev * dm;
        }
    }
    double running = 0.0;
    for (int k = 1; k <= n; ++k) {
        running += gamma[static_cast<std::size_t>(k)] * inv_n_eval;
        gamma[static_cast<std::size_t>(k)] = running;
    }
    return gamma;
}

std::vector<double> compute_variance(const Vector& sigma_row_beta, const std::vector<Vector>& g_paths,
                                     const TimeGrid& grid) {
    if (g_paths.empty()) throw ValidationError("compute_variance: no residual paths");
    const int n = grid.n_steps;
    const double delta = grid.delta;
    const double row_sq = sigma_row_beta.squaredNorm();
    const double inv_n_eval = 1.0 / static_cast<double>(g_paths.size());

    std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
    for (const Vector& g : g_paths) {
        if (g.size() != n + 1) throw ValidationError("compute_variance: path length mismatch");
        for (int k = 1; k <= n; ++k) {
            v[static_cast<std::size_t>(k)] += g(k - 1) * g(k - 1);
        }
    }
    double running = 0.0;
    for (int k = 1; k <= n; ++k) {
        running += v[static_cast<std::size_t>(k)] * delta * inv_n_eval * row_sq;
        v[static_cast<std::size_t>(k)] = running;
    }
    return v;
}

double sup_brownian_cdf(double x, double horizon) {
    if (!(horizon > 0.0)) throw ValidationError("sup_brownian_cdf: horizon must be positive");
    if (!(x > 0.0)) return 0.0;
    const double a = M_PI * M_PI * horizon / (8.0 * x * x);
    // Alternating series with Kahan compensation; terms decay like
    // exp(-a (2i+1)^2) / (2i+1).
    double sum = 0.0;
    double comp = 0.0;
    double sign = 1.0;
    for (long i = 0;; ++i) {
        const double odd = 2.0 * static_cast<double>(i) + 1.0;
        const double term = sign * std::exp(-a * odd * odd) / odd;
        const double yc = term - comp;
        const double t = sum + yc;
        comp = (t - sum) - yc;
        sum = t;
        sign = -sign;
        const double next_odd = odd + 2.0;
        if (std::exp(-a * next_odd * next_odd) / next_odd < 1e-16) break;
    }
    return std::clamp(4.0 / M_PI * sum, 0.0, 1.0);
}

double sup_brownian_quantile(double level, double horizon) {
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("sup_brownian_quantile: level outside (0, 1)");
    if (!(horizon > 0.0)) throw ValidationError("sup_brownian_quantile: horizon must be positive");
    double lo = 0.0;
    double hi = 4.0 * std::sqrt(horizon);
    while (sup_brownian_cdf(hi, horizon) < level) hi *= 2.0;
    // The CDF is strictly increasing and continuous, so plain bisection
    // converges; iterate until the function gap closes.
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f = sup_brownian_cdf(mid, horizon);
        if (std::abs(f - level) <= 1e-10) return mid;
        if (f < level) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

namespace {

struct FoldOutcome {
    std::vector<double> gamma;
    double variance_T = 0.0;
    FoldDiagnostics diag;
};

FoldOutcome evaluate_split(const TrajectorySet& data, const filter::QuerySpec& query,
                           const ouest::EstimatedOUModel& model, const std::vector<int>& eval_idx) {
    FoldOutcome out;
    const filter::FilterPaths paths = filter::run_filter(model.phi_tilde, data, eval_idx, query);
    out.gamma = compute_lcm(data, eval_idx, paths, query);
    const auto g = residual_paths(data, eval_idx, paths, query.alpha);
    const Vector sigma_row = model.sigma_hat.row(query.beta).transpose();
    const auto v = compute_variance(sigma_row, g, data.grid);
    out.variance_T = v.back();
    out.diag.variance_T = out.variance_T;
    out.diag.sigma_row_sq = sigma_row.squaredNorm();
    double sup = 0.0;
    for (double gk : out.gamma) sup = std::max(sup, std::abs(gk));
    out.diag.gamma_sup = sup;
    out.diag.degenerate = out.variance_T <= kDegenerateVariance;
    return out;
}

TestResult finalize(std::vector<double> gamma, double variance_T, double n_effective, double horizon) {
    TestResult result;
    result.gamma_path = std::move(gamma);
    result.variance_T = variance_T;
    double sup = 0.0;
    for (double g : result.gamma_path) sup = std::max(sup, std::abs(g));
    if (variance_T <= kDegenerateVariance) {
        result.degenerate_variance = true;
        result.statistic = 0.0;
        result.p_value = 1.0;
        return result;
    }
    result.statistic = std::sqrt(n_effective / variance_T) * sup;
    result.p_value = 1.0 - sup_brownian_cdf(result.statistic, horizon);
    return result;
}

void check_level(double level) {
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("test: level outside (0, 1)");
}

}  // namespace

TestResult run_test(const TrajectorySet& data, const filter::QuerySpec& query, const std::vector<int>& train_idx,
                    const std::vector<int>& eval_idx, const ouest::EstimationConfig& config, double level) {
    check_level(level);
    query.validate(data.dim);
    if (train_idx.empty() || eval_idx.empty()) throw ValidationError("run_test: empty train or eval set");
    std::vector<uint8_t> in_train(static_cast<std::size_t>(data.n_traj()), 0);
    for (int j : train_idx) in_train[static_cast<std::size_t>(j)] = 1;
    for (int j : eval_idx) {
        if (in_train[static_cast<std::size_t>(j)]) throw ValidationError("run_test: train and eval sets overlap");
    }

    TrajectorySet train;
    train.grid = data.grid;
    train.dim = data.dim;
    train.paths.reserve(train_idx.size());
    for (int j : train_idx) train.paths.push_back(data.traj(j));
    const ouest::EstimatedOUModel model = ouest::fit(train, config);

    FoldOutcome out = evaluate_split(data, query, model, eval_idx);
    TestResult result = finalize(std::move(out.gamma), out.variance_T, static_cast<double>(eval_idx.size()),
                                 data.grid.horizon());
    result.per_fold.push_back(out.diag);
    return result;
}

TestResult run_crossfit_with_models(const TrajectorySet& data, const filter::QuerySpec& query,
                                    const FoldPartition& folds, const std::vector<ouest::EstimatedOUModel>& models,
                                    double level) {
    check_level(level);
    query.validate(data.dim);
    folds.validate();
    if (static_cast<int>(models.size()) != folds.K) throw ValidationError("run_crossfit: one model per fold required");
    const auto fold_idx = folds.fold_indices();

    const std::size_t n_points = static_cast<std::size_t>(data.grid.n_steps) + 1;
    std::vector<double> gamma_k(n_points, 0.0);
    double variance_k = 0.0;
    std::vector<FoldDiagnostics> diagnostics;
    diagnostics.reserve(static_cast<std::size_t>(folds.K));
    for (int k = 0; k < folds.K; ++k) {
        FoldOutcome out = evaluate_split(data, query, models[static_cast<std::size_t>(k)],
                                         fold_idx[static_cast<std::size_t>(k)]);
        for (std::size_t i = 0; i < n_points; ++i) gamma_k[i] += out.gamma[i] / folds.K;
        variance_k += out.variance_T / folds.K;
        diagnostics.push_back(out.diag);
    }
    TestResult result =
        finalize(std::move(gamma_k), variance_k, static_cast<double>(data.n_traj()), data.grid.horizon());
    result.per_fold = std::move(diagnostics);
    return result;
}

TestResult run_crossfit_test(const TrajectorySet& data, const filter::QuerySpec& query, const FoldPartition& folds,
                             const ouest::EstimationConfig& config, double level) {
    folds.validate();
    if (static_cast<int>(folds.assignment.size()) != data.n_traj()) {
        throw ValidationError("run_crossfit_test: partition size does not match the data");
    }
    std::vector<ouest::EstimatedOUModel> models;
    models.reserve(static_cast<std::size_t>(folds.K));
    for (int k = 0; k < folds.K; ++k) {
        TrajectorySet train;
        train.grid = data.grid;
        train.dim = data.dim;
        for (int j : folds.complement_indices(k)) train.paths.push_back(data.traj(j));
        models.push_back(ouest::fit(train, config));
    }
    return run_crossfit_with_models(data, query, folds, models, level);
}

TestResult run_crossfit_test(const TrajectorySet& data, const filter::QuerySpec& query, int K,
                             const ouest::EstimationConfig& config, double level, std::uint64_t seed) {
    if (K < 2) throw ValidationError("run_crossfit_test: K must be >= 2");
    if (data.n_traj() < 2 * K) throw ValidationError("run_crossfit_test: need N0 >= 2K trajectories");
    return run_crossfit_test(data, query, make_folds(data.n_traj(), K, seed), config, level);
}

}  // namespace lcmito::lcmtest
