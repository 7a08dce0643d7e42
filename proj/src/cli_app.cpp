#include "lcmito/cli_app.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "lcmito/csvio.hpp"
#include "lcmito/ligraph.hpp"
#include "lcmito/parallel.hpp"

namespace lcmito::cli {

using json = nlohmann::json;
using matcore::Matrix;
using matcore::Vector;

namespace {

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

std::vector<double> parse_real_list(const std::string& text, const char* what) {
    std::vector<double> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            values.push_back(std::stod(item, &pos));
            if (pos != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ValidationError(std::string(what) + ": bad number '" + item + "'");
        }
    }
    if (values.empty()) throw ValidationError(std::string(what) + ": empty list");
    return values;
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
    std::vector<int> values;
    for (double v : parse_real_list(text, what)) {
        if (v != std::floor(v)) throw ValidationError(std::string(what) + ": expected integers");
        values.push_back(static_cast<int>(v));
    }
    return values;
}

// Shared estimator options.
struct EstOpts {
    int stride = 10;
    double u = 10.0;
    bool pool_lags = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--stride", stride, "Training sample interval as a multiple of the grid delta")
            ->capture_default_str();
        cmd->add_option("--u", u, "Singular value truncation threshold (> 1)")->capture_default_str();
        cmd->add_flag("--pool-lags", pool_lags, "Average over all consecutive stride-spaced pairs");
    }
    ouest::EstimationConfig config() const { return ouest::EstimationConfig{stride, u, pool_lags}; }
    json echo() const { return json{{"stride", stride}, {"u", u}, {"pool_lags", pool_lags}}; }
};

struct SimulateCmd {
    std::uint64_t seed = 1;
    std::string out;
    int d = 10;
    double delta = 0.01;
    int steps = 100;
    int n_traj = 250;
    double sigma = 1.0;
    std::string model = "ou";
    bool exact = false;
    double edge_prob = 0.3;
    double diag = 2.0;
    std::string phi_csv;
    std::vector<std::string> set_edges;
    std::string diffusion_diag;

    Matrix build_phi() const {
        Matrix phi;
        if (!phi_csv.empty()) {
            phi = csvio::read_matrix_csv(phi_csv);
            if (phi.rows() != phi.cols()) throw ValidationError("--phi-csv: matrix must be square");
        } else {
            phi = sdesim::gen_random_phi(d, edge_prob, diag, derive_seed(seed, 0xf1));
        }
        for (const std::string& spec_text : set_edges) {
            const auto parts = parse_real_list(spec_text, "--set-edge");
            if (parts.size() != 3) throw ValidationError("--set-edge expects 'beta,alpha,value' (1-based)");
            const int b = static_cast<int>(parts[0]) - 1;
            const int a = static_cast<int>(parts[1]) - 1;
            if (b < 0 || b >= phi.rows() || a < 0 || a >= phi.cols()) {
                throw ValidationError("--set-edge: index out of range");
            }
            phi(b, a) = parts[2];
        }
        return phi;
    }

    int run() const {
        const Matrix phi = build_phi();
        const sdesim::TimeGrid grid{delta, steps};
        const std::uint64_t data_seed = derive_seed(seed, 0xda7a);
        sdesim::TrajectorySet data;
        if (model == "ou") {
            const sdesim::OUModel m{phi, sigma};
            data = exact ? sdesim::simulate_ou_exact(m, grid, n_traj, data_seed)
                         : sdesim::simulate_ou(m, grid, n_traj, data_seed);
        } else if (model == "nonlinear") {
            data = sdesim::simulate_nonlinear(sdesim::OUModel{phi, sigma}, grid, n_traj, data_seed);
        } else if (model == "aniso") {
            if (diffusion_diag.empty()) throw ValidationError("--model aniso requires --diffusion-diag");
            const auto scales = parse_real_list(diffusion_diag, "--diffusion-diag");
            Vector s(static_cast<Eigen::Index>(scales.size()));
            for (std::size_t i = 0; i < scales.size(); ++i) s(static_cast<Eigen::Index>(i)) = scales[i];
            data = sdesim::simulate_aniso(phi, s, grid, n_traj, data_seed);
        } else {
            throw ValidationError("--model must be one of ou, nonlinear, aniso");
        }
        csvio::emit_trajectories(data, out);
        return 0;
    }
};

struct EstimateCmd {
    std::string data_path;
    std::string out;
    EstOpts est;

    int run() const {
        const auto data = csvio::ingest_csv(data_path);
        const auto config = est.config();
        const auto model = ouest::fit(data, config);
        json j{{"d", data.dim},
               {"delta_c", config.delta_c(data.grid)},
               {"config_echo", est.echo()},
               {"u_used", model.u_used},
               {"phi_tilde", matrix_to_json(model.phi_tilde)},
               {"sigma_hat", matrix_to_json(model.sigma_hat)},
               {"f_hat", matrix_to_json(model.f_hat)},
               {"omega_hat", matrix_to_json(model.omega_hat)}};
        write_json(j, out);
        return 0;
    }
};

filter::QuerySpec build_query(int alpha_1based, int beta_1based, const std::string& cond_text, int d) {
    filter::QuerySpec query;
    query.alpha = alpha_1based - 1;
    query.beta = beta_1based - 1;
    if (cond_text.empty()) {
        for (int c = 0; c < d; ++c) {
            if (c != query.alpha) query.cond_set.push_back(c);
        }
    } else {
        for (int c : parse_int_list(cond_text, "--cond")) query.cond_set.push_back(c - 1);
    }
    query.validate(d);
    return query;
}

struct TestCmd {
    std::string data_path;
    std::string out;
    std::string gamma_csv;
    int alpha = 1;
    int beta = 2;
    std::string cond;
    int K = 3;
    double level = 0.05;
    std::uint64_t seed = 1;
    EstOpts est;

    int run() const {
        const auto data = csvio::ingest_csv(data_path);
        const auto query = build_query(alpha, beta, cond, data.dim);
        const auto result =
            lcmtest::run_crossfit_test(data, query, K, est.config(), level, derive_seed(seed, 0xf01d));
        const std::string gamma_path = gamma_csv.empty() ? out + ".gamma.csv" : gamma_csv;
        csvio::write_gamma_csv(result.gamma_path, data.grid, gamma_path);

        json cond_json = json::array();
        for (int c : query.cond_set) cond_json.push_back(c + 1);
        json per_fold = json::array();
        for (const auto& f : result.per_fold) {
            per_fold.push_back(json{{"variance_T", f.variance_T},
                                    {"gamma_sup", f.gamma_sup},
                                    {"sigma_row_sq", f.sigma_row_sq},
                                    {"degenerate", f.degenerate}});
        }
        json config_echo = est.echo();
        config_echo["K"] = K;
        config_echo["level"] = level;
        json j{{"query", json{{"alpha", alpha}, {"beta", beta}, {"cond_set", cond_json}}},
               {"statistic", result.statistic},
               {"p_value", result.p_value},
               {"variance_T", result.variance_T},
               {"degenerate", result.degenerate_variance},
               {"gamma_path_file", gamma_path},
               {"per_fold", per_fold},
               {"config_echo", config_echo},
               {"seed", seed}};
        write_json(j, out);
        return 0;
    }
};

struct DiscoverCmd {
    std::string data_path;
    std::string out;
    int K = 3;
    double level = 0.05;
    std::uint64_t seed = 1;
    bool bonferroni = false;
    int stability_splits = 0;
    EstOpts est;

    int run() const {
        const auto data = csvio::ingest_csv(data_path);
        const auto config = est.config();
        const auto graph = ligraph::recover_lig(data, K, config, level, derive_seed(seed, 0x91af), bonferroni);

        json edges = json::array();
        json degenerate_pairs = json::array();
        for (int a = 0; a < graph.d; ++a) {
            for (int b = 0; b < graph.d; ++b) {
                if (a == b) continue;
                if (graph.edge(a, b)) {
                    edges.push_back(json::array({a + 1, b + 1, graph.p_values(a, b), graph.weights(a, b)}));
                }
                if (graph.pair_degenerate(a, b)) degenerate_pairs.push_back(json::array({a + 1, b + 1}));
            }
        }
        json config_echo = est.echo();
        config_echo["K"] = K;
        config_echo["level"] = level;
        config_echo["bonferroni"] = bonferroni;
        json j{{"d", graph.d},
               {"edges", edges},
               {"degenerate_pairs", degenerate_pairs},
               {"config_echo", config_echo},
               {"seed", seed}};
        if (stability_splits >= 2) {
            const auto report =
                ligraph::stability_report(data, stability_splits, K, config, level, derive_seed(seed, 0x57ab));
            json comparisons = json::array();
            for (const auto& cmp : report.comparisons) {
                json differing = json::array();
                for (const auto& [a, b] : cmp.differing_edges) differing.push_back(json::array({a + 1, b + 1}));
                comparisons.push_back(json{{"split_i", cmp.split_i + 1},
                                           {"split_j", cmp.split_j + 1},
                                           {"shd", cmp.shd},
                                           {"differing_edges", differing}});
            }
            j["stability"] = json{{"n_splits", stability_splits}, {"comparisons", comparisons}};
        }
        write_json(j, out);
        return 0;
    }
};

struct ExperimentCmd {
    std::uint64_t seed = 1;
    std::string out;
    int d = 10;
    double delta = 0.01;
    int steps = 100;
    std::string n0_grid = "50,100,150,200,250";
    std::string signal_grid = "0,0.75";
    int phi_reps = 5;
    int reps = 50;
    int alpha = 1;
    int beta = 2;
    int K = 3;
    double level = 0.05;
    double sigma = 1.0;
    double edge_prob = 0.3;
    double diag = 2.0;
    EstOpts est;

    int run() const {
        const auto n0_values = parse_int_list(n0_grid, "--n0-grid");
        const auto signals = parse_real_list(signal_grid, "--signal-grid");
        if (phi_reps < 1 || reps < 1) throw ValidationError("--phi-reps and --reps must be positive");
        const sdesim::TimeGrid grid{delta, steps};
        const auto config = est.config();
        const int a0 = alpha - 1;
        const int b0 = beta - 1;

        std::ofstream table(out);
        if (!table) throw ValidationError("cannot open for writing: " + out);
        table << "n0,phi_ba,phi_rep,reps,rejections,degenerate,rate\n";

        filter::QuerySpec query;
        query.alpha = a0;
        query.beta = b0;
        for (int c = 0; c < d; ++c) {
            if (c != a0) query.cond_set.push_back(c);
        }
        query.validate(d);

        for (std::size_t ni = 0; ni < n0_values.size(); ++ni) {
            const int n0 = n0_values[ni];
            for (std::size_t si = 0; si < signals.size(); ++si) {
                const double signal = signals[si];
                int pooled_rejections = 0;
                int pooled_degenerate = 0;
                for (int pr = 0; pr < phi_reps; ++pr) {
                    const std::uint64_t phi_seed =
                        derive_seed(derive_seed(derive_seed(seed, 0xfee1), static_cast<std::uint64_t>(si)),
                                    static_cast<std::uint64_t>(pr));
                    Matrix phi = sdesim::gen_random_phi(d, edge_prob, diag, phi_seed);
                    phi(b0, a0) = signal;
                    const sdesim::OUModel model{phi, sigma};

                    std::vector<std::uint8_t> rejected(static_cast<std::size_t>(reps), 0);
                    std::vector<std::uint8_t> degenerate(static_cast<std::size_t>(reps), 0);
                    // Per-repetition seeds depend only on indices, so results
                    // do not depend on worker scheduling.
                    parallel_for(static_cast<std::size_t>(reps), [&](std::size_t rep) {
                        const std::uint64_t rep_seed = derive_seed(
                            derive_seed(derive_seed(derive_seed(derive_seed(seed, 0xda7a), ni), si),
                                        static_cast<std::uint64_t>(pr)),
                            rep);
                        const auto data = sdesim::simulate_ou(model, grid, n0, rep_seed);
                        const auto result = lcmtest::run_crossfit_test(data, query, K, config, level,
                                                                       derive_seed(rep_seed, 0xf01d));
                        rejected[rep] = result.p_value < level ? 1 : 0;
                        degenerate[rep] = result.degenerate_variance ? 1 : 0;
                    });
                    int n_rej = 0;
                    int n_deg = 0;
                    for (int r = 0; r < reps; ++r) {
                        n_rej += rejected[static_cast<std::size_t>(r)];
                        n_deg += degenerate[static_cast<std::size_t>(r)];
                    }
                    pooled_rejections += n_rej;
                    pooled_degenerate += n_deg;
                    table << n0 << ',' << signal << ',' << (pr + 1) << ',' << reps << ',' << n_rej << ',' << n_deg
                          << ',' << static_cast<double>(n_rej) / reps << "\n";
                }
                const int total = reps * phi_reps;
                table << n0 << ',' << signal << ",pooled," << total << ',' << pooled_rejections << ','
                      << pooled_degenerate << ',' << static_cast<double>(pooled_rejections) / total << "\n";
            }
        }
        if (!table) throw ValidationError("write failed: " + out);
        return 0;
    }
};

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Conditional local independence testing for linear Ito processes"};
    app.require_subcommand(1);

    SimulateCmd sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Generate synthetic trajectories and write the CSV");
    sim_cmd->set_config("--config", "", "Read options from a key=value file");
    sim_cmd->add_option("--seed", sim.seed, "Master seed")->capture_default_str();
    sim_cmd->add_option("--out", sim.out, "Output trajectory CSV")->required();
    sim_cmd->add_option("--d", sim.d, "Process dimension")->capture_default_str();
    sim_cmd->add_option("--delta", sim.delta, "Grid spacing")->capture_default_str();
    sim_cmd->add_option("--steps", sim.steps, "Number of grid steps (points minus one)")->capture_default_str();
    sim_cmd->add_option("--n-traj", sim.n_traj, "Number of trajectories")->capture_default_str();
    sim_cmd->add_option("--sigma", sim.sigma, "Isometric diffusion scale")->capture_default_str();
    sim_cmd->add_option("--model", sim.model, "ou | nonlinear | aniso")->capture_default_str();
    sim_cmd->add_flag("--exact", sim.exact, "Exact OU transition sampling instead of Euler-Maruyama");
    sim_cmd->add_option("--edge-prob", sim.edge_prob, "Off-diagonal edge probability")->capture_default_str();
    sim_cmd->add_option("--diag", sim.diag, "Diagonal value of the drift matrix")->capture_default_str();
    sim_cmd->add_option("--phi-csv", sim.phi_csv, "Use this drift matrix instead of a random draw");
    sim_cmd->add_option("--set-edge", sim.set_edges, "Override one drift entry: 'beta,alpha,value' (1-based)");
    sim_cmd->add_option("--diffusion-diag", sim.diffusion_diag, "Per-coordinate scales for --model aniso");

    EstimateCmd estc;
    auto* est_cmd = app.add_subcommand("estimate", "Fit the OU model from a trajectory CSV");
    est_cmd->set_config("--config", "", "Read options from a key=value file");
    est_cmd->add_option("--data", estc.data_path, "Input trajectory CSV")->required();
    est_cmd->add_option("--out", estc.out, "Output model JSON")->required();
    estc.est.attach(est_cmd);

    TestCmd testc;
    auto* test_cmd = app.add_subcommand("test", "Cross-fitted local independence test for one pair");
    test_cmd->set_config("--config", "", "Read options from a key=value file");
    test_cmd->add_option("--data", testc.data_path, "Input trajectory CSV")->required();
    test_cmd->add_option("--out", testc.out, "Output result JSON")->required();
    test_cmd->add_option("--gamma-csv", testc.gamma_csv, "Output path for (t, gamma) CSV");
    test_cmd->add_option("--alpha", testc.alpha, "Cause coordinate (1-based)")->capture_default_str();
    test_cmd->add_option("--beta", testc.beta, "Effect coordinate (1-based)")->capture_default_str();
    test_cmd->add_option("--cond", testc.cond, "Conditioning set, 1-based (default: all but alpha)");
    test_cmd->add_option("--K", testc.K, "Number of folds")->capture_default_str();
    test_cmd->add_option("--level", testc.level, "Significance level")->capture_default_str();
    test_cmd->add_option("--seed", testc.seed, "Fold shuffle seed")->capture_default_str();
    testc.est.attach(test_cmd);

    DiscoverCmd disc;
    auto* disc_cmd = app.add_subcommand("discover", "Recover the local independence graph");
    disc_cmd->set_config("--config", "", "Read options from a key=value file");
    disc_cmd->add_option("--data", disc.data_path, "Input trajectory CSV")->required();
    disc_cmd->add_option("--out", disc.out, "Output graph JSON")->required();
    disc_cmd->add_option("--K", disc.K, "Number of folds")->capture_default_str();
    disc_cmd->add_option("--level", disc.level, "Significance level")->capture_default_str();
    disc_cmd->add_option("--seed", disc.seed, "Fold shuffle seed")->capture_default_str();
    disc_cmd->add_flag("--bonferroni", disc.bonferroni, "Family-wise control across the d(d-1) tests");
    disc_cmd->add_option("--stability", disc.stability_splits, "Also compare graphs across this many fold seeds");
    disc.est.attach(disc_cmd);

    ExperimentCmd expc;
    auto* exp_cmd = app.add_subcommand("experiment", "Rejection-rate table over N0 and signal grids");
    exp_cmd->set_config("--config", "", "Read options from a key=value file");
    exp_cmd->add_option("--seed", expc.seed, "Master seed")->capture_default_str();
    exp_cmd->add_option("--out", expc.out, "Output table CSV")->required();
    exp_cmd->add_option("--d", expc.d, "Process dimension")->capture_default_str();
    exp_cmd->add_option("--delta", expc.delta, "Grid spacing")->capture_default_str();
    exp_cmd->add_option("--steps", expc.steps, "Number of grid steps")->capture_default_str();
    exp_cmd->add_option("--n0-grid", expc.n0_grid, "Sample sizes, comma separated")->capture_default_str();
    exp_cmd->add_option("--signal-grid", expc.signal_grid, "Values for the tested drift entry; 0 measures size")
        ->capture_default_str();
    exp_cmd->add_option("--phi-reps", expc.phi_reps, "Random drift replicates per setting")->capture_default_str();
    exp_cmd->add_option("--reps", expc.reps, "Repetitions per drift replicate")->capture_default_str();
    exp_cmd->add_option("--alpha", expc.alpha, "Cause coordinate (1-based)")->capture_default_str();
    exp_cmd->add_option("--beta", expc.beta, "Effect coordinate (1-based)")->capture_default_str();
    exp_cmd->add_option("--K", expc.K, "Number of folds")->capture_default_str();
    exp_cmd->add_option("--level", expc.level, "Significance level")->capture_default_str();
    exp_cmd->add_option("--sigma", expc.sigma, "Isometric diffusion scale")->capture_default_str();
    exp_cmd->add_option("--edge-prob", expc.edge_prob, "Off-diagonal edge probability")->capture_default_str();
    exp_cmd->add_option("--diag", expc.diag, "Diagonal value of the drift matrix")->capture_default_str();
    expc.est.attach(exp_cmd);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (sim_cmd->parsed()) return sim.run();
        if (est_cmd->parsed()) return estc.run();
        if (test_cmd->parsed()) return testc.run();
        if (disc_cmd->parsed()) return disc.run();
        if (exp_cmd->parsed()) return expc.run();
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

int run_cli(int argc, const char* const* argv) {
    std::vector<std::string> args;
    args.reserve(static_cast<std::size_t>(argc > 0 ? argc - 1 : 0));
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args);
}

}  // namespace lcmito::cli
