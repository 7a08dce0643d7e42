#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lcmito/ouest.hpp"

using lcmito::derive_seed;
using lcmito::RngStream;
using lcmito::matcore::mat_exp;
using lcmito::matcore::Matrix;
using lcmito::matcore::spectral_norm;
using lcmito::matcore::Vector;
using namespace lcmito::ouest;
using lcmito::sdesim::OUModel;
using lcmito::sdesim::TimeGrid;
using lcmito::sdesim::TrajectorySet;

namespace {

Matrix scalar(double v) {
    Matrix m(1, 1);
    m << v;
    return m;
}

// Builds a two-point trajectory set from explicit (X_0, X_1) rows.
TrajectorySet pair_data(const Matrix& x0, const Matrix& x1, double delta = 0.1) {
    TrajectorySet data;
    data.grid = TimeGrid{delta, 1};
    data.dim = static_cast<int>(x0.cols());
    for (Eigen::Index j = 0; j < x0.rows(); ++j) {
        Matrix traj(2, x0.cols());
        traj.row(0) = x0.row(j);
        traj.row(1) = x1.row(j);
        data.paths.push_back(std::move(traj));
    }
    return data;
}

Matrix random_rows(int n, int d, std::uint64_t seed) {
    RngStream rs(seed);
    Matrix m(n, d);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < d; ++c) m(r, c) = rs.normal();
    }
    return m;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_SUITE("ouest") {

TEST_CASE("estimate_F recovers an exact linear map from noiseless pairs") {
    const int d = 3;
    Matrix f(3, 3);
    f << 0.9, 0.1, 0.0, -0.2, 0.8, 0.05, 0.0, 0.1, 1.1;
    const Matrix x0 = random_rows(d + 2, d, 21);
    const Matrix x1 = x0 * f.transpose();
    const auto data = pair_data(x0, x1);
    EstimationConfig config{1, 10.0, false};
    CHECK((estimate_F(data, config) - f).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("estimate_F of the identity map is the identity") {
    const Matrix x0 = random_rows(8, 3, 22);
    const auto data = pair_data(x0, x0);
    EstimationConfig config{1, 10.0, false};
    CHECK((estimate_F(data, config) - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("estimate_F error shrinks like the square root of the sample size") {
    Matrix phi(3, 3);
    phi << -1.0, 0.4, 0.0, 0.2, -0.8, 0.3, 0.0, 0.0, -1.2;
    const OUModel model{phi, 1.0};
    const double delta_c = 0.1;
    const Matrix f_true = mat_exp(phi, delta_c);
    EstimationConfig config{1, 10.0, false};

    std::vector<double> errors;
    for (int n : {100, 1000, 10000}) {
        const auto data = lcmito::sdesim::simulate_ou_exact(model, TimeGrid{delta_c, 1}, n, 23);
        errors.push_back(spectral_norm(estimate_F(data, config) - f_true));
    }
    CHECK(errors[1] < errors[0]);
    CHECK(errors[2] < errors[1]);
    // Hundredfold more data should cut the error by roughly tenfold.
    CHECK(errors[2] < 0.3 * errors[0]);
}

TEST_CASE("estimate_F requires enough trajectories") {
    const Matrix x0 = random_rows(3, 3, 24);
    const auto data = pair_data(x0, x0);
    EstimationConfig config{1, 10.0, false};
    CHECK_THROWS_AS(estimate_F(data, config), lcmito::ValidationError);
}

TEST_CASE("estimate_phi maps the identity to zero drift") {
    const auto [phi_tilde, phi_bar] = estimate_phi(Matrix::Identity(3, 3), 0.1, 10.0);
    CHECK(phi_bar.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(phi_tilde.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("estimate_phi scalar Cayley value") {
    const auto [phi_tilde, phi_bar] = estimate_phi(scalar(std::exp(-0.1)), 0.1, 10.0);
    // (2/0.1)(e^{-0.1} - 1)/(e^{-0.1} + 1)
    CHECK(phi_bar(0, 0) == doctest::Approx(-0.9991674991576).epsilon(1e-9));
    CHECK(phi_tilde(0, 0) == doctest::Approx(phi_bar(0, 0)).epsilon(1e-12));
}

TEST_CASE("estimate_phi truncation clips strong drift") {
    // F chosen so that the first clipping stage stays inactive and
    // phi_bar = -20; then sigma(I - phi_bar) = 21 clips to u = 10.
    const double delta_c = 0.1;
    const double phi_target = -20.0;
    const double f = (2.0 + delta_c * phi_target) / (2.0 - delta_c * phi_target);  // Cayley inverse
    const auto [phi_tilde, phi_bar] = estimate_phi(scalar(f), delta_c, 10.0);
    CHECK(phi_bar(0, 0) == doctest::Approx(-20.0).epsilon(1e-10));
    CHECK(phi_tilde(0, 0) == doctest::Approx(-9.0).epsilon(1e-10));
}

TEST_CASE("estimate_phi non-clipping bias is second order in delta_c") {
    Matrix phi(2, 2);
    phi << -0.8, 0.3, 0.1, -1.1;
    auto bias = [&](double delta_c) {
        const Matrix f = mat_exp(phi, delta_c);
        return spectral_norm(estimate_phi(f, delta_c, 1000.0).first - phi);
    };
    const double coarse = bias(0.1);
    const double fine = bias(0.05);
    CHECK(coarse / fine >= 3.5);
}

TEST_CASE("phi_tilde always satisfies the singular value constraint") {
    RngStream rs(25);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix f(3, 3);
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) f(r, c) = 3.0 * rs.normal();
        }
        const double u = 10.0;
        const auto [phi_tilde, phi_bar] = estimate_phi(f, 0.1, u);
        const Eigen::JacobiSVD<Matrix> svd(Matrix::Identity(3, 3) - phi_tilde);
        for (int i = 0; i < 3; ++i) {
            CHECK(svd.singularValues()(i) >= 1.0 / u - 1e-8);
            CHECK(svd.singularValues()(i) <= u + 1e-8);
        }
    }
}

TEST_CASE("estimate_omega is zero for exact linear pairs") {
    Matrix f(2, 2);
    f << 0.9, 0.1, -0.1, 0.8;
    const Matrix x0 = random_rows(10, 2, 26);
    const auto data = pair_data(x0, Matrix(x0 * f.transpose()));
    EstimationConfig config{1, 10.0, false};
    CHECK(estimate_omega(data, f, config).cwiseAbs().maxCoeff() < 1e-20);
}

TEST_CASE("estimate_omega recovers the residual covariance") {
    // X_1 = X_0 + e with e ~ N(0, I): residuals against F = I are pure noise.
    const int n = 100000;
    const Matrix x0 = random_rows(n, 2, 27);
    const Matrix noise = random_rows(n, 2, 28);
    const auto data = pair_data(x0, Matrix(x0 + noise));
    EstimationConfig config{1, 10.0, false};
    const Matrix omega = estimate_omega(data, Matrix::Identity(2, 2), config);
    CHECK((omega - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 0.02);
}

TEST_CASE("estimate_omega output is exactly symmetric") {
    Matrix f(2, 2);
    f << 0.9, 0.2, 0.0, 0.7;
    const auto data = pair_data(random_rows(50, 2, 29), random_rows(50, 2, 30));
    EstimationConfig config{1, 10.0, false};
    const Matrix omega = estimate_omega(data, f, config);
    CHECK((omega - omega.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("estimate_omega rejects too few pairs") {
    const Matrix x0 = random_rows(3, 2, 31);
    const auto data = pair_data(x0, x0);
    EstimationConfig config{1, 10.0, false};
    CHECK_THROWS_AS(estimate_omega(data, Matrix::Identity(2, 2), config), lcmito::ValidationError);
}

TEST_CASE("estimate_sigma scalar closed form") {
    const double phi = -1.0;
    const double delta_c = 0.1;
    const double f = std::exp(phi * delta_c);
    const double omega = (std::exp(2.0 * phi * delta_c) - 1.0) / (2.0 * phi);
    const Matrix sigma = estimate_sigma(scalar(f), scalar(phi), scalar(omega));
    CHECK(sigma(0, 0) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("estimate_sigma of a zero residual covariance is zero") {
    Matrix f(2, 2);
    f << 0.9, 0.1, 0.0, 0.8;
    Matrix phi(2, 2);
    phi << -1.0, 1.0, 0.0, -2.0;
    CHECK(estimate_sigma(f, phi, Matrix::Zero(2, 2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("estimate_sigma from simulated data approaches sigma^2 I") {
    Matrix phi = Matrix::Zero(2, 2);
    phi(0, 0) = -1.0;
    phi(1, 1) = -0.5;
    const OUModel model{phi, 1.0};
    const double delta_c = 0.1;
    const auto data = lcmito::sdesim::simulate_ou_exact(model, TimeGrid{delta_c, 1}, 10000, 32);
    EstimationConfig config{1, 10.0, false};
    const auto est = fit(data, config);
    CHECK((est.sigma_hat - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 0.1);
}

TEST_CASE("fit on the synthetic protocol keeps the invariant") {
    const Matrix phi = lcmito::sdesim::gen_random_phi(10, 0.3, 2.0, 33);
    const OUModel model{phi, 1.0};
    const auto data = lcmito::sdesim::simulate_ou(model, TimeGrid{0.01, 100}, 100, 34);
    EstimationConfig config{10, 10.0, false};
    const auto est = fit(data, config);
    CHECK(est.phi_tilde.allFinite());
    CHECK(est.sigma_hat.allFinite());
    const Eigen::JacobiSVD<Matrix> svd(Matrix::Identity(10, 10) - est.phi_tilde);
    CHECK(svd.singularValues().maxCoeff() <= config.u + 1e-8);
    CHECK(svd.singularValues().minCoeff() >= 1.0 / config.u - 1e-8);
    CHECK(est.u_used == config.u);
}

TEST_CASE("fit is deterministic") {
    const Matrix phi = lcmito::sdesim::gen_random_phi(4, 0.3, 2.0, 35);
    const auto data = lcmito::sdesim::simulate_ou(OUModel{phi, 1.0}, TimeGrid{0.01, 50}, 50, 36);
    EstimationConfig config{5, 10.0, false};
    const auto a = fit(data, config);
    const auto b = fit(data, config);
    CHECK((a.phi_tilde - b.phi_tilde).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.sigma_hat - b.sigma_hat).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fit median drift error decreases along the consistency schedule") {
    // delta_c ~ N_c^{-1/6} with exact transitions; the spectral error median
    // over 20 repetitions must fall as the sample grows.
    Matrix phi(3, 3);
    phi << -1.0, 0.5, 0.0, 0.3, -1.5, 0.2, 0.0, 0.4, -0.8;
    const OUModel model{phi, 1.0};
    std::vector<double> medians;
    for (int nc : {500, 5000, 50000}) {
        const double delta_c = 0.35 / std::pow(static_cast<double>(nc), 1.0 / 6.0);
        std::vector<double> errors;
        for (int rep = 0; rep < 20; ++rep) {
            const auto data = lcmito::sdesim::simulate_ou_exact(model, TimeGrid{delta_c, 1}, nc,
                                                                derive_seed(37, static_cast<std::uint64_t>(rep)));
            EstimationConfig config{1, 10.0, false};
            errors.push_back(spectral_norm(fit(data, config).phi_tilde - phi));
        }
        medians.push_back(median(errors));
    }
    CHECK(medians[1] < medians[0]);
    CHECK(medians[2] < medians[1]);
}

TEST_CASE("pooled lags walk the grid with the configured stride") {
    // Deterministic staircase paths: stride-2 pairs are (x_0, x_2), (x_2, x_4),
    // (x_4, x_6); the pooled moment equations are checked by hand.
    TrajectorySet data;
    data.grid = TimeGrid{0.1, 6};
    data.dim = 1;
    Matrix traj(7, 1);
    traj << 1, 2, 3, 4, 5, 6, 7;
    for (int j = 0; j < 4; ++j) data.paths.push_back(traj * (j + 1));
    EstimationConfig pooled{2, 10.0, true};

    double c_lag = 0.0;
    double c_zero = 0.0;
    for (int j = 0; j < 4; ++j) {
        const double scale = j + 1.0;
        for (int k = 0; k + 2 <= 6; k += 2) {
            c_lag += traj(k + 2, 0) * scale * traj(k, 0) * scale;
            c_zero += traj(k, 0) * scale * traj(k, 0) * scale;
        }
    }
    CHECK(estimate_F(data, pooled)(0, 0) == doctest::Approx(c_lag / c_zero).epsilon(1e-12));
}

}  // TEST_SUITE
