#include "lcmito/filter.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#include "lcmito/parallel.hpp"

namespace lcmito::filter {

void QuerySpec::validate(int d) const {
    if (alpha < 0 || alpha >= d) throw ValidationError("QuerySpec: alpha outside [0, d)");
    if (beta < 0 || beta >= d) throw ValidationError("QuerySpec: beta outside [0, d)");
    if (alpha == beta) throw ValidationError("QuerySpec: alpha must differ from beta");
    if (cond_set.empty()) throw ValidationError("QuerySpec: conditioning set is empty");
    std::vector<int> sorted = cond_set;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw ValidationError("QuerySpec: conditioning set has duplicate indices");
    }
    for (int c : cond_set) {
        if (c < 0 || c >= d) throw ValidationError("QuerySpec: conditioning index outside [0, d)");
        if (c == alpha) throw ValidationError("QuerySpec: alpha must not be in the conditioning set");
    }
    if (!std::binary_search(sorted.begin(), sorted.end(), beta)) {
        throw ValidationError("QuerySpec: beta must be in the conditioning set");
    }
}

std::vector<int> QuerySpec::latent_set(int d) const {
    std::vector<uint8_t> in_c(static_cast<std::size_t>(d), 0);
    for (int c : cond_set) in_c[static_cast<std::size_t>(c)] = 1;
    std::vector<int> latent;
    latent.reserve(static_cast<std::size_t>(d) - cond_set.size());
    for (int i = 0; i < d; ++i) {
        if (!in_c[static_cast<std::size_t>(i)]) latent.push_back(i);
    }
    return latent;
}

int QuerySpec::alpha_position(int d) const {
    const auto latent = latent_set(d);
    const auto it = std::find(latent.begin(), latent.end(), alpha);
    if (it == latent.end()) throw ValidationError("QuerySpec: alpha is not a latent coordinate");
    return static_cast<int>(it - latent.begin());
}

namespace {

Matrix take(const Matrix& m, const std::vector<int>& rows, const std::vector<int>& cols) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(rows[r], cols[c]);
        }
    }
    return out;
}

}  // namespace

Blocks split_blocks(const Matrix& phi, const QuerySpec& query) {
    const int d = static_cast<int>(phi.rows());
    query.validate(d);
    const auto latent = query.latent_set(d);
    Blocks b;
    b.phi_vc = take(phi, latent, latent);
    b.phi_vc_c = take(phi, latent, query.cond_set);
    b.phi_c_vc = take(phi, query.cond_set, latent);
    b.phi_c = take(phi, query.cond_set, query.cond_set);
    b.phi_beta_vc = take(phi, {query.beta}, latent).transpose();
    b.phi_beta_c = take(phi, {query.beta}, query.cond_set).transpose();
    return b;
}

std::pair<Matrix, Matrix> initial_values(const Matrix& phi, const QuerySpec& query) {
    const int d = static_cast<int>(phi.rows());
    query.validate(d);
    matcore::require_finite(phi, "initial_values: phi");
    const Matrix im_phi = Matrix::Identity(d, d) - phi;
    const Matrix b = matcore::solve(im_phi, Matrix::Identity(d, d));
    const Matrix upsilon = b * b.transpose();

    const auto latent = query.latent_set(d);
    const Matrix ups_vc = take(upsilon, latent, latent);
    const Matrix ups_vc_c = take(upsilon, latent, query.cond_set);
    const Matrix ups_c = take(upsilon, query.cond_set, query.cond_set);

    // m0_coef = Ups_{vc,C} Ups_C^{-1}; Ups_C is symmetric.
    const Matrix m0_coef = matcore::solve(ups_c, ups_vc_c.transpose()).transpose();
    Matrix y0 = ups_vc - m0_coef * ups_vc_c.transpose();
    y0 = 0.5 * (y0 + y0.transpose());
    return {m0_coef, y0};
}

namespace {

struct RiccatiRhs {
    Matrix drift;     // Phi_vc
    Matrix feedback;  // Phi_c_vc^T Phi_c_vc

    Matrix operator()(const Matrix& y) const {
        return drift * y + y * drift.transpose() + Matrix::Identity(y.rows(), y.cols()) - y * feedback * y;
    }
};

void check_riccati_state(const Matrix& y, double t) {
    if (!y.allFinite()) {
        std::ostringstream msg;
        msg << "solve_riccati: covariance blew up before t = " << t;
        throw NumericError(msg.str());
    }
}

void check_psd(const Matrix& y, int k) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(y, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-8) {
        std::ostringstream msg;
        msg << "solve_riccati: covariance lost positive semidefiniteness at grid point " << k
            << " (min eigenvalue " << eig.eigenvalues().minCoeff() << ")";
        throw NumericError(msg.str());
    }
}

}  // namespace

RiccatiPath solve_riccati(const Matrix& phi, const Matrix& y0, const QuerySpec& query, const TimeGrid& grid) {
    grid.validate();
    const Blocks blocks = split_blocks(phi, query);
    const Eigen::Index q = blocks.phi_vc.rows();
    if (y0.rows() != q || y0.cols() != q) throw ValidationError("solve_riccati: y0 shape mismatch");
    if ((y0 - y0.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
        throw ValidationError("solve_riccati: y0 is not symmetric");
    }
    const RiccatiRhs rhs{blocks.phi_vc, blocks.phi_c_vc.transpose() * blocks.phi_c_vc};

    const int substeps = std::max(1, static_cast<int>(std::ceil(grid.delta / 1e-3)));
    const double h = grid.delta / substeps;

    RiccatiPath path;
    path.y.reserve(static_cast<std::size_t>(grid.n_steps) + 1);
    Matrix y = 0.5 * (y0 + y0.transpose());
    path.y.push_back(y);
    check_psd(y, 0);
    for (int k = 0; k < grid.n_steps; ++k) {
        for (int s = 0; s < substeps; ++s) {
            const Matrix k1 = rhs(y);
            const Matrix k2 = rhs(y + 0.5 * h * k1);
            const Matrix k3 = rhs(y + 0.5 * h * k2);
            const Matrix k4 = rhs(y + h * k3);
            y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            y = 0.5 * (y + y.transpose());
            check_riccati_state(y, (k + static_cast<double>(s + 1) / substeps) * grid.delta);
        }
        path.y.push_back(y);
        check_psd(y, k + 1);
    }
    return path;
}

RiccatiPath solve_riccati_closed_form(const Matrix& phi, const Matrix& y0, const QuerySpec& query,
                                      const TimeGrid& grid) {
    grid.validate();
    const Blocks blocks = split_blocks(phi, query);
    const Eigen::Index q = blocks.phi_vc.rows();
    if (y0.rows() != q || y0.cols() != q) throw ValidationError("solve_riccati_closed_form: y0 shape mismatch");

    using CMatrix = Eigen::MatrixXcd;
    using CVector = Eigen::VectorXcd;

    // Hamiltonian of the symmetric Riccati equation.
    Matrix ham = Matrix::Zero(2 * q, 2 * q);
    ham.topLeftCorner(q, q) = -blocks.phi_vc.transpose();
    ham.topRightCorner(q, q) = blocks.phi_c_vc.transpose() * blocks.phi_c_vc;
    ham.bottomLeftCorner(q, q) = Matrix::Identity(q, q);
    ham.bottomRightCorner(q, q) = blocks.phi_vc;

    Eigen::ComplexEigenSolver<Matrix> eig(ham);
    if (eig.info() != Eigen::Success) throw NumericError("solve_riccati_closed_form: eigendecomposition failed");

    // Right-half-plane eigenvalues go into Lambda; the block structure needs
    // column q+i to carry the eigenvector of exactly -lambda_i, so the stable
    // half is matched by nearest negated eigenvalue rather than by sort order.
    std::vector<int> unstable, stable;
    for (int i = 0; i < 2 * q; ++i) {
        const double re = eig.eigenvalues()(i).real();
        if (re > 1e-9) {
            unstable.push_back(i);
        } else if (re < -1e-9) {
            stable.push_back(i);
        }
    }
    if (static_cast<int>(unstable.size()) != q || static_cast<int>(stable.size()) != q) {
        throw NumericError("solve_riccati_closed_form: Hamiltonian spectrum does not split off the imaginary axis");
    }

    CMatrix w(2 * q, 2 * q);
    CVector lambda(q);
    std::vector<bool> used(stable.size(), false);
    for (int i = 0; i < q; ++i) {
        lambda(i) = eig.eigenvalues()(unstable[static_cast<std::size_t>(i)]);
        w.col(i) = eig.eigenvectors().col(unstable[static_cast<std::size_t>(i)]);
        int best = -1;
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < stable.size(); ++s) {
            if (used[s]) continue;
            const double dist = std::abs(eig.eigenvalues()(stable[s]) + lambda(i));
            if (dist < best_dist) {
                best_dist = dist;
                best = static_cast<int>(s);
            }
        }
        if (best < 0 || best_dist > 1e-6 * (1.0 + std::abs(lambda(i)))) {
            throw NumericError("solve_riccati_closed_form: eigenvalues do not pair as (lambda, -lambda)");
        }
        used[static_cast<std::size_t>(best)] = true;
        w.col(q + i) = eig.eigenvectors().col(stable[static_cast<std::size_t>(best)]);
    }
    {
        const auto sv = w.jacobiSvd().singularValues();
        if (!(sv(sv.size() - 1) > 0.0) || sv(0) / sv(sv.size() - 1) > 1e10) {
            throw NumericError(
                "solve_riccati_closed_form: eigenvector matrix is ill-conditioned (defective Hamiltonian?)");
        }
    }

    const CMatrix w11 = w.topLeftCorner(q, q);
    const CMatrix w12 = w.topRightCorner(q, q);
    const CMatrix w21 = w.bottomLeftCorner(q, q);
    const CMatrix w22 = w.bottomRightCorner(q, q);
    const CMatrix y0c = y0.cast<std::complex<double>>();

    const CMatrix r = -(w22 - y0c * w12).partialPivLu().solve(w21 - y0c * w11);

    RiccatiPath path;
    path.y.reserve(static_cast<std::size_t>(grid.n_steps) + 1);
    for (int k = 0; k <= grid.n_steps; ++k) {
        const double t = k * grid.delta;
        CVector decay(q);
        for (int i = 0; i < q; ++i) decay(i) = std::exp(-t * lambda(i));
        const CMatrix ere = decay.asDiagonal() * r * decay.asDiagonal();
        const CMatrix numer = w21 + w22 * ere;
        const CMatrix denom = w11 + w12 * ere;
        const CMatrix yc = denom.transpose().partialPivLu().solve(numer.transpose()).transpose();
        Matrix y = yc.real();
        y = 0.5 * (y + y.transpose());
        check_riccati_state(y, t);
        path.y.push_back(y);
    }
    return path;
}

FilterCoeffs make_coeffs(const Matrix& phi, const RiccatiPath& riccati, const QuerySpec& query) {
    const Blocks blocks = split_blocks(phi, query);
    const Matrix feedback = blocks.phi_c_vc.transpose() * blocks.phi_c_vc;
    const Matrix cross = blocks.phi_c_vc.transpose() * blocks.phi_c;
    FilterCoeffs coeffs;
    coeffs.a.reserve(riccati.y.size());
    coeffs.b.reserve(riccati.y.size());
    coeffs.c.reserve(riccati.y.size());
    for (const Matrix& y : riccati.y) {
        coeffs.a.push_back(blocks.phi_vc_c - y * cross);
        coeffs.b.push_back(blocks.phi_vc - y * feedback);
        coeffs.c.push_back(y * blocks.phi_c_vc.transpose());
    }
    return coeffs;
}

namespace {

std::vector<Vector> run_recursion(const FilterCoeffs& coeffs, const Matrix& traj_xc, const TimeGrid& grid,
                                  const Vector& m0) {
    const int n = grid.n_steps;
    std::vector<Vector> m_hat;
    m_hat.reserve(static_cast<std::size_t>(n) + 1);
    Vector m = m0;
    m_hat.push_back(m);
    for (int k = 1; k <= n; ++k) {
        const auto& a = coeffs.a[static_cast<std::size_t>(k - 1)];
        const auto& b = coeffs.b[static_cast<std::size_t>(k - 1)];
        const auto& c = coeffs.c[static_cast<std::size_t>(k - 1)];
        const Vector xc_prev = traj_xc.row(k - 1).transpose();
        const Vector dxc = traj_xc.row(k).transpose() - xc_prev;
        m += grid.delta * (a * xc_prev + b * m) + c * dxc;
        if (!m.allFinite()) {
            std::ostringstream msg;
            msg << "forward_filter: non-finite conditional mean at step " << k;
            throw NumericError(msg.str());
        }
        m_hat.push_back(m);
    }
    return m_hat;
}

}  // namespace

std::vector<Vector> forward_filter(const Matrix& phi, const RiccatiPath& riccati, const Matrix& traj_xc,
                                   const QuerySpec& query, const TimeGrid& grid, const Vector& m0) {
    grid.validate();
    if (static_cast<int>(riccati.y.size()) != grid.n_steps + 1) {
        throw ValidationError("forward_filter: Riccati path does not cover the grid");
    }
    if (traj_xc.rows() != grid.n_steps + 1 || traj_xc.cols() != static_cast<Eigen::Index>(query.cond_set.size())) {
        throw ValidationError("forward_filter: observed path shape mismatch");
    }
    const FilterCoeffs coeffs = make_coeffs(phi, riccati, query);
    return run_recursion(coeffs, traj_xc, grid, m0);
}

std::pair<Vector, Vector> projections(const std::vector<Vector>& m_hat, const Matrix& traj_xc, const Matrix& phi,
                                      const QuerySpec& query) {
    const int d = static_cast<int>(phi.rows());
    const Blocks blocks = split_blocks(phi, query);
    const int pos = query.alpha_position(d);
    const auto n_points = m_hat.size();
    if (traj_xc.rows() != static_cast<Eigen::Index>(n_points)) {
        throw ValidationError("projections: path lengths disagree");
    }
    Vector pi(static_cast<Eigen::Index>(n_points));
    Vector mu(static_cast<Eigen::Index>(n_points));
    for (std::size_t k = 0; k < n_points; ++k) {
        pi(static_cast<Eigen::Index>(k)) = m_hat[k](pos);
        mu(static_cast<Eigen::Index>(k)) =
            blocks.phi_beta_vc.dot(m_hat[k]) + blocks.phi_beta_c.dot(traj_xc.row(static_cast<Eigen::Index>(k)));
    }
    return {pi, mu};
}

FilterPaths run_filter(const Matrix& phi, const TrajectorySet& data, const std::vector<int>& traj_indices,
                       const QuerySpec& query) {
    query.validate(data.dim);
    const auto [m0_coef, y0] = initial_values(phi, query);
    const RiccatiPath riccati = solve_riccati(phi, y0, query, data.grid);
    const FilterCoeffs coeffs = make_coeffs(phi, riccati, query);
    const std::vector<int> cond = query.cond_set;

    FilterPaths out;
    out.m_hat.resize(traj_indices.size());
    out.pi_hat.resize(traj_indices.size());
    out.mu_hat.resize(traj_indices.size());
    parallel_for(traj_indices.size(), [&](std::size_t i) {
        const Matrix& path = data.traj(traj_indices[i]);
        Matrix xc(path.rows(), static_cast<Eigen::Index>(cond.size()));
        for (std::size_t c = 0; c < cond.size(); ++c) xc.col(static_cast<Eigen::Index>(c)) = path.col(cond[c]);
        const Vector m0 = m0_coef * xc.row(0).transpose();
        const auto m_hat = run_recursion(coeffs, xc, data.grid, m0);
        auto [pi, mu] = projections(m_hat, xc, phi, query);
        Matrix m_mat(static_cast<Eigen::Index>(m_hat.size()), m_hat.front().size());
        for (std::size_t k = 0; k < m_hat.size(); ++k) m_mat.row(static_cast<Eigen::Index>(k)) = m_hat[k].transpose();
        out.m_hat[i] = std::move(m_mat);
        out.pi_hat[i] = std::move(pi);
        out.mu_hat[i] = std::move(mu);
    });
    return out;
}

}  // namespace lcmito::filter
