#include "lcmito/matcore.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <sstream>

namespace lcmito::matcore {

void require_finite(const Matrix& a, const char* what) {
    if (!a.allFinite()) {
        throw ValidationError(std::string(what) + ": non-finite entries");
    }
}

static void require_square(const Matrix& a, const char* what) {
    if (a.rows() != a.cols()) {
        std::ostringstream msg;
        msg << what << ": expected square matrix, got " << a.rows() << "x" << a.cols();
        throw ValidationError(msg.str());
    }
}

double condition_estimate(const Matrix& a) {
    Eigen::JacobiSVD<Matrix> svd(a);
    const auto& s = svd.singularValues();
    if (s.size() == 0) return 0.0;
    const double smin = s(s.size() - 1);
    if (smin <= 0.0) return std::numeric_limits<double>::infinity();
    return s(0) / smin;
}

double spectral_norm(const Matrix& a) {
    return Eigen::JacobiSVD<Matrix>(a).singularValues()(0);
}

Matrix mat_exp(const Matrix& a, double t) {
    require_square(a, "mat_exp");
    require_finite(a, "mat_exp");
    if (!std::isfinite(t)) throw ValidationError("mat_exp: non-finite scale t");
    return (t * a).exp();
}

Matrix svd_clip(const Matrix& a, double lo, double hi) {
    require_finite(a, "svd_clip");
    if (!(lo <= hi)) {
        std::ostringstream msg;
        msg << "svd_clip: lo > hi (" << lo << " > " << hi << ")";
        throw ValidationError(msg.str());
    }
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Vector s = svd.singularValues();
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        s(i) = std::clamp(s(i), lo, hi);
    }
    // Rectangular inputs need the rectangular diagonal factor.
    Matrix sm = Matrix::Zero(a.rows(), a.cols());
    sm.diagonal().head(s.size()) = s;
    return svd.matrixU() * sm * svd.matrixV().transpose();
}

Matrix kron(const Matrix& a, const Matrix& b) {
    require_finite(a, "kron");
    require_finite(b, "kron");
    return Eigen::kroneckerProduct(a, b);
}

Matrix solve(const Matrix& a, const Matrix& b) {
    require_square(a, "solve");
    require_finite(a, "solve");
    require_finite(b, "solve");
    if (a.rows() != b.rows()) throw ValidationError("solve: incompatible shapes");
    const double cond = condition_estimate(a);
    if (!(cond < 1e12)) {
        std::ostringstream msg;
        msg << "solve: matrix is singular or ill-conditioned (condition estimate " << cond << ")";
        throw NumericError(msg.str());
    }
    const auto lu = a.partialPivLu();
    Matrix x = lu.solve(b);
    x += lu.solve(b - a * x);  // one refinement pass keeps the residual near eps
    return x;
}

}  // namespace lcmito::matcore
