#pragma once

#include <Eigen/Dense>

#include "lcmito/errors.hpp"

namespace lcmito::matcore {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// 2-norm condition number from the full SVD. Meant for the small dense
// systems this pipeline produces; do not call on anything large.
double condition_estimate(const Matrix& a);

// exp(t*A) by scaling-and-squaring. The estimator chain budgets 1e-12
// relative error for this step, which the Pade-13 kernel comfortably meets.
Matrix mat_exp(const Matrix& a, double t);

// Clamp every singular value of A into [lo, hi] and rebuild with the same
// U and V factors of the input decomposition (no re-orthogonalization).
Matrix svd_clip(const Matrix& a, double lo, double hi);

// Kronecker product, dimensions (m*p) x (n*q).
Matrix kron(const Matrix& a, const Matrix& b);

// Solve A X = B for square A. Refuses condition numbers >= 1e12 and reports
// the estimate in the error message.
Matrix solve(const Matrix& a, const Matrix& b);

// Largest singular value.
double spectral_norm(const Matrix& a);

void require_finite(const Matrix& a, const char* what);

}  // namespace lcmito::matcore
