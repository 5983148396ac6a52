#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

#include "solrcmf/types.hpp"

// Closed-form projections and proximal operators used by the ADMM block
// updates: soft-thresholding, projection onto the Stiefel manifold
// (unbalanced Procrustes), the prox of a weighted l1 penalty restricted to
// diagonal matrices, and the prox of a weighted l1 penalty on the oblique
// manifold. All functions are pure.

namespace solrcmf {

inline Real soft_threshold(Real x, Real beta) {
    const Real shrunk = std::abs(x) - beta;
    return shrunk > 0 ? (x < 0 ? -shrunk : shrunk) : 0.0;
}

/// Minimizer of 1/2 ||V - M||_F^2 over matrices with orthonormal columns.
/// With the SVD M = B1 S B2^T the minimizer is B1 B2^T (unique when all
/// singular values are positive; for rank-deficient M the SVD backend's
/// column choice decides among the minimizers).
template <typename Derived>
Matrix project_stiefel(const Eigen::MatrixBase<Derived>& m) {
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return svd.matrixU() * svd.matrixV().transpose();
}

/// Prox of beta * sum_l weights(l) |D(l,l)| over diagonal matrices,
/// evaluated at a square matrix: off-diagonal entries are projected away,
/// the diagonal is soft-thresholded entrywise.
template <typename Derived>
Vector prox_diag_l1(const Eigen::MatrixBase<Derived>& m, const Vector& weights,
                    Real beta) {
    Vector d = m.diagonal();
    for (Index l = 0; l < d.size(); ++l) {
        d(l) = soft_threshold(d(l), beta * weights(l));
    }
    return d;
}

/// Vector form: thresholds an already-extracted diagonal.
inline Vector prox_diag_l1(const Vector& diag, const Vector& weights, Real beta) {
    Vector d(diag.size());
    for (Index l = 0; l < d.size(); ++l) {
        d(l) = soft_threshold(diag(l), beta * weights(l));
    }
    return d;
}

enum class ObliqueCase { Interior, Boundary, Corner, ZeroInput };

/// Solves argmin_u -u^T m + w ||u||_1 subject to ||u||_2 = 1.
///
/// Case analysis with w' = max_j |m(j)|:
///   m = 0      -> e_1 (every signed unit vector is optimal)
///   w' > w     -> ST_w(m) / ||ST_w(m)||_2, the unique minimizer
///   w' = w     -> sign(m(j0)) e_{j0} for the smallest maximizing index j0
///   w' < w     -> sign(m(j0)) e_{j0}, j0 the first index minimizing -|m(j)| + w
/// In the degenerate cases the first qualifying component decides direction
/// and sign, which keeps the update deterministic.
template <typename Derived>
std::pair<Vector, ObliqueCase> prox_oblique_l1(
    const Eigen::MatrixBase<Derived>& m_expr, Real w) {
    const Vector m = m_expr;
    const Index p = m.size();
    Vector u = Vector::Zero(p);

    const Real w_prime = m.size() > 0 ? m.cwiseAbs().maxCoeff() : 0.0;
    if (w_prime == 0.0) {
        u(0) = 1.0;
        return {u, ObliqueCase::ZeroInput};
    }
    if (w_prime > w) {
        for (Index j = 0; j < p; ++j) u(j) = soft_threshold(m(j), w);
        u /= u.norm();
        return {u, ObliqueCase::Interior};
    }
    Index j0 = 0;
    while (std::abs(m(j0)) != w_prime) ++j0;
    u(j0) = m(j0) < 0 ? -1.0 : 1.0;
    return {u, w_prime == w ? ObliqueCase::Boundary : ObliqueCase::Corner};
}

/// True when the effective column threshold w is so large that the oblique
/// prox is likely to collapse columns to unit vectors (w sqrt(p) >= 1),
/// a sign that lambda2 was chosen too large.
inline bool oblique_weight_too_large(Real w, Index p) {
    return w * std::sqrt(static_cast<Real>(p)) >= 1.0;
}

}  // namespace solrcmf
