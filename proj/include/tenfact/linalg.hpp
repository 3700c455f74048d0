#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "tenfact/tensor.hpp"

namespace tenfact {

using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

/// Order-preserving orthonormalization: column i of the result spans the same
/// space as columns 0..i of X, so leading columns that are already orthonormal
/// are reproduced exactly. Uses modified Gram-Schmidt with one
/// re-orthogonalization pass.
///
/// Throws DegenerateInput (with the offending column) when a residual norm
/// falls below 1e-12 times the largest column norm of X, or when k > d.
FactorMatrix orth_step(const FactorMatrix& X);

/// Pseudoinverse of a symmetric positive semi-definite matrix, truncating
/// eigenvalues below rel_tol * largest.
Matrix pinv_psd(const Matrix& G, double rel_tol = 1e-12);

/// Pseudoinverse of a general matrix via SVD, truncating singular values
/// below rel_tol * largest.
Matrix pinv(const Matrix& M, double rel_tol = 1e-12);

/// Least-squares factor update Tmat (Q (.) P) G^+ with
/// G = (Q^T Q) .* (P^T P).
FactorMatrix ls_solve_kr(const Matrix& Tmat, const FactorMatrix& P, const FactorMatrix& Q);

/// Same solve, computing the MTTKRP straight from the tensor.
FactorMatrix ls_update(const Tensor3& t, int mode, const FactorMatrix& P, const FactorMatrix& Q);

struct SvdResult {
    Matrix U;
    Vector S;  // descending
    Matrix V;
};

/// Rank-k truncated SVD.
SvdResult top_svd(const Matrix& M, Index k);

struct EigResult {
    ComplexVector values;
    ComplexMatrix vectors;  // unit-norm columns
};

/// Eigendecomposition of a square non-symmetric matrix.
/// Throws NumericalFailure when the QR iteration does not converge.
EigResult eig_nonsym(const Matrix& M);

struct MatchResult {
    /// assignment[r] = index of the true factor matched by recovered factor r.
    std::vector<std::optional<Index>> assignment;
    /// Per true factor: min-over-modes |correlation| with its greedy pick.
    std::vector<double> correlations;
    Index recovered_count = 0;
};

/// Greedy factor matching. True factors are visited by descending |weight|;
/// each takes the unused estimate maximizing the smallest absolute
/// per-mode correlation (ties -> lower index) and counts as recovered iff
/// that value reaches `threshold`. Only recovered matches consume estimates.
MatchResult match_factors(const CpModel& truth, const CpModel& est, double threshold = 0.9);

}  // namespace tenfact
