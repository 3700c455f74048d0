#include "tenfact/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <fmt/format.h>

#include "tenfact/error.hpp"

namespace tenfact {

FactorMatrix orth_step(const FactorMatrix& X) {
    const Index d = X.rows();
    const Index k = X.cols();
    if (k > d) {
        throw DegenerateInput(fmt::format("orth_step: {} columns cannot be orthonormal in dimension {}", k, d), d);
    }
    double scale = 0.0;
    for (Index i = 0; i < k; ++i) scale = std::max(scale, X.col(i).norm());

    FactorMatrix Q(d, k);
    for (Index i = 0; i < k; ++i) {
        Vector v = X.col(i);
        for (int pass = 0; pass < 2; ++pass) {
            for (Index j = 0; j < i; ++j) v -= Q.col(j).dot(v) * Q.col(j);
        }
        const double r = v.norm();
        if (!(r > 1e-12 * scale)) {
            throw DegenerateInput(fmt::format("orth_step: column {} is numerically dependent on earlier columns", i), i);
        }
        Q.col(i) = v / r;
    }
    return Q;
}

Matrix pinv_psd(const Matrix& G, double rel_tol) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(G);
    if (es.info() != Eigen::Success) throw NumericalFailure("pinv_psd: eigendecomposition failed");
    const Vector& ev = es.eigenvalues();
    const double top = ev.cwiseAbs().maxCoeff();
    Vector inv = Vector::Zero(ev.size());
    for (Index i = 0; i < ev.size(); ++i) {
        if (ev[i] > rel_tol * top) inv[i] = 1.0 / ev[i];
    }
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

Matrix pinv(const Matrix& M, double rel_tol) {
    Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const double top = s.size() ? s[0] : 0.0;
    Vector inv = Vector::Zero(s.size());
    for (Index i = 0; i < s.size(); ++i) {
        if (s[i] > rel_tol * top) inv[i] = 1.0 / s[i];
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

namespace {

Matrix solve_with_gram(Matrix mttkrp, const FactorMatrix& P, const FactorMatrix& Q) {
    const Matrix G = (Q.transpose() * Q).cwiseProduct(P.transpose() * P);
    if (G.size() == 0) return mttkrp;
    return mttkrp * pinv_psd(G);
}

}  // namespace

FactorMatrix ls_solve_kr(const Matrix& Tmat, const FactorMatrix& P, const FactorMatrix& Q) {
    if (P.cols() != Q.cols()) throw InvalidArgument("ls_solve_kr: P and Q must have the same number of columns");
    if (Tmat.cols() != P.rows() * Q.rows()) {
        throw InvalidArgument(fmt::format("ls_solve_kr: matricization has {} columns, expected {} x {}", Tmat.cols(),
                                          Q.rows(), P.rows()));
    }
    return solve_with_gram(Tmat * khatri_rao(Q, P), P, Q);
}

FactorMatrix ls_update(const Tensor3& t, int mode, const FactorMatrix& P, const FactorMatrix& Q) {
    return solve_with_gram(t.mttkrp(mode, P, Q), P, Q);
}

SvdResult top_svd(const Matrix& M, Index k) {
    if (k < 0 || k > std::min(M.rows(), M.cols())) {
        throw InvalidArgument(fmt::format("top_svd: k = {} exceeds min dimension of a {}x{} matrix", k, M.rows(),
                                          M.cols()));
    }
    Eigen::BDCSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {svd.matrixU().leftCols(k), svd.singularValues().head(k), svd.matrixV().leftCols(k)};
}

EigResult eig_nonsym(const Matrix& M) {
    if (M.rows() != M.cols()) throw InvalidArgument("eig_nonsym: matrix must be square");
    Eigen::EigenSolver<Matrix> es(M, true);
    if (es.info() != Eigen::Success) throw NumericalFailure("eig_nonsym: QR iteration did not converge");
    EigResult out{es.eigenvalues(), es.eigenvectors()};
    for (Index j = 0; j < out.vectors.cols(); ++j) {
        const double n = out.vectors.col(j).norm();
        if (n > 0.0) out.vectors.col(j) /= n;
    }
    return out;
}

MatchResult match_factors(const CpModel& truth, const CpModel& est, double threshold) {
    if (truth.dims() != est.dims()) throw InvalidArgument("match_factors: models have different dimensions");
    if (!(threshold > 0.0 && threshold <= 1.0)) throw InvalidArgument("match_factors: threshold must lie in (0, 1]");

    const Index kt = truth.rank();
    const Index ke = est.rank();
    MatchResult out;
    out.assignment.assign(static_cast<std::size_t>(ke), std::nullopt);
    out.correlations.assign(static_cast<std::size_t>(kt), 0.0);
    if (kt == 0 || ke == 0) return out;

    const Matrix corr = (truth.A.transpose() * est.A)
                            .cwiseAbs()
                            .cwiseMin((truth.B.transpose() * est.B).cwiseAbs())
                            .cwiseMin((truth.C.transpose() * est.C).cwiseAbs());

    std::vector<Index> order(static_cast<std::size_t>(kt));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return std::abs(truth.weights[a]) > std::abs(truth.weights[b]);
    });

    std::vector<bool> used(static_cast<std::size_t>(ke), false);
    for (Index t : order) {
        Index best = -1;
        double best_val = -1.0;
        for (Index r = 0; r < ke; ++r) {
            if (!used[static_cast<std::size_t>(r)] && corr(t, r) > best_val) {
                best_val = corr(t, r);
                best = r;
            }
        }
        if (best < 0) continue;
        out.correlations[static_cast<std::size_t>(t)] = std::min(1.0, best_val);
        if (best_val >= threshold) {
            used[static_cast<std::size_t>(best)] = true;
            out.assignment[static_cast<std::size_t>(best)] = t;
            ++out.recovered_count;
        }
    }
    return out;
}

}  // namespace tenfact
