#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include <Eigen/SVD>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tenfact/decompose.hpp"
#include "tenfact/error.hpp"
#include "tenfact/linalg.hpp"
#include "tenfact/rng.hpp"

namespace tenfact {

namespace {

constexpr double kRelTol = 1e-8;
constexpr double kImagTol = 1e-6;

/// Indices of the k eigenvalues of largest magnitude, descending.
std::vector<Index> top_by_magnitude(const ComplexVector& ev, Index k) {
    std::vector<Index> idx(static_cast<std::size_t>(ev.size()));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return std::abs(ev[a]) > std::abs(ev[b]); });
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

/// Real unit vector from a complex eigenvector; rotates away the arbitrary
/// phase first and fails if a genuine imaginary part remains.
Vector real_direction(const Eigen::VectorXcd& v) {
    Index big = 0;
    v.cwiseAbs().maxCoeff(&big);
    const std::complex<double> phase = std::conj(v[big]) / std::abs(v[big]);
    const Eigen::VectorXcd u = v * phase;
    if (u.imag().norm() > kImagTol * u.norm()) {
        throw NumericalFailure("simdiag: eigenvector has a non-negligible imaginary part");
    }
    return u.real().normalized();
}

CpModel simdiag_once(const Tensor3& t, Index k, Rng& rng) {
    const Dims d = t.dims();
    const Vector u = rng.unit_vector(d.d3);
    const Vector v = rng.unit_vector(d.d3);
    const Matrix M1 = t.contract_mode3(u);
    const Matrix M2 = t.contract_mode3(v);

    Eigen::JacobiSVD<Matrix> svd(M2);
    const Vector& s = svd.singularValues();
    if (s.size() < k || !(s[0] > 0.0) || s[k - 1] <= kRelTol * s[0]) {
        throw NumericalFailure(fmt::format("simdiag: projected slice has numerical rank below {}", k));
    }
    const Matrix M2p = pinv(M2, kRelTol);

    const EigResult ea = eig_nonsym(M1 * M2p);
    const EigResult eb = eig_nonsym((M2p * M1).transpose());
    const std::vector<Index> ia = top_by_magnitude(ea.values, k);

    const double scale = std::abs(ea.values[ia[0]]);
    if (!(scale > 0.0)) throw NumericalFailure("simdiag: projected pencil is zero");
    for (Index r = 0; r < k; ++r) {
        const auto lam = ea.values[ia[static_cast<std::size_t>(r)]];
        if (std::abs(lam.imag()) > kImagTol * std::abs(lam)) {
            throw NumericalFailure("simdiag: complex eigenvalue in the projected pencil");
        }
        if (std::abs(lam) <= kRelTol * scale) throw NumericalFailure("simdiag: vanishing eigenvalue among the top k");
        for (Index q = 0; q < r; ++q) {
            if (std::abs(lam - ea.values[ia[static_cast<std::size_t>(q)]]) < kRelTol * scale) {
                throw NumericalFailure("simdiag: eigenvalue gap below threshold");
            }
        }
    }

    Matrix A(d.d1, k), B(d.d2, k);
    std::vector<bool> used(static_cast<std::size_t>(eb.values.size()), false);
    for (Index r = 0; r < k; ++r) {
        const Index a = ia[static_cast<std::size_t>(r)];
        A.col(r) = real_direction(ea.vectors.col(a));
        Index best = -1;
        double best_dist = 0.0;
        for (Index b = 0; b < eb.values.size(); ++b) {
            if (used[static_cast<std::size_t>(b)]) continue;
            const double dist = std::abs(eb.values[b] - ea.values[a]);
            if (best < 0 || dist < best_dist) {
                best = b;
                best_dist = dist;
            }
        }
        used[static_cast<std::size_t>(best)] = true;
        B.col(r) = real_direction(eb.vectors.col(best));
    }

    Matrix C = ls_update(t, 3, A, B);
    CpModel m = CpModel::from_factors(Vector::Ones(k), std::move(A), std::move(B), std::move(C));
    m.canonicalize();
    return m;
}

}  // namespace

CpModel simdiag(const Tensor3& t, Index k, std::uint64_t seed) {
    const Dims d = t.dims();
    const Index dmin = std::min({d.d1, d.d2, d.d3});
    if (k < 1 || k > dmin) throw InvalidArgument(fmt::format("simdiag: k = {} must lie in [1, {}]", k, dmin));
    Rng rng(seed);
    try {
        return simdiag_once(t, k, rng);
    } catch (const NumericalFailure& e) {
        spdlog::warn("simdiag: {}; redrawing projections", e.what());
    }
    return simdiag_once(t, k, rng);
}

}  // namespace tenfact
