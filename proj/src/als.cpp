#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tenfact/decompose.hpp"
#include "tenfact/error.hpp"
#include "tenfact/linalg.hpp"
#include "tenfact/rng.hpp"

#include "factor_ops.hpp"

namespace tenfact {

using detail::normalize_columns;
using detail::orthogonalize;

namespace {

// Below this residual ratio an exact decomposition has been reached; the
// relative-change test is meaningless at rounding level.
constexpr double kResidualFloor = 1e-13;
constexpr double kDirectionTol = 1e-10;

void check_factor_shapes(const Dims& d, const Matrix& A, const Matrix& B, const Matrix& C) {
    if (A.rows() != d.d1 || B.rows() != d.d2 || C.rows() != d.d3) {
        throw InvalidArgument(fmt::format("factor rows ({}, {}, {}) do not match tensor dims ({}, {}, {})", A.rows(),
                                          B.rows(), C.rows(), d.d1, d.d2, d.d3));
    }
    if (A.cols() != B.cols() || A.cols() != C.cols()) {
        throw InvalidArgument("factor matrices must have the same number of columns");
    }
}

/// min over modes of |cos| between matching columns of unit-norm factors.
Vector direction_agreement(const Matrix& A0, const Matrix& B0, const Matrix& C0, const Matrix& A1,
                           const Matrix& B1, const Matrix& C1) {
    const Index k = A0.cols();
    Vector out(k);
    for (Index r = 0; r < k; ++r) {
        out[r] = std::min({std::abs(A0.col(r).dot(A1.col(r))), std::abs(B0.col(r).dot(B1.col(r))),
                           std::abs(C0.col(r).dot(C1.col(r)))});
    }
    return out;
}

}  // namespace

void DecompConfig::validate() const {
    if (rank < 1) throw InvalidArgument("rank must be at least 1");
    if (max_iters < 1) throw InvalidArgument("max_iters must be at least 1");
    if (!(tol > 0.0)) throw InvalidArgument("tol must be positive");
    if (orth_steps < 0) throw InvalidArgument("orth_steps must be non-negative");
    if (rerandomize_period && *rerandomize_period < 1) throw InvalidArgument("rerandomize_period must be positive");
    if (init == InitKind::Given) {
        if (!initial) throw InvalidArgument("init = given requires an initial model");
        if (initial->rank() != rank) {
            throw InvalidArgument(
                fmt::format("initial model has rank {}, configuration asks for {}", initial->rank(), rank));
        }
    }
}

std::tuple<FactorMatrix, FactorMatrix, FactorMatrix> als_sweep(const Tensor3& t, const FactorMatrix& A,
                                                                const FactorMatrix& B, const FactorMatrix& C) {
    check_factor_shapes(t.dims(), A, B, C);
    FactorMatrix A1 = ls_update(t, 1, B, C);
    FactorMatrix B1 = ls_update(t, 2, A1, C);
    FactorMatrix C1 = ls_update(t, 3, A1, B1);
    return {std::move(A1), std::move(B1), std::move(C1)};
}

std::tuple<FactorMatrix, FactorMatrix, FactorMatrix> svd_init(const Tensor3& t, Index k, std::uint64_t seed) {
    const Dims d = t.dims();
    if (k < 1 || k > std::min(d.d1, d.d2)) {
        throw InvalidArgument(fmt::format("svd_init: k = {} must lie in [1, min(d1, d2) = {}]", k, std::min(d.d1, d.d2)));
    }
    Rng rng(seed);
    const Vector v = rng.unit_vector(d.d3);
    const SvdResult s = top_svd(t.contract_mode3(v), k);

    FactorMatrix A0 = s.U;
    FactorMatrix B0 = s.V;
    const double top = s.S.size() ? s.S[0] : 0.0;
    for (Index r = 0; r < k; ++r) {
        if (!(s.S[r] > 1e-12 * top) || top == 0.0) {
            spdlog::info("svd_init: projection has numerical rank {} < {}; padding column {} randomly", r, k, r);
            A0.col(r) = rng.unit_vector(d.d1);
            B0.col(r) = rng.unit_vector(d.d2);
        }
    }
    FactorMatrix C0 = ls_update(t, 3, A0, B0);
    normalize_columns(C0, &rng, nullptr);
    return {std::move(A0), std::move(B0), std::move(C0)};
}

DecompResult decompose(const Tensor3& t, const DecompConfig& cfg) {
    cfg.validate();
    const Dims d = t.dims();
    const Index k = cfg.rank;
    const bool any_orth =
        cfg.orth_mode == OrthMode::Always || (cfg.orth_mode == OrthMode::FirstS && cfg.orth_steps > 0);
    const Index dmin = std::min({d.d1, d.d2, d.d3});
    if (any_orth && k > dmin) {
        throw InvalidArgument(fmt::format(
            "rank {} exceeds the smallest dimension {}; orthogonalization is impossible, use the overcomplete "
            "deflation driver instead",
            k, dmin));
    }

    Rng rng(cfg.seed);
    FactorMatrix A, B, C;
    switch (cfg.init) {
        case InitKind::RandomSphere:
            A = rng.unit_columns(d.d1, k);
            B = rng.unit_columns(d.d2, k);
            C = rng.unit_columns(d.d3, k);
            break;
        case InitKind::Svd:
            std::tie(A, B, C) = svd_init(t, k, derive_seed(cfg.seed, 0));
            break;
        case InitKind::Given:
            if (cfg.initial->dims() != d) throw InvalidArgument("initial model dimensions do not match the tensor");
            A = cfg.initial->A;
            B = cfg.initial->B;
            C = cfg.initial->C;
            break;
    }

    DecompResult res;
    Vector w = Vector::Ones(k);
    std::vector<int> last_move(static_cast<std::size_t>(k), 0);
    double prev = std::numeric_limits<double>::quiet_NaN();

    for (int it = 1; it <= cfg.max_iters; ++it) {
        if (cfg.rerandomize_period && it % *cfg.rerandomize_period == 0) {
            const Index first = it / *cfg.rerandomize_period;
            for (Index r = first; r < k; ++r) {
                A.col(r) = rng.unit_vector(d.d1);
                B.col(r) = rng.unit_vector(d.d2);
                C.col(r) = rng.unit_vector(d.d3);
            }
        }
        const Matrix A_prev = A, B_prev = B, C_prev = C;

        const bool orth =
            cfg.orth_mode == OrthMode::Always || (cfg.orth_mode == OrthMode::FirstS && it <= cfg.orth_steps);
        if (orth) {
            A = orthogonalize(std::move(A), rng, res.degenerate_redraws, 'A');
            B = orthogonalize(std::move(B), rng, res.degenerate_redraws, 'B');
            C = orthogonalize(std::move(C), rng, res.degenerate_redraws, 'C');
            Matrix X = t.mttkrp(1, B, C);
            Matrix Y = t.mttkrp(2, A, C);
            Matrix Z = t.mttkrp(3, A, B);
            normalize_columns(X, &rng, &res.degenerate_redraws);
            normalize_columns(Y, &rng, &res.degenerate_redraws);
            normalize_columns(Z, &rng, &res.degenerate_redraws);
            A = std::move(X);
            B = std::move(Y);
            C = std::move(Z);
            w = (A.array() * t.mttkrp(1, B, C).array()).colwise().sum().transpose();
        } else {
            auto [A1, B1, C1] = als_sweep(t, A, B, C);
            A = std::move(A1);
            B = std::move(B1);
            C = std::move(C1);
            w = normalize_columns(A, nullptr, nullptr);
            w.array() *= normalize_columns(B, nullptr, nullptr).array();
            w.array() *= normalize_columns(C, nullptr, nullptr).array();
        }

        const Vector agree = direction_agreement(A_prev, B_prev, C_prev, A, B, C);
        for (Index r = 0; r < k; ++r) {
            if (agree[r] < 1.0 - kDirectionTol) last_move[static_cast<std::size_t>(r)] = it;
        }

        const double r = residual_ratio(t, CpModel{w, A, B, C});
        if (cfg.record_trace) res.residual_trace.push_back(r);
        res.iterations_used = it;
        if (r <= kResidualFloor || (it > 1 && std::abs(prev - r) <= cfg.tol * prev)) {
            res.converged = true;
            break;
        }
        prev = r;
    }

    res.model = CpModel{std::move(w), std::move(A), std::move(B), std::move(C)};
    res.model.canonicalize();
    res.factor_convergence_step = std::move(last_move);
    return res;
}

DecompResult als_run(const Tensor3& t, DecompConfig cfg) {
    cfg.orth_mode = OrthMode::None;
    return decompose(t, cfg);
}

DecompResult orth_als_run(const Tensor3& t, DecompConfig cfg) {
    cfg.orth_mode = OrthMode::Always;
    return decompose(t, cfg);
}

DecompResult hybrid_run(const Tensor3& t, DecompConfig cfg) {
    cfg.orth_mode = OrthMode::FirstS;
    return decompose(t, cfg);
}

}  // namespace tenfact
