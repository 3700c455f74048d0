#include "factor_ops.hpp"

#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tenfact/error.hpp"
#include "tenfact/linalg.hpp"

namespace tenfact::detail {

namespace {
constexpr int kMaxRedraws = 3;
}

/// Scales columns to unit norm and returns the norms. Zero columns are
/// replaced by a fresh random direction when `rng` is given, else by e_1.
Vector normalize_columns(Matrix& F, Rng* rng, int* redraws) {
    Vector norms(F.cols());
    for (Index r = 0; r < F.cols(); ++r) {
        const double n = F.col(r).norm();
        norms[r] = n;
        if (n > 0.0 && std::isfinite(n)) {
            F.col(r) /= n;
        } else if (rng) {
            spdlog::warn("column {} vanished during update; redrawing it", r);
            F.col(r) = rng->unit_vector(F.rows());
            norms[r] = 0.0;
            if (redraws) ++*redraws;
        } else {
            F.col(r).setZero();
            F(0, r) = 1.0;
            norms[r] = 0.0;
        }
    }
    return norms;
}

Matrix orthogonalize(Matrix F, Rng& rng, int& redraws, char name) {
    for (int attempt = 0;; ++attempt) {
        try {
            return orth_step(F);
        } catch (const DegenerateInput& e) {
            if (attempt >= kMaxRedraws) {
                throw NumericalFailure(fmt::format(
                    "orthogonalization of factor {} stayed rank-deficient after {} redraws", name, kMaxRedraws));
            }
            const Index c = e.column();
            spdlog::warn("factor {} column {} is degenerate; redrawing", name, c);
            F.col(c) = rng.unit_vector(F.rows());
            ++redraws;
        }
    }
}

}  // namespace tenfact::detail
