#pragma once

// Helpers shared by the ALS-family drivers. Not installed.

#include "tenfact/rng.hpp"
#include "tenfact/tensor.hpp"

namespace tenfact::detail {

/// Scales columns to unit norm and returns the norms. Zero columns are
/// replaced by a fresh random direction when `rng` is given, else by e_1;
/// their reported norm is 0 either way.
Vector normalize_columns(Matrix& F, Rng* rng, int* redraws);

/// orth_step with up to three random redraws of a degenerate column.
/// Throws NumericalFailure when the factor stays rank-deficient.
Matrix orthogonalize(Matrix F, Rng& rng, int& redraws, char name);

}  // namespace tenfact::detail
