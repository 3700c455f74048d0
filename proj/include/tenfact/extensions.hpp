#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tenfact/decompose.hpp"
#include "tenfact/tensor.hpp"

namespace tenfact {

// ---------------------------------------------------------------- overcomplete

struct DeflationResult {
    CpModel model;
    /// residual_ratio against the original tensor after each block (post refinement).
    std::vector<double> block_residuals;
    /// Set when an inner decomposition failed; `model` then holds the blocks
    /// finished so far.
    std::optional<std::string> error;
};

/// Rank-r decomposition in blocks of at most `block` components. Each block
/// runs `inner` (its orth_mode selects Hybrid/Orth-ALS/ALS) on T minus the
/// model accumulated so far. When more than one block is needed, every block
/// is followed by one full ALS sweep at the accumulated rank against T.
/// Block b uses seed inner.seed for b = 0 and derive_seed(inner.seed, b) after.
/// block <= 0 selects min(dims). Sparse inputs are densified.
DeflationResult deflate_overcomplete(const Tensor3& t, Index total_rank, Index block, const DecompConfig& inner);

// ---------------------------------------------------------------- completion

/// Revealed entries of a partially observed tensor. Values live in
/// `observed`; observed entries whose value is exactly 0 are listed in
/// `observed_zeros` since the sparse store drops zeros.
struct CompletionProblem {
    Dims dims;
    SparseTensor3 observed;
    std::vector<std::array<Index, 3>> observed_zeros;
    /// Sampling probability the mask was drawn with (metadata only).
    std::optional<double> sampling_probability;

    /// Splits raw entries into values and observed zeros. Throws
    /// InvalidArgument on out-of-range or repeated coordinates.
    static CompletionProblem from_entries(Dims dims, const std::vector<SparseTensor3::Entry>& entries);

    /// Throws InvalidArgument on out-of-range or repeated coordinates.
    void validate() const;
    std::size_t observed_count() const { return observed.nnz() + observed_zeros.size(); }
    /// Row-major flags, 1 = observed.
    std::vector<char> mask() const;
};

/// Reveals each entry of `truth` independently with probability p.
CompletionProblem sample_entries(const DenseTensor3& truth, double p, std::uint64_t seed);

struct CompletionResult {
    CpModel model;
    int iterations_used = 0;
    /// RMSE over observed entries after each sweep; filled iff record_trace.
    std::vector<double> rmse_trace;
    bool converged = false;
    /// Per mode (0-based), indices of rows with no observation. Those rows
    /// keep their initial values.
    std::array<std::vector<Index>, 3> unconstrained_rows;
};

/// Masked ALS: every factor row is a ridge least-squares fit to the observed
/// entries in its slice. Sweeps 1..s (cfg.orth_mode/orth_steps as in
/// decompose) orthogonalize the factors first and update all modes from the
/// orthogonalized estimates; later sweeps are Gauss-Seidel. Stops when the
/// relative change of observed-entry RMSE drops below cfg.tol. Uses
/// cfg.rank, max_iters, tol, seed, record_trace; init must be random.
CompletionResult complete_masked(const CompletionProblem& p, const DecompConfig& cfg, double ridge = 1e-8);

/// RMS of (truth - model) over unobserved entries divided by the RMS of truth
/// there. 0 when nothing is missing.
double missing_entry_error(const DenseTensor3& truth, const CompletionProblem& p, const CpModel& m);

}  // namespace tenfact
