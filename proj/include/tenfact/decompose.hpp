#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "tenfact/tensor.hpp"

namespace tenfact {

enum class InitKind { RandomSphere, Svd, Given };

/// When factor estimates are orthogonalized before the update.
enum class OrthMode {
    None,    ///< standard ALS
    Always,  ///< Orth-ALS
    FirstS,  ///< Hybrid-ALS: orthogonalize during the first `orth_steps` iterations only
};

struct DecompConfig {
    Index rank = 1;
    int max_iters = 100;
    /// Stop once |r_{t-1} - r_t| <= tol * r_{t-1} for the residual ratio r.
    double tol = 1e-6;
    InitKind init = InitKind::RandomSphere;
    /// Starting point when init == Given; must have `rank` components.
    std::optional<CpModel> initial;
    OrthMode orth_mode = OrthMode::None;
    int orth_steps = 5;
    /// At iterations i*period, columns i..k-1 (0-based) are redrawn from the sphere.
    std::optional<int> rerandomize_period;
    std::uint64_t seed = 0;
    bool record_trace = false;

    void validate() const;
};

struct DecompResult {
    CpModel model;
    int iterations_used = 0;
    /// Residual ratio after each iteration; filled iff record_trace.
    std::vector<double> residual_trace;
    bool converged = false;
    /// Per component: first iteration after which its direction stopped
    /// moving (all modes |cos| >= 1 - 1e-10 between consecutive iterates).
    std::vector<int> factor_convergence_step;
    /// Columns redrawn after rank-deficient orthogonalization.
    int degenerate_redraws = 0;
};

/// One Gauss-Seidel sweep of exact least-squares updates in mode order 1, 2, 3.
/// Columns are returned unnormalized.
std::tuple<FactorMatrix, FactorMatrix, FactorMatrix> als_sweep(const Tensor3& t, const FactorMatrix& A,
                                                                const FactorMatrix& B, const FactorMatrix& C);

/// Runs the ALS family according to cfg.orth_mode.
DecompResult decompose(const Tensor3& t, const DecompConfig& cfg);

/// Standard ALS (orth_mode forced to None).
DecompResult als_run(const Tensor3& t, DecompConfig cfg);

/// Orthogonalized ALS: QR of every factor, then T_(1)(C (.) B), T_(2)(C (.) A),
/// T_(3)(B (.) A) from the orthogonalized estimates, column normalization and
/// weights w_i = T(A_i, B_i, C_i). Requires rank <= min(dims).
DecompResult orth_als_run(const Tensor3& t, DecompConfig cfg);

/// Orth-ALS for the first cfg.orth_steps iterations, then standard ALS.
DecompResult hybrid_run(const Tensor3& t, DecompConfig cfg);

/// Initial factors from the top singular vectors of T(I, I, v) for a random
/// unit v; C from one least-squares update. Rank-deficient projections are
/// padded with random unit columns.
std::tuple<FactorMatrix, FactorMatrix, FactorMatrix> svd_init(const Tensor3& t, Index k, std::uint64_t seed);

// ---------------------------------------------------------------- power method

struct TpmResult {
    double weight = 0.0;
    Vector x;
    Vector y;
    Vector z;
    int iterations = 0;
};

/// Rank-1 alternating power updates x <- T_(1)(z (.) y), y <- T_(2)(z (.) x),
/// z <- T_(3)(y (.) x), all from the previous iterate, then normalized.
/// `iterates`, when given, receives x_0 .. x_N (mode-1 estimates).
/// Throws NumericalFailure if an update vanishes.
TpmResult tpm_run(const Tensor3& t, const Vector& x0, const Vector& y0, const Vector& z0, int iters,
                  std::vector<Vector>* iterates = nullptr);

struct TpmMultiResult {
    CpModel model;
    Index clusters = 0;
    /// Fewer distinct clusters than the requested rank.
    bool incomplete = false;
};

/// L independent power-method runs, greedy 0.9-correlation clustering by
/// descending |weight|, top-k cluster representatives.
TpmMultiResult tpm_multi(const Tensor3& t, int inits, int iters, Index k, std::uint64_t seed,
                         InitKind init = InitKind::RandomSphere);

/// Sequential power method where each new start is projected orthogonal to
/// the factors found so far.
CpModel orth_tpm_run(const Tensor3& t, Index k, int iters, std::uint64_t seed);

/// Simultaneous diagonalization (Jennrich): eigenvectors of
/// M1 M2^+ and (M2^+ M1)^T for two random mode-3 projections.
/// Throws NumericalFailure on complex or clustered spectra after one redraw.
CpModel simdiag(const Tensor3& t, Index k, std::uint64_t seed);

// ---------------------------------------------------------------- registry

enum class Algorithm { Als, AlsSvd, OrthAls, Hybrid, Tpm, TpmSvd, OrthTpm, SimDiag };

std::string_view to_string(Algorithm a);
/// Accepts the ids printed by to_string ("als", "als-svd", "orth-als",
/// "hybrid", "tpm", "tpm-svd", "orth-tpm", "simdiag").
Algorithm parse_algorithm(std::string_view id);
const std::vector<Algorithm>& all_algorithms();

struct AlgorithmOptions {
    DecompConfig cfg;
    int tpm_inits = 100;
};

/// Dispatches to the matching driver. Power-method variants report
/// iterations_used = cfg.max_iters, simdiag reports 1; neither records a trace.
DecompResult run_algorithm(const Tensor3& t, Algorithm algo, const AlgorithmOptions& opts);

}  // namespace tenfact
