#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tenfact/decompose.hpp"
#include "tenfact/tensor.hpp"

namespace tenfact::bench {

enum class WeightScheme { Uniform, Geometric };

struct SynthSpec {
    Index d = 100;
    Index k = 30;
    WeightScheme scheme = WeightScheme::Uniform;
    /// w_max / w_min for the geometric scheme.
    double ratio = 1.0;
    /// Reuse A for B and C.
    bool symmetric = false;
    /// Per-entry noise standard deviation relative to |T_ijk|.
    double noise = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
    /// ratio as reported in CSV rows (1 for uniform).
    double weight_ratio() const { return scheme == WeightScheme::Uniform ? 1.0 : ratio; }
};

/// w_i = R^{-(i-1)/(k-1)}; all ones for k = 1.
Vector geometric_weights(Index k, double ratio);

struct Instance {
    CpModel model;
    /// Noiseless reconstruction of `model`.
    DenseTensor3 tensor;
};

/// Factors drawn uniformly from the unit sphere with a stream seeded by spec.seed.
Instance gen_random_cp(const SynthSpec& spec);

/// T'_ijk = T_ijk + N(0, (sigma_rel |T_ijk|)^2), i.i.d.
DenseTensor3 add_noise(const DenseTensor3& t, double sigma_rel, std::uint64_t seed);

struct TrialReport {
    std::string algo;
    Index d = 0;
    Index k = 0;
    double weight_ratio = 1.0;
    double noise = 0.0;
    /// Instance seed.
    std::uint64_t seed = 0;
    int trial = 0;
    Index recovered = 0;
    double residual = 0.0;
    int iters = 0;
    double wall_ms = 0.0;
    std::vector<double> trace;
    /// Exception text when the algorithm failed; recovered is then 0.
    std::optional<std::string> failure;
};

struct SuiteConfig {
    std::vector<SynthSpec> grid;
    std::vector<Algorithm> algorithms;
    int trials = 10;
    std::uint64_t master_seed = 0;
    int max_iters = 100;
    double tol = 1e-6;
    int orth_steps = 5;
    int tpm_inits = 100;
    double threshold = 0.9;
    bool record_trace = false;
};

/// Seed of the instance for grid point g, trial t.
std::uint64_t instance_seed(std::uint64_t master, std::size_t grid_index, int trial);

/// Every grid point x trial gets a fresh instance (seed from instance_seed;
/// the grid entry's own seed field is ignored) on which every algorithm runs
/// with seed derive_seed(instance seed, 1). Noise, when requested, uses
/// derive_seed(instance seed, 2). Trials run in parallel; rows come back
/// ordered by (grid, trial, algorithm).
std::vector<TrialReport> run_recovery_suite(const SuiteConfig& cfg);

/// Residual traces for `seeds` instances of one spec with trace recording on.
std::vector<TrialReport> run_residual_suite(const SynthSpec& spec, const std::vector<Algorithm>& algorithms,
                                            int max_iters, int seeds, std::uint64_t master_seed,
                                            int orth_steps = 5, double tol = 1e-6);

/// Runs one algorithm against a known model and fills a report.
TrialReport run_trial(const Tensor3& t, const CpModel& truth, Algorithm algo, const AlgorithmOptions& opts,
                      double threshold = 0.9);

/// Header `algo,d,k,weight_ratio,noise,seed,trial,recovered,residual,iters,wall_ms`.
void write_report_csv(std::ostream& out, const std::vector<TrialReport>& rows);
/// Header `algo,seed,iter,residual`, iterations 1-based.
void write_trace_csv(std::ostream& out, const std::vector<TrialReport>& rows);

struct SummaryRow {
    std::string algo;
    double weight_ratio;
    double noise;
    double mean_recovered;
    double sd_recovered;
    double mean_residual;
    int runs;
    int failures;
};

/// Mean / sample standard deviation per (algo, ratio, noise), in first-seen order.
std::vector<SummaryRow> summarize(const std::vector<TrialReport>& rows);

}  // namespace tenfact::bench
