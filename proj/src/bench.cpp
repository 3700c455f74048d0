#include "tenfact/bench.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tenfact/error.hpp"
#include "tenfact/io.hpp"
#include "tenfact/linalg.hpp"
#include "tenfact/rng.hpp"

namespace tenfact::bench {

void SynthSpec::validate() const {
    if (d < 1 || k < 1) throw InvalidArgument("synthetic spec: d and k must be at least 1");
    if (!(ratio >= 1.0)) throw InvalidArgument("synthetic spec: weight ratio must be at least 1");
    if (!(noise >= 0.0)) throw InvalidArgument("synthetic spec: noise must be non-negative");
}

Vector geometric_weights(Index k, double ratio) {
    if (k < 1) throw InvalidArgument("geometric_weights: k must be at least 1");
    if (!(ratio >= 1.0)) throw InvalidArgument("geometric_weights: ratio must be at least 1");
    Vector w(k);
    if (k == 1) {
        w[0] = 1.0;
        return w;
    }
    for (Index i = 0; i < k; ++i) w[i] = std::pow(ratio, -static_cast<double>(i) / static_cast<double>(k - 1));
    w[k - 1] = 1.0 / ratio;
    return w;
}

Instance gen_random_cp(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    CpModel m;
    m.A = rng.unit_columns(spec.d, spec.k);
    m.B = spec.symmetric ? m.A : rng.unit_columns(spec.d, spec.k);
    m.C = spec.symmetric ? m.A : rng.unit_columns(spec.d, spec.k);
    m.weights = spec.scheme == WeightScheme::Uniform ? Vector::Ones(spec.k) : geometric_weights(spec.k, spec.ratio);
    DenseTensor3 t = cp_reconstruct(m);
    return {std::move(m), std::move(t)};
}

DenseTensor3 add_noise(const DenseTensor3& t, double sigma_rel, std::uint64_t seed) {
    if (!(sigma_rel >= 0.0)) throw InvalidArgument("add_noise: sigma must be non-negative");
    if (sigma_rel == 0.0) return t;
    Rng rng(seed);
    std::vector<double> data(t.data().begin(), t.data().end());
    for (double& v : data) v += sigma_rel * std::abs(v) * rng.normal();
    return DenseTensor3(t.dims(), std::move(data));
}

std::uint64_t instance_seed(std::uint64_t master, std::size_t grid_index, int trial) {
    return derive_seed(derive_seed(master, grid_index), static_cast<std::uint64_t>(trial));
}

TrialReport run_trial(const Tensor3& t, const CpModel& truth, Algorithm algo, const AlgorithmOptions& opts,
                      double threshold) {
    TrialReport rep;
    rep.algo = std::string(to_string(algo));
    rep.d = t.dims().d1;
    rep.k = opts.cfg.rank;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        DecompResult r = run_algorithm(t, algo, opts);
        rep.recovered = match_factors(truth, r.model, threshold).recovered_count;
        rep.residual = residual_ratio(t, r.model);
        rep.iters = r.iterations_used;
        rep.trace = std::move(r.residual_trace);
    } catch (const std::exception& e) {
        rep.failure = e.what();
        rep.recovered = 0;
        rep.residual = std::numeric_limits<double>::quiet_NaN();
        spdlog::warn("{} failed: {}", rep.algo, e.what());
    }
    rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

namespace {

std::vector<TrialReport> run_instance(const SynthSpec& spec, std::uint64_t seed, int trial,
                                      const std::vector<Algorithm>& algorithms, const AlgorithmOptions& base,
                                      double threshold) {
    SynthSpec s = spec;
    s.seed = seed;
    Instance inst = gen_random_cp(s);
    const DenseTensor3 input = spec.noise > 0.0 ? add_noise(inst.tensor, spec.noise, derive_seed(seed, 2))
                                                : std::move(inst.tensor);
    AlgorithmOptions opts = base;
    opts.cfg.rank = spec.k;
    opts.cfg.seed = derive_seed(seed, 1);
    std::vector<TrialReport> out;
    for (Algorithm a : algorithms) {
        TrialReport r = run_trial(input, inst.model, a, opts, threshold);
        r.d = spec.d;
        r.weight_ratio = spec.weight_ratio();
        r.noise = spec.noise;
        r.seed = seed;
        r.trial = trial;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

std::vector<TrialReport> run_recovery_suite(const SuiteConfig& cfg) {
    if (cfg.trials < 0) throw InvalidArgument("recovery suite: trials must be non-negative");
    for (const auto& s : cfg.grid) s.validate();

    AlgorithmOptions base;
    base.cfg.max_iters = cfg.max_iters;
    base.cfg.tol = cfg.tol;
    base.cfg.orth_steps = cfg.orth_steps;
    base.cfg.record_trace = cfg.record_trace;
    base.tpm_inits = cfg.tpm_inits;

    const std::size_t jobs = cfg.grid.size() * static_cast<std::size_t>(cfg.trials);
    std::vector<std::vector<TrialReport>> slots(jobs);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t j = 0; j < jobs; ++j) {
        const std::size_t g = j / static_cast<std::size_t>(cfg.trials);
        const int trial = static_cast<int>(j % static_cast<std::size_t>(cfg.trials));
        slots[j] = run_instance(cfg.grid[g], instance_seed(cfg.master_seed, g, trial), trial, cfg.algorithms, base,
                                cfg.threshold);
    }
    std::vector<TrialReport> out;
    for (auto& s : slots)
        for (auto& r : s) out.push_back(std::move(r));
    return out;
}

std::vector<TrialReport> run_residual_suite(const SynthSpec& spec, const std::vector<Algorithm>& algorithms,
                                            int max_iters, int seeds, std::uint64_t master_seed, int orth_steps,
                                            double tol) {
    SuiteConfig cfg;
    cfg.grid = {spec};
    cfg.algorithms = algorithms;
    cfg.trials = seeds;
    cfg.master_seed = master_seed;
    cfg.max_iters = max_iters;
    cfg.orth_steps = orth_steps;
    cfg.tol = tol;
    cfg.record_trace = true;
    return run_recovery_suite(cfg);
}

void write_report_csv(std::ostream& out, const std::vector<TrialReport>& rows) {
    out << "algo,d,k,weight_ratio,noise,seed,trial,recovered,residual,iters,wall_ms\n";
    for (const auto& r : rows) {
        out << fmt::format("{},{},{},{},{},{},{},{},{},{},{:.3f}\n", r.algo, r.d, r.k, io::format_double(r.weight_ratio),
                           io::format_double(r.noise), r.seed, r.trial, r.recovered, io::format_double(r.residual),
                           r.iters, r.wall_ms);
    }
}

void write_trace_csv(std::ostream& out, const std::vector<TrialReport>& rows) {
    out << "algo,seed,iter,residual\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.trace.size(); ++i) {
            out << fmt::format("{},{},{},{}\n", r.algo, r.seed, i + 1, io::format_double(r.trace[i]));
        }
    }
}

std::vector<SummaryRow> summarize(const std::vector<TrialReport>& rows) {
    std::vector<SummaryRow> out;
    std::vector<std::vector<double>> rec;
    std::vector<std::vector<double>> res;
    for (const auto& r : rows) {
        std::size_t i = 0;
        while (i < out.size() &&
               !(out[i].algo == r.algo && out[i].weight_ratio == r.weight_ratio && out[i].noise == r.noise))
            ++i;
        if (i == out.size()) {
            out.push_back({r.algo, r.weight_ratio, r.noise, 0.0, 0.0, 0.0, 0, 0});
            rec.emplace_back();
            res.emplace_back();
        }
        rec[i].push_back(static_cast<double>(r.recovered));
        if (r.failure) {
            ++out[i].failures;
        } else {
            res[i].push_back(r.residual);
        }
        ++out[i].runs;
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& v = rec[i];
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        out[i].mean_recovered = mean;
        out[i].sd_recovered = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
        double rm = 0.0;
        for (double x : res[i]) rm += x;
        out[i].mean_residual = res[i].empty() ? std::numeric_limits<double>::quiet_NaN()
                                              : rm / static_cast<double>(res[i].size());
    }
    return out;
}

}  // namespace tenfact::bench
