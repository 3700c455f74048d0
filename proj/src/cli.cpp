#include "tenfact/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>
#include <omp.h>
#include <spdlog/spdlog.h>

#include "tenfact/bench.hpp"
#include "tenfact/decompose.hpp"
#include "tenfact/embed.hpp"
#include "tenfact/error.hpp"
#include "tenfact/extensions.hpp"
#include "tenfact/io.hpp"
#include "tenfact/linalg.hpp"
#include "tenfact/rng.hpp"

namespace tenfact::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------- shared plumbing

/// Everything needed to describe a run next to its outputs.
struct Manifest {
    std::string subcommand;
    json config = json::object();
    std::optional<std::uint64_t> seed;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
};

std::string utc_timestamp() {
    const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
    return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", now);
}

/// `<first output>.manifest.json`.
void write_manifest(const Manifest& m) {
    if (m.outputs.empty()) return;
    json j;
    j["subcommand"] = m.subcommand;
    j["config"] = m.config;
    if (m.seed) {
        j["seed"] = *m.seed;
    } else {
        j["seed"] = nullptr;
    }
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    j["version"] = kVersion;
    j["timestamp"] = utc_timestamp();
    std::ofstream out(m.outputs.front() + ".manifest.json");
    if (!out) throw InvalidArgument(fmt::format("cannot write manifest for {}", m.outputs.front()));
    out << j.dump(2) << '\n';
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument(fmt::format("cannot open '{}' for writing", path));
    return out;
}

/// Loads a ".coo" file; dense enough tensors are densified for faster kernels.
std::unique_ptr<Tensor3> load_tensor(const std::string& path) {
    SparseTensor3 s = io::read_coo(path);
    const double density = static_cast<double>(s.nnz()) / static_cast<double>(s.dims().size());
    if (density > 0.1) return std::make_unique<DenseTensor3>(densify(s));
    return std::make_unique<SparseTensor3>(std::move(s));
}

std::vector<double> parse_doubles(const std::string& list, const char* what) {
    std::vector<double> out;
    std::stringstream ss(list);
    for (std::string item; std::getline(ss, item, ',');) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InvalidArgument(fmt::format("--{}: '{}' is not a number", what, item));
        }
    }
    if (out.empty()) throw InvalidArgument(fmt::format("--{}: empty list", what));
    return out;
}

std::vector<Algorithm> parse_algorithms(const std::string& list) {
    std::vector<Algorithm> out;
    std::stringstream ss(list);
    for (std::string item; std::getline(ss, item, ',');) out.push_back(parse_algorithm(item));
    if (out.empty()) throw InvalidArgument("--algos: empty list");
    return out;
}

/// Options shared by the ALS-family drivers.
struct SolverFlags {
    std::string algo = "hybrid";
    Index rank = 1;
    int iters = 100;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    std::string init = "random";
    int hybrid_switch = 5;
    std::optional<int> rerand_period;
    int tpm_inits = 100;

    void add(CLI::App* app, const std::vector<std::string>& algos) {
        app->add_option("--algo", algo, "Algorithm")->check(CLI::IsMember(algos))->capture_default_str();
        app->add_option("--rank,-k", rank, "Number of components")->check(CLI::PositiveNumber)->capture_default_str();
        app->add_option("--iters", iters, "Maximum iterations")->check(CLI::NonNegativeNumber)->capture_default_str();
        app->add_option("--tol", tol, "Relative residual-change tolerance")->capture_default_str();
        app->add_option("--init", init, "Initialization")->check(CLI::IsMember({"random", "svd"}))->capture_default_str();
        app->add_option("--hybrid-switch", hybrid_switch, "Orthogonalized iterations before plain ALS")
            ->check(CLI::NonNegativeNumber)
            ->capture_default_str();
        app->add_option("--rerand-period", rerand_period, "Re-randomization period")->check(CLI::PositiveNumber);
    }

    /// ALS-family config for rank/iters/etc.; orth mode from --algo.
    DecompConfig config() const {
        DecompConfig cfg;
        cfg.rank = rank;
        cfg.max_iters = iters;
        cfg.tol = tol;
        cfg.seed = seed;
        cfg.orth_steps = hybrid_switch;
        cfg.rerandomize_period = rerand_period;
        cfg.init = init == "svd" ? InitKind::Svd : InitKind::RandomSphere;
        if (algo == "orth-als") cfg.orth_mode = OrthMode::Always;
        if (algo == "hybrid") cfg.orth_mode = OrthMode::FirstS;
        return cfg;
    }

    Algorithm algorithm() const {
        if (algo == "als") return init == "svd" ? Algorithm::AlsSvd : Algorithm::Als;
        if (algo == "tpm") return init == "svd" ? Algorithm::TpmSvd : Algorithm::Tpm;
        return parse_algorithm(algo);
    }

    json to_json() const {
        json j;
        j["algo"] = algo;
        j["rank"] = rank;
        j["iters"] = iters;
        j["tol"] = tol;
        j["init"] = init;
        j["hybrid_switch"] = hybrid_switch;
        if (rerand_period) {
            j["rerand_period"] = *rerand_period;
        } else {
            j["rerand_period"] = nullptr;
        }
        return j;
    }
};

void write_trace(const std::string& path, const std::string& algo, std::uint64_t seed, const std::vector<double>& trace) {
    auto out = open_out(path);
    out << "algo,seed,iter,residual\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        out << fmt::format("{},{},{},{}\n", algo, seed, i + 1, io::format_double(trace[i]));
    }
}

// ---------------------------------------------------------------- gen

struct GenFlags {
    Index d = 100;
    Index k = 30;
    double ratio = 1.0;
    bool symmetric = false;
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::string out;
    std::string model_out;
};

void cmd_gen(const GenFlags& f, std::ostream& os) {
    bench::SynthSpec spec;
    spec.d = f.d;
    spec.k = f.k;
    spec.scheme = f.ratio == 1.0 ? bench::WeightScheme::Uniform : bench::WeightScheme::Geometric;
    spec.ratio = f.ratio;
    spec.symmetric = f.symmetric;
    spec.noise = f.noise;
    spec.seed = f.seed;
    bench::Instance inst = bench::gen_random_cp(spec);
    const DenseTensor3 t = f.noise > 0.0 ? bench::add_noise(inst.tensor, f.noise, derive_seed(f.seed, 2)) : inst.tensor;
    io::write_coo(fs::path(f.out), t);
    Manifest m{"gen", {}, f.seed, {}, {f.out}};
    if (!f.model_out.empty()) {
        io::write_cpm(fs::path(f.model_out), inst.model);
        m.outputs.push_back(f.model_out);
    }
    m.config = {{"d", f.d}, {"k", f.k}, {"ratio", f.ratio}, {"symmetric", f.symmetric}, {"noise", f.noise}};
    write_manifest(m);
    os << fmt::format("wrote {}x{}x{} tensor of rank {} to {}\n", f.d, f.d, f.d, f.k, f.out);
}

// ---------------------------------------------------------------- decompose

struct DecomposeFlags {
    SolverFlags solver;
    std::string input;
    std::string out;
    std::string trace;
};

void cmd_decompose(const DecomposeFlags& f, std::ostream& os) {
    const auto t = load_tensor(f.input);
    AlgorithmOptions opts;
    opts.cfg = f.solver.config();
    opts.cfg.record_trace = !f.trace.empty();
    opts.tpm_inits = f.solver.tpm_inits;
    const Algorithm algo = f.solver.algorithm();
    const DecompResult r = run_algorithm(*t, algo, opts);
    const double res = residual_ratio(*t, r.model);

    io::write_cpm(fs::path(f.out), r.model);
    Manifest m{"decompose", f.solver.to_json(), f.solver.seed, {f.input}, {f.out}};
    m.config["tpm_inits"] = f.solver.tpm_inits;
    if (!f.trace.empty()) {
        write_trace(f.trace, std::string(to_string(algo)), f.solver.seed, r.residual_trace);
        m.outputs.push_back(f.trace);
    }
    write_manifest(m);
    os << fmt::format("{}: rank {} iterations {} converged {} residual {}\n", to_string(algo), r.model.rank(),
                      r.iterations_used, r.converged ? "yes" : "no", io::format_double(res));
}

// ---------------------------------------------------------------- bench

struct BenchFlags {
    Index d = 100;
    Index k = 30;
    std::string ratios = "1";
    std::string noise = "0";
    int trials = 10;
    std::string algos = "orth-als,hybrid,als";
    std::optional<std::uint64_t> seed;
    int iters = 100;
    double tol = 1e-6;
    int hybrid_switch = 5;
    int tpm_inits = 100;
    double threshold = 0.9;
    bool symmetric = false;
    bool no_timing = false;
    std::string out;
    std::string trace;
    // match
    std::string truth;
    std::string model;
};

std::vector<bench::SynthSpec> grid(const BenchFlags& f) {
    std::vector<bench::SynthSpec> g;
    for (double ratio : parse_doubles(f.ratios, "ratios")) {
        for (double noise : parse_doubles(f.noise, "noise")) {
            bench::SynthSpec s;
            s.d = f.d;
            s.k = f.k;
            s.scheme = ratio == 1.0 ? bench::WeightScheme::Uniform : bench::WeightScheme::Geometric;
            s.ratio = ratio;
            s.noise = noise;
            s.symmetric = f.symmetric;
            s.validate();
            g.push_back(s);
        }
    }
    return g;
}

json bench_json(const BenchFlags& f) {
    return {{"d", f.d},           {"k", f.k},         {"ratios", f.ratios},     {"noise", f.noise},
            {"trials", f.trials}, {"algos", f.algos}, {"iters", f.iters},       {"tol", f.tol},
            {"hybrid_switch", f.hybrid_switch},       {"tpm_inits", f.tpm_inits}, {"threshold", f.threshold},
            {"symmetric", f.symmetric},               {"no_timing", f.no_timing}};
}

void print_summary(std::ostream& os, const std::vector<bench::TrialReport>& rows) {
    os << fmt::format("{:<10} {:>8} {:>7} {:>10} {:>8} {:>12} {:>6} {:>6}\n", "algo", "ratio", "noise", "recovered",
                      "sd", "residual", "runs", "fail");
    for (const auto& s : bench::summarize(rows)) {
        os << fmt::format("{:<10} {:>8g} {:>7g} {:>10.2f} {:>8.2f} {:>12.4e} {:>6} {:>6}\n", s.algo, s.weight_ratio,
                          s.noise, s.mean_recovered, s.sd_recovered, s.mean_residual, s.runs, s.failures);
    }
}

void cmd_bench_recovery(const BenchFlags& f, bool residual_mode, std::ostream& os) {
    bench::SuiteConfig cfg;
    cfg.grid = grid(f);
    cfg.algorithms = parse_algorithms(f.algos);
    cfg.trials = f.trials;
    cfg.master_seed = *f.seed;
    cfg.max_iters = f.iters;
    cfg.tol = f.tol;
    cfg.orth_steps = f.hybrid_switch;
    cfg.tpm_inits = f.tpm_inits;
    cfg.threshold = f.threshold;
    cfg.record_trace = residual_mode || !f.trace.empty();
    std::vector<bench::TrialReport> rows = bench::run_recovery_suite(cfg);
    if (f.no_timing)
        for (auto& r : rows) r.wall_ms = 0.0;

    Manifest m{residual_mode ? "bench residual" : "bench recovery", bench_json(f), *f.seed, {}, {}};
    if (residual_mode) {
        auto out = open_out(f.out);
        bench::write_trace_csv(out, rows);
        m.outputs.push_back(f.out);
        if (!f.trace.empty()) {
            auto rep = open_out(f.trace);
            bench::write_report_csv(rep, rows);
            m.outputs.push_back(f.trace);
        }
    } else {
        auto out = open_out(f.out);
        bench::write_report_csv(out, rows);
        m.outputs.push_back(f.out);
        if (!f.trace.empty()) {
            auto tr = open_out(f.trace);
            bench::write_trace_csv(tr, rows);
            m.outputs.push_back(f.trace);
        }
    }
    write_manifest(m);
    print_summary(os, rows);
}

void cmd_bench_match(const BenchFlags& f, std::ostream& os) {
    const CpModel truth = io::read_cpm(fs::path(f.truth));
    const CpModel est = io::read_cpm(fs::path(f.model));
    const MatchResult r = match_factors(truth, est, f.threshold);
    if (!f.out.empty()) {
        auto out = open_out(f.out);
        out << "factor,correlation,recovered\n";
        for (std::size_t i = 0; i < r.correlations.size(); ++i) {
            out << fmt::format("{},{},{}\n", i, io::format_double(r.correlations[i]),
                               r.correlations[i] >= f.threshold ? 1 : 0);
        }
        write_manifest({"bench match", {{"threshold", f.threshold}}, f.seed, {f.truth, f.model}, {f.out}});
    }
    os << fmt::format("recovered {}/{} at threshold {}\n", r.recovered_count, truth.rank(), f.threshold);
}

// ---------------------------------------------------------------- complete

struct CompleteFlags {
    SolverFlags solver;
    std::string truth;
    std::string observed;
    std::optional<double> p;
    double ridge = 1e-8;
    std::string out;
    std::string trace;
};

void cmd_complete(const CompleteFlags& f, std::ostream& os) {
    std::optional<DenseTensor3> truth;
    CompletionProblem prob;
    Manifest m{"complete", f.solver.to_json(), f.solver.seed, {}, {f.out}};
    if (!f.truth.empty()) {
        if (!f.p) throw InvalidArgument("--truth requires --p");
        truth = densify(io::read_coo(f.truth));
        prob = sample_entries(*truth, *f.p, derive_seed(f.solver.seed, 3));
        m.inputs.push_back(f.truth);
    } else {
        io::CooFile c = io::read_coo_file(fs::path(f.observed));
        prob = CompletionProblem::from_entries(c.dims, c.entries);
        m.inputs.push_back(f.observed);
    }
    m.config["p"] = f.p ? json(*f.p) : json(nullptr);
    m.config["ridge"] = f.ridge;

    DecompConfig cfg = f.solver.config();
    cfg.init = InitKind::RandomSphere;
    cfg.record_trace = !f.trace.empty();
    const CompletionResult r = complete_masked(prob, cfg, f.ridge);

    io::write_cpm(fs::path(f.out), r.model);
    if (!f.trace.empty()) {
        auto out = open_out(f.trace);
        out << "algo,seed,iter,rmse\n";
        for (std::size_t i = 0; i < r.rmse_trace.size(); ++i) {
            out << fmt::format("{},{},{},{}\n", f.solver.algo, f.solver.seed, i + 1, io::format_double(r.rmse_trace[i]));
        }
        m.outputs.push_back(f.trace);
    }
    write_manifest(m);
    os << fmt::format("observed {} of {} entries, iterations {}\n", prob.observed_count(), prob.dims.size(),
                      r.iterations_used);
    if (truth) os << fmt::format("missing-entry error {}\n", io::format_double(missing_entry_error(*truth, prob, r.model)));
}

// ---------------------------------------------------------------- overcomplete

struct OvercompleteFlags {
    SolverFlags solver;
    std::string input;
    Index d = 50;
    double step = 1.05;
    Index block = 0;
    std::string out;
    std::string truth_out;
    double threshold = 0.9;
};

void cmd_overcomplete(const OvercompleteFlags& f, std::ostream& os) {
    std::unique_ptr<Tensor3> t;
    std::optional<CpModel> truth;
    Manifest m{"overcomplete", f.solver.to_json(), f.solver.seed, {}, {f.out}};
    if (!f.input.empty()) {
        t = load_tensor(f.input);
        m.inputs.push_back(f.input);
    } else {
        bench::SynthSpec spec;
        spec.d = f.d;
        spec.k = f.solver.rank;
        spec.ratio = std::pow(f.step, static_cast<double>(f.solver.rank - 1));
        spec.scheme = spec.ratio == 1.0 ? bench::WeightScheme::Uniform : bench::WeightScheme::Geometric;
        spec.seed = derive_seed(f.solver.seed, 4);
        bench::Instance inst = bench::gen_random_cp(spec);
        truth = std::move(inst.model);
        t = std::make_unique<DenseTensor3>(std::move(inst.tensor));
    }
    m.config["d"] = f.d;
    m.config["step"] = f.step;
    m.config["block"] = f.block;
    DecompConfig inner = f.solver.config();
    const DeflationResult r = deflate_overcomplete(*t, f.solver.rank, f.block, inner);
    if (r.error) throw NumericalFailure(*r.error);

    io::write_cpm(fs::path(f.out), r.model);
    if (truth && !f.truth_out.empty()) {
        io::write_cpm(fs::path(f.truth_out), *truth);
        m.outputs.push_back(f.truth_out);
    }
    write_manifest(m);
    os << fmt::format("model rank {} residual {}\n", r.model.rank(), io::format_double(r.block_residuals.back()));
    if (truth) {
        os << fmt::format("recovered {}/{} at threshold {}\n", match_factors(*truth, r.model, f.threshold).recovered_count,
                          truth->rank(), f.threshold);
    }
}

// ---------------------------------------------------------------- embed

struct EmbedFlags {
    // build
    std::vector<std::string> corpus;
    Index vocab_size = 2000;
    int window = 3;
    std::string tensor_out;
    std::string vocab_out;
    // factorize
    SolverFlags solver;
    std::string tensor;
    std::string vocab;
    bool no_scale = false;
    std::string out;
    std::string model_out;
    // eval
    std::string embeddings;
    std::string similarity;
    std::string analogy;
    // synth
    embed::PlantedSpec planted;
    std::string corpus_out;
    std::string analogy_out;
    std::size_t max_quads = 500;
};

void cmd_embed_build(const EmbedFlags& f, std::ostream& os) {
    std::vector<fs::path> files(f.corpus.begin(), f.corpus.end());
    const embed::TriOccurrence tri = embed::build_trioccurrence(files, f.vocab_size, f.window);
    embed::write_trioccurrence(f.tensor_out, tri.counts);
    embed::write_vocab(f.vocab_out, tri.vocab);
    write_manifest({"embed build",
                    {{"vocab_size", f.vocab_size}, {"window", f.window}},
                    std::nullopt,
                    f.corpus,
                    {f.tensor_out, f.vocab_out}});
    os << fmt::format("tokens {} vocabulary {} stored triples {} (expanded {})\n", tri.tokens, tri.vocab.size(),
                      tri.counts.nnz(), tri.counts.logical_nnz());
}

void cmd_embed_factorize(const EmbedFlags& f, std::ostream& os) {
    const SymmetricSparseTensor3 counts = embed::read_symmetric_coo(f.tensor);
    const embed::Vocab vocab = embed::read_vocab(f.vocab);
    if (vocab.size() != counts.dims().d1) {
        throw InvalidArgument(fmt::format("vocabulary has {} words but tensor dimension is {}", vocab.size(),
                                          counts.dims().d1));
    }
    if (counts.nnz() == 0) throw NumericalFailure("tri-occurrence tensor is empty");
    const SymmetricSparseTensor3 t = f.no_scale ? counts : embed::scale_log1p(counts);
    const DecompResult r = decompose(t, f.solver.config());
    const embed::EmbeddingMatrix e = embed::extract_embeddings(r.model);
    embed::write_embeddings(f.out, e, vocab);
    Manifest m{"embed factorize", f.solver.to_json(), f.solver.seed, {f.tensor, f.vocab}, {f.out}};
    m.config["no_scale"] = f.no_scale;
    if (!f.model_out.empty()) {
        io::write_cpm(fs::path(f.model_out), r.model);
        m.outputs.push_back(f.model_out);
    }
    write_manifest(m);
    const auto zero = std::count(e.zero_row.begin(), e.zero_row.end(), 1);
    os << fmt::format("rank {} iterations {} residual {} zero rows {}\n", r.model.rank(), r.iterations_used,
                      io::format_double(residual_ratio(t, r.model)), zero);
}

void cmd_embed_eval(const EmbedFlags& f, std::ostream& os) {
    if (f.similarity.empty() && f.analogy.empty()) throw InvalidArgument("give --similarity and/or --analogy");
    const auto [e, vocab] = embed::read_embeddings(f.embeddings);
    if (!f.similarity.empty()) {
        const auto r = embed::eval_similarity(e, vocab, embed::read_similarity(f.similarity));
        os << fmt::format("similarity spearman {} used {} skipped {}\n", io::format_double(r.value), r.used, r.skipped);
    }
    if (!f.analogy.empty()) {
        const auto r = embed::eval_analogy(e, vocab, embed::read_analogy(f.analogy));
        os << fmt::format("analogy accuracy {} used {} skipped {}\n", io::format_double(r.value), r.used, r.skipped);
    }
}

void cmd_embed_synth(const EmbedFlags& f, std::ostream& os) {
    auto out = open_out(f.corpus_out);
    embed::write_planted_corpus(out, f.planted);
    out.close();
    Manifest m{"embed synth",
               {{"concepts", f.planted.concepts},
                {"attributes", f.planted.attributes},
                {"anchors", f.planted.anchors},
                {"sentence_length", f.planted.sentence_length},
                {"sentences", f.planted.sentences},
                {"max_quads", f.max_quads}},
               f.planted.seed,
               {},
               {f.corpus_out}};
    if (!f.analogy_out.empty()) {
        embed::write_analogy(f.analogy_out, embed::planted_analogies(f.planted, f.max_quads));
        m.outputs.push_back(f.analogy_out);
    }
    write_manifest(m);
    os << fmt::format("wrote {} sentences; use --vocab-size {} and --rank {}\n", f.planted.sentences,
                      f.planted.vocab_size(), f.planted.topics());
}

// ---------------------------------------------------------------- dispatch

int guarded(const std::function<void()>& body, std::ostream& err) {
    try {
        body();
        return kOk;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const NumericalFailure& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kNumerical;
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"CP tensor decomposition toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::optional<int> threads;
    std::string log_level = "warn";
    app.add_option("--threads", threads, "Worker threads (default: all cores)")
        ->envname("TENFACT_THREADS")
        ->check(CLI::PositiveNumber);
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

    std::function<void()> action;
    const std::vector<std::string> als_family{"als", "orth-als", "hybrid"};

    // gen
    GenFlags gen;
    auto* g = app.add_subcommand("gen", "Random CP tensor with known factors");
    g->add_option("--d", gen.d, "Dimension")->check(CLI::PositiveNumber)->capture_default_str();
    g->add_option("--k", gen.k, "Rank")->check(CLI::PositiveNumber)->capture_default_str();
    g->add_option("--ratio", gen.ratio, "w_max/w_min, geometric spacing (1 = uniform)")->capture_default_str();
    g->add_flag("--symmetric", gen.symmetric, "Use A for all three modes");
    g->add_option("--noise", gen.noise, "Relative Gaussian noise")->capture_default_str();
    g->add_option("--seed", gen.seed, "Seed")->required();
    g->add_option("--out", gen.out, "Tensor .coo")->required();
    g->add_option("--model", gen.model_out, "Ground-truth .cpm");
    g->callback([&] { action = [&] { cmd_gen(gen, out); }; });

    // decompose
    DecomposeFlags dec;
    auto* d = app.add_subcommand("decompose", "Factorize a .coo tensor");
    d->add_option("input", dec.input, "Tensor .coo")->required()->check(CLI::ExistingFile);
    dec.solver.add(d, {"als", "orth-als", "hybrid", "tpm", "orth-tpm", "simdiag"});
    d->add_option("--seed", dec.solver.seed, "Seed")->capture_default_str();
    d->add_option("--tpm-inits", dec.solver.tpm_inits, "Power-method restarts")->check(CLI::PositiveNumber)
        ->capture_default_str();
    d->add_option("--out", dec.out, "Model .cpm")->required();
    d->add_option("--trace", dec.trace, "Residual trace CSV");
    d->callback([&] { action = [&] { cmd_decompose(dec, out); }; });

    // bench
    BenchFlags bf;
    auto* b = app.add_subcommand("bench", "Seeded synthetic experiments");
    b->require_subcommand(1);
    const auto add_suite = [&](CLI::App* s, const char* default_algos) {
        bf.algos = default_algos;
        s->add_option("--d", bf.d)->check(CLI::PositiveNumber)->capture_default_str();
        s->add_option("--k", bf.k)->check(CLI::PositiveNumber)->capture_default_str();
        s->add_option("--ratios", bf.ratios, "Comma-separated w_max/w_min values")->capture_default_str();
        s->add_option("--noise", bf.noise, "Comma-separated relative noise levels")->capture_default_str();
        s->add_option("--trials", bf.trials)->check(CLI::NonNegativeNumber)->capture_default_str();
        s->add_option("--algos", bf.algos, "Comma-separated algorithm ids")->capture_default_str();
        s->add_option("--seed", bf.seed, "Master seed")->required();
        s->add_option("--iters", bf.iters)->check(CLI::NonNegativeNumber)->capture_default_str();
        s->add_option("--tol", bf.tol)->capture_default_str();
        s->add_option("--hybrid-switch", bf.hybrid_switch)->check(CLI::NonNegativeNumber)->capture_default_str();
        s->add_option("--tpm-inits", bf.tpm_inits)->check(CLI::PositiveNumber)->capture_default_str();
        s->add_option("--threshold", bf.threshold)->capture_default_str();
        s->add_flag("--symmetric", bf.symmetric);
        s->add_flag("--no-timing", bf.no_timing, "Write wall_ms as 0 for byte-comparable CSVs");
    };
    auto* br = b->add_subcommand("recovery", "Recovered-factor counts");
    add_suite(br, "orth-als,hybrid,als");
    br->add_option("--out", bf.out, "Report CSV")->required();
    br->add_option("--trace", bf.trace, "Residual trace CSV");
    br->callback([&] { action = [&] { cmd_bench_recovery(bf, false, out); }; });
    auto* bres = b->add_subcommand("residual", "Residual traces");
    add_suite(bres, "orth-als,hybrid,als");
    bres->add_option("--out", bf.out, "Trace CSV")->required();
    bres->add_option("--report", bf.trace, "Report CSV");
    bres->callback([&] { action = [&] { cmd_bench_recovery(bf, true, out); }; });
    auto* bm = b->add_subcommand("match", "Count recovered factors of a model");
    bm->add_option("--truth", bf.truth, "Ground-truth .cpm")->required()->check(CLI::ExistingFile);
    bm->add_option("--model", bf.model, "Estimated .cpm")->required()->check(CLI::ExistingFile);
    bm->add_option("--threshold", bf.threshold)->capture_default_str();
    bm->add_option("--seed", bf.seed, "Seed (recorded only)")->required();
    bm->add_option("--out", bf.out, "Per-factor correlation CSV");
    bm->callback([&] { action = [&] { cmd_bench_match(bf, out); }; });

    // complete
    CompleteFlags cf;
    auto* c = app.add_subcommand("complete", "Masked ALS tensor completion");
    auto* truth_opt = c->add_option("--truth", cf.truth, "Full tensor .coo to sample from")->check(CLI::ExistingFile);
    auto* obs_opt = c->add_option("--observed", cf.observed, "Observed entries .coo")->check(CLI::ExistingFile);
    truth_opt->excludes(obs_opt);
    c->add_option("--p", cf.p, "Sampling probability (with --truth)")->check(CLI::Range(0.0, 1.0));
    cf.solver.add(c, als_family);
    c->add_option("--seed", cf.solver.seed)->capture_default_str();
    c->add_option("--ridge", cf.ridge)->capture_default_str();
    c->add_option("--out", cf.out, "Model .cpm")->required();
    c->add_option("--trace", cf.trace, "RMSE trace CSV");
    c->callback([&] {
        if (cf.truth.empty() && cf.observed.empty()) throw CLI::ValidationError("complete", "--truth or --observed required");
        action = [&] { cmd_complete(cf, out); };
    });

    // overcomplete
    OvercompleteFlags of;
    of.solver.rank = 60;
    auto* o = app.add_subcommand("overcomplete", "Rank beyond the dimension by deflation");
    o->add_option("--input", of.input, "Tensor .coo (default: generate one)")->check(CLI::ExistingFile);
    of.solver.add(o, als_family);
    o->add_option("--seed", of.solver.seed)->capture_default_str();
    o->add_option("--d", of.d, "Dimension of the generated tensor")->check(CLI::PositiveNumber)->capture_default_str();
    o->add_option("--step", of.step, "Consecutive weight ratio of the generated tensor")->capture_default_str();
    o->add_option("--block", of.block, "Components per block (0 = min dimension)")->capture_default_str();
    o->add_option("--threshold", of.threshold)->capture_default_str();
    o->add_option("--out", of.out, "Model .cpm")->required();
    o->add_option("--truth-out", of.truth_out, "Generated ground truth .cpm");
    o->callback([&] { action = [&] { cmd_overcomplete(of, out); }; });

    // embed
    EmbedFlags ef;
    auto* e = app.add_subcommand("embed", "Word embeddings from tri-occurrence counts");
    e->require_subcommand(1);
    auto* eb = e->add_subcommand("build", "Count tri-occurrences");
    eb->add_option("--corpus", ef.corpus, "UTF-8 text files")->required()->check(CLI::ExistingFile);
    eb->add_option("--vocab-size", ef.vocab_size)->check(CLI::PositiveNumber)->capture_default_str();
    eb->add_option("--window", ef.window)->check(CLI::Range(3, 1000))->capture_default_str();
    eb->add_option("--out", ef.tensor_out, "Counts .coo")->required();
    eb->add_option("--vocab-out", ef.vocab_out, "Vocabulary TSV")->required();
    eb->callback([&] { action = [&] { cmd_embed_build(ef, out); }; });
    auto* efz = e->add_subcommand("factorize", "CP-factorize counts into embeddings");
    efz->add_option("--tensor", ef.tensor, "Counts .coo")->required()->check(CLI::ExistingFile);
    efz->add_option("--vocab", ef.vocab, "Vocabulary TSV")->required()->check(CLI::ExistingFile);
    ef.solver.rank = 50;
    ef.solver.add(efz, als_family);
    efz->add_option("--seed", ef.solver.seed)->capture_default_str();
    efz->add_flag("--no-scale", ef.no_scale, "Skip the log(1+x) scaling");
    efz->add_option("--out", ef.out, "Embedding TSV")->required();
    efz->add_option("--model", ef.model_out, "Model .cpm");
    efz->callback([&] { action = [&] { cmd_embed_factorize(ef, out); }; });
    auto* ev = e->add_subcommand("eval", "Similarity and analogy scores");
    ev->add_option("--embeddings", ef.embeddings, "Embedding TSV")->required()->check(CLI::ExistingFile);
    ev->add_option("--similarity", ef.similarity, "word1 word2 score")->check(CLI::ExistingFile);
    ev->add_option("--analogy", ef.analogy, "a a* b b*")->check(CLI::ExistingFile);
    ev->callback([&] { action = [&] { cmd_embed_eval(ef, out); }; });
    auto* es = e->add_subcommand("synth", "Corpus with planted analogies");
    es->add_option("--concepts", ef.planted.concepts)->capture_default_str();
    es->add_option("--attributes", ef.planted.attributes)->capture_default_str();
    es->add_option("--anchors", ef.planted.anchors)->capture_default_str();
    es->add_option("--sentences", ef.planted.sentences)->capture_default_str();
    es->add_option("--seed", ef.planted.seed)->capture_default_str();
    es->add_option("--max-quads", ef.max_quads)->capture_default_str();
    es->add_option("--out", ef.corpus_out, "Corpus text")->required();
    es->add_option("--analogy-out", ef.analogy_out, "Analogy TSV");
    es->callback([&] { action = [&] { cmd_embed_synth(ef, out); }; });

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& pe) {
        const int code = app.exit(pe, out, err);
        return code == 0 ? kOk : kUsage;
    } catch (const Error& ex) {
        err << "error: " << ex.what() << '\n';
        return kUsage;
    }

    spdlog::set_level(spdlog::level::from_str(log_level));
    if (threads) omp_set_num_threads(*threads);
    if (!action) return kUsage;
    return guarded(action, err);
}

}  // namespace tenfact::cli
