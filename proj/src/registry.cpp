#include <array>
#include <string>

#include <fmt/format.h>

#include "tenfact/decompose.hpp"
#include "tenfact/error.hpp"

namespace tenfact {

namespace {

struct Named {
    Algorithm algo;
    std::string_view id;
};

constexpr std::array<Named, 8> kNames{{
    {Algorithm::Als, "als"},
    {Algorithm::AlsSvd, "als-svd"},
    {Algorithm::OrthAls, "orth-als"},
    {Algorithm::Hybrid, "hybrid"},
    {Algorithm::Tpm, "tpm"},
    {Algorithm::TpmSvd, "tpm-svd"},
    {Algorithm::OrthTpm, "orth-tpm"},
    {Algorithm::SimDiag, "simdiag"},
}};

DecompResult wrap(CpModel m, int iters) {
    DecompResult r;
    r.model = std::move(m);
    r.iterations_used = iters;
    r.converged = true;
    return r;
}

}  // namespace

std::string_view to_string(Algorithm a) {
    for (const auto& n : kNames)
        if (n.algo == a) return n.id;
    return "unknown";
}

Algorithm parse_algorithm(std::string_view id) {
    for (const auto& n : kNames)
        if (n.id == id) return n.algo;
    throw InvalidArgument(fmt::format("unknown algorithm '{}'", id));
}

const std::vector<Algorithm>& all_algorithms() {
    static const std::vector<Algorithm> all = [] {
        std::vector<Algorithm> v;
        for (const auto& n : kNames) v.push_back(n.algo);
        return v;
    }();
    return all;
}

DecompResult run_algorithm(const Tensor3& t, Algorithm algo, const AlgorithmOptions& opts) {
    DecompConfig cfg = opts.cfg;
    switch (algo) {
        case Algorithm::Als:
            return als_run(t, cfg);
        case Algorithm::AlsSvd:
            cfg.init = InitKind::Svd;
            return als_run(t, cfg);
        case Algorithm::OrthAls:
            return orth_als_run(t, cfg);
        case Algorithm::Hybrid:
            return hybrid_run(t, cfg);
        case Algorithm::Tpm:
        case Algorithm::TpmSvd: {
            cfg.validate();
            const InitKind init = algo == Algorithm::TpmSvd ? InitKind::Svd : InitKind::RandomSphere;
            auto r = tpm_multi(t, opts.tpm_inits, cfg.max_iters, cfg.rank, cfg.seed, init);
            return wrap(std::move(r.model), cfg.max_iters);
        }
        case Algorithm::OrthTpm:
            cfg.validate();
            return wrap(orth_tpm_run(t, cfg.rank, cfg.max_iters, cfg.seed), cfg.max_iters);
        case Algorithm::SimDiag:
            cfg.validate();
            return wrap(simdiag(t, cfg.rank, cfg.seed), 1);
    }
    throw InvalidArgument("unhandled algorithm");
}

}  // namespace tenfact
