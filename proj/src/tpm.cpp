#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tenfact/decompose.hpp"
#include "tenfact/error.hpp"
#include "tenfact/rng.hpp"

namespace tenfact {

namespace {

constexpr double kClusterCorrelation = 0.9;
constexpr int kMaxProjectionRedraws = 3;

void check_unit(const Vector& v, Index expected, const char* name) {
    if (v.size() != expected) {
        throw InvalidArgument(fmt::format("tpm_run: {} has length {}, expected {}", name, v.size(), expected));
    }
    if (std::abs(v.norm() - 1.0) > 1e-8) throw InvalidArgument(fmt::format("tpm_run: {} must be a unit vector", name));
}

Vector normalized_update(Matrix u, int step, const char* name) {
    const double n = u.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw NumericalFailure(fmt::format("tpm_run: {} update vanished at step {}", name, step));
    }
    return u.col(0) / n;
}

double min_mode_corr(const TpmResult& a, const TpmResult& b) {
    return std::min({std::abs(a.x.dot(b.x)), std::abs(a.y.dot(b.y)), std::abs(a.z.dot(b.z))});
}

}  // namespace

TpmResult tpm_run(const Tensor3& t, const Vector& x0, const Vector& y0, const Vector& z0, int iters,
                  std::vector<Vector>* iterates) {
    const Dims d = t.dims();
    check_unit(x0, d.d1, "x0");
    check_unit(y0, d.d2, "y0");
    check_unit(z0, d.d3, "z0");
    if (iters < 0) throw InvalidArgument("tpm_run: iteration count must be non-negative");

    TpmResult r{0.0, x0, y0, z0, iters};
    if (iterates) {
        iterates->clear();
        iterates->push_back(x0);
    }
    for (int s = 1; s <= iters; ++s) {
        Vector x = normalized_update(t.mttkrp(1, r.y, r.z), s, "x");
        Vector y = normalized_update(t.mttkrp(2, r.x, r.z), s, "y");
        Vector z = normalized_update(t.mttkrp(3, r.x, r.y), s, "z");
        r.x = std::move(x);
        r.y = std::move(y);
        r.z = std::move(z);
        if (iterates) iterates->push_back(r.x);
    }
    r.weight = t.contract3(r.x, r.y, r.z);
    return r;
}

TpmMultiResult tpm_multi(const Tensor3& t, int inits, int iters, Index k, std::uint64_t seed, InitKind init) {
    if (k < 1) throw InvalidArgument("tpm_multi: k must be at least 1");
    if (inits < k) throw InvalidArgument(fmt::format("tpm_multi: {} initializations cannot yield {} factors", inits, k));
    if (init == InitKind::Given) throw InvalidArgument("tpm_multi: given initialization is not supported");
    const Dims d = t.dims();

    std::vector<std::optional<TpmResult>> runs(static_cast<std::size_t>(inits));
#pragma omp parallel for schedule(dynamic)
    for (int tau = 0; tau < inits; ++tau) {
        const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(tau));
        try {
            Vector x0, y0, z0;
            if (init == InitKind::Svd) {
                auto [A0, B0, C0] = svd_init(t, 1, s);
                x0 = A0.col(0);
                y0 = B0.col(0);
                z0 = C0.col(0);
            } else {
                Rng rng(s);
                x0 = rng.unit_vector(d.d1);
                y0 = rng.unit_vector(d.d2);
                z0 = rng.unit_vector(d.d3);
            }
            runs[static_cast<std::size_t>(tau)] = tpm_run(t, x0, y0, z0, iters);
        } catch (const NumericalFailure& e) {
            spdlog::warn("tpm_multi: initialization {} discarded: {}", tau, e.what());
        }
    }

    std::vector<const TpmResult*> ok;
    for (const auto& r : runs)
        if (r) ok.push_back(&*r);
    std::stable_sort(ok.begin(), ok.end(),
                     [](const TpmResult* a, const TpmResult* b) { return std::abs(a->weight) > std::abs(b->weight); });

    std::vector<const TpmResult*> reps;
    for (const TpmResult* r : ok) {
        const bool joined = std::any_of(reps.begin(), reps.end(), [&](const TpmResult* rep) {
            return min_mode_corr(*r, *rep) >= kClusterCorrelation;
        });
        if (!joined) reps.push_back(r);
    }

    TpmMultiResult out;
    out.clusters = static_cast<Index>(reps.size());
    out.incomplete = out.clusters < k;
    if (out.incomplete) {
        spdlog::warn("tpm_multi: only {} distinct clusters for rank {}", out.clusters, k);
    }
    const Index m = std::min(k, out.clusters);
    CpModel model{Vector(m), Matrix(d.d1, m), Matrix(d.d2, m), Matrix(d.d3, m)};
    for (Index r = 0; r < m; ++r) {
        const TpmResult& rep = *reps[static_cast<std::size_t>(r)];
        model.weights[r] = rep.weight;
        model.A.col(r) = rep.x;
        model.B.col(r) = rep.y;
        model.C.col(r) = rep.z;
    }
    model.canonicalize();
    out.model = std::move(model);
    return out;
}

CpModel orth_tpm_run(const Tensor3& t, Index k, int iters, std::uint64_t seed) {
    const Dims d = t.dims();
    const Index dmin = std::min({d.d1, d.d2, d.d3});
    if (k < 1 || k > dmin) {
        throw InvalidArgument(fmt::format("orth_tpm_run: k = {} must lie in [1, {}]", k, dmin));
    }
    Rng rng(seed);
    CpModel m{Vector(k), Matrix(d.d1, k), Matrix(d.d2, k), Matrix(d.d3, k)};

    auto project = [](Vector v, const Matrix& F, Index found) -> std::optional<Vector> {
        for (int pass = 0; pass < 2; ++pass)
            for (Index j = 0; j < found; ++j) v -= F.col(j).dot(v) * F.col(j);
        const double n = v.norm();
        if (n < 1e-8) return std::nullopt;
        return v / n;
    };

    for (Index i = 0; i < k; ++i) {
        Vector x = rng.unit_vector(d.d1);
        Vector y = rng.unit_vector(d.d2);
        Vector z = rng.unit_vector(d.d3);
        if (i > 0) {
            for (int attempt = 0;; ++attempt) {
                auto px = project(x, m.A, i);
                auto py = project(y, m.B, i);
                auto pz = project(z, m.C, i);
                if (px && py && pz) {
                    x = std::move(*px);
                    y = std::move(*py);
                    z = std::move(*pz);
                    break;
                }
                if (attempt >= kMaxProjectionRedraws) {
                    throw NumericalFailure(fmt::format("orth_tpm_run: start {} stayed in the span of earlier factors", i));
                }
                x = rng.unit_vector(d.d1);
                y = rng.unit_vector(d.d2);
                z = rng.unit_vector(d.d3);
            }
        }
        const TpmResult r = tpm_run(t, x, y, z, iters);
        m.weights[i] = r.weight;
        m.A.col(i) = r.x;
        m.B.col(i) = r.y;
        m.C.col(i) = r.z;
    }
    m.canonicalize();
    return m;
}

}  // namespace tenfact
