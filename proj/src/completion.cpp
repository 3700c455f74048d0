#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tenfact/error.hpp"
#include "tenfact/extensions.hpp"
#include "tenfact/rng.hpp"

#include "factor_ops.hpp"

namespace tenfact {

namespace {

struct Obs {
    std::array<Index, 3> c;
    double v;
};

/// Observations grouped by the index of one mode (CSR-style).
struct ModeIndex {
    std::vector<std::size_t> order;
    std::vector<std::size_t> offsets;  // size d + 1
};

ModeIndex group_by(const std::vector<Obs>& obs, int mode, Index d) {
    ModeIndex g;
    g.offsets.assign(static_cast<std::size_t>(d) + 1, 0);
    for (const auto& o : obs) ++g.offsets[static_cast<std::size_t>(o.c[mode]) + 1];
    std::partial_sum(g.offsets.begin(), g.offsets.end(), g.offsets.begin());
    g.order.resize(obs.size());
    std::vector<std::size_t> next(g.offsets.begin(), g.offsets.end() - 1);
    for (std::size_t n = 0; n < obs.size(); ++n) g.order[next[static_cast<std::size_t>(obs[n].c[mode])]++] = n;
    return g;
}

std::size_t linear(const Dims& d, Index i, Index j, Index k) {
    return static_cast<std::size_t>((i * d.d2 + j) * d.d3 + k);
}

class MaskedSolver {
public:
    MaskedSolver(const CompletionProblem& p, double ridge) : dims_(p.dims), ridge_(ridge) {
        for (const auto& e : p.observed.entries()) obs_.push_back({{e.i, e.j, e.k}, e.value});
        for (const auto& z : p.observed_zeros) obs_.push_back({z, 0.0});
        for (int m = 0; m < 3; ++m) groups_[m] = group_by(obs_, m, dims_[m + 1]);
        double ss = 0.0;
        for (const auto& o : obs_) ss += o.v * o.v;
        value_rms_ = obs_.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(obs_.size()));
    }

    std::vector<Index> empty_rows(int mode) const {
        std::vector<Index> out;
        const auto& off = groups_[mode].offsets;
        for (std::size_t i = 0; i + 1 < off.size(); ++i)
            if (off[i] == off[i + 1]) out.push_back(static_cast<Index>(i));
        return out;
    }

    /// Ridge LS for every row of the `mode` factor; P, Q are the other two
    /// factors in increasing mode order. Rows without data keep `current`.
    Matrix solve_mode(int mode, const Matrix& P, const Matrix& Q, const Matrix& current) const {
        const int mp = mode == 0 ? 1 : 0;
        const int mq = mode == 2 ? 1 : 2;
        const Index k = P.cols();
        const auto& g = groups_[mode];
        const Index rows = dims_[mode + 1];
        Matrix out = current;
#pragma omp parallel for schedule(static)
        for (Index i = 0; i < rows; ++i) {
            const std::size_t b = g.offsets[static_cast<std::size_t>(i)];
            const std::size_t e = g.offsets[static_cast<std::size_t>(i) + 1];
            if (b == e) continue;
            Matrix H = Matrix::Zero(k, k);
            Vector rhs = Vector::Zero(k);
            Vector h(k);
            for (std::size_t n = b; n < e; ++n) {
                const Obs& o = obs_[g.order[n]];
                h = P.row(o.c[mp]).cwiseProduct(Q.row(o.c[mq])).transpose();
                H.selfadjointView<Eigen::Lower>().rankUpdate(h);
                rhs += o.v * h;
            }
            H.diagonal().array() += ridge_;
            out.row(i) = H.selfadjointView<Eigen::Lower>().ldlt().solve(rhs).transpose();
        }
        return out;
    }

    /// Ridge LS weights for fixed unit-norm factors.
    Vector solve_weights(const Matrix& A, const Matrix& B, const Matrix& C) const {
        const Index k = A.cols();
        Matrix H = Matrix::Zero(k, k);
        Vector rhs = Vector::Zero(k);
        Vector h(k);
        for (const auto& o : obs_) {
            h = A.row(o.c[0]).cwiseProduct(B.row(o.c[1])).cwiseProduct(C.row(o.c[2])).transpose();
            H.selfadjointView<Eigen::Lower>().rankUpdate(h);
            rhs += o.v * h;
        }
        H.diagonal().array() += ridge_;
        return H.selfadjointView<Eigen::Lower>().ldlt().solve(rhs);
    }

    double rmse(const Vector& w, const Matrix& A, const Matrix& B, const Matrix& C) const {
        if (obs_.empty()) return 0.0;
        double ss = 0.0;
        for (const auto& o : obs_) {
            const double pred = (w.transpose().array() * A.row(o.c[0]).array() * B.row(o.c[1]).array() *
                                 C.row(o.c[2]).array())
                                    .sum();
            ss += (o.v - pred) * (o.v - pred);
        }
        return std::sqrt(ss / static_cast<double>(obs_.size()));
    }

    double value_rms() const { return value_rms_; }

private:
    Dims dims_;
    double ridge_;
    std::vector<Obs> obs_;
    std::array<ModeIndex, 3> groups_;
    double value_rms_ = 0.0;
};

}  // namespace

CompletionProblem CompletionProblem::from_entries(Dims dims, const std::vector<SparseTensor3::Entry>& entries) {
    CompletionProblem p;
    p.dims = dims;
    std::vector<SparseTensor3::Entry> values;
    for (const auto& e : entries) {
        if (e.value == 0.0) {
            p.observed_zeros.push_back({e.i, e.j, e.k});
        } else {
            values.push_back(e);
        }
    }
    // Range and duplicate checks run on the raw lists before the sparse
    // constructor would silently merge repeats.
    CompletionProblem raw;
    raw.dims = dims;
    raw.observed_zeros = p.observed_zeros;
    for (const auto& e : values) raw.observed_zeros.push_back({e.i, e.j, e.k});
    raw.validate();
    p.observed = SparseTensor3(dims, std::move(values));
    return p;
}

void CompletionProblem::validate() const {
    if (observed.nnz() > 0 && observed.dims() != dims) throw InvalidArgument("completion: observed dims mismatch");
    std::vector<std::size_t> idx;
    idx.reserve(observed_count());
    auto add = [&](Index i, Index j, Index k) {
        if (i < 0 || i >= dims.d1 || j < 0 || j >= dims.d2 || k < 0 || k >= dims.d3) {
            throw InvalidArgument(fmt::format("completion: entry ({}, {}, {}) out of range", i, j, k));
        }
        idx.push_back(linear(dims, i, j, k));
    };
    for (const auto& e : observed.entries()) add(e.i, e.j, e.k);
    for (const auto& z : observed_zeros) add(z[0], z[1], z[2]);
    std::sort(idx.begin(), idx.end());
    if (std::adjacent_find(idx.begin(), idx.end()) != idx.end()) {
        throw InvalidArgument("completion: an entry is observed more than once");
    }
}

std::vector<char> CompletionProblem::mask() const {
    std::vector<char> m(static_cast<std::size_t>(dims.size()), 0);
    for (const auto& e : observed.entries()) m[linear(dims, e.i, e.j, e.k)] = 1;
    for (const auto& z : observed_zeros) m[linear(dims, z[0], z[1], z[2])] = 1;
    return m;
}

CompletionProblem sample_entries(const DenseTensor3& truth, double p, std::uint64_t seed) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("sample_entries: p must lie in [0, 1]");
    const Dims d = truth.dims();
    Rng rng(seed);
    std::vector<SparseTensor3::Entry> picked;
    for (Index i = 0; i < d.d1; ++i)
        for (Index j = 0; j < d.d2; ++j)
            for (Index k = 0; k < d.d3; ++k)
                if (rng.uniform() < p) picked.push_back({i, j, k, truth(i, j, k)});
    CompletionProblem out = CompletionProblem::from_entries(d, picked);
    out.sampling_probability = p;
    return out;
}

CompletionResult complete_masked(const CompletionProblem& p, const DecompConfig& cfg, double ridge) {
    cfg.validate();
    p.validate();
    if (!(ridge >= 0.0)) throw InvalidArgument("complete_masked: ridge must be non-negative");
    if (cfg.init == InitKind::Svd) throw InvalidArgument("complete_masked: SVD initialization needs the full tensor");
    const Dims d = p.dims;
    const Index k = cfg.rank;
    const bool any_orth =
        cfg.orth_mode == OrthMode::Always || (cfg.orth_mode == OrthMode::FirstS && cfg.orth_steps > 0);
    if (any_orth && k > std::min({d.d1, d.d2, d.d3})) {
        throw InvalidArgument("complete_masked: rank exceeds the smallest dimension; orthogonalization impossible");
    }

    const MaskedSolver solver(p, ridge);
    CompletionResult res;
    for (int m = 0; m < 3; ++m) {
        res.unconstrained_rows[static_cast<std::size_t>(m)] = solver.empty_rows(m);
        if (!res.unconstrained_rows[static_cast<std::size_t>(m)].empty()) {
            spdlog::warn("complete_masked: {} rows of mode {} have no observations and stay at their initial values",
                         res.unconstrained_rows[static_cast<std::size_t>(m)].size(), m + 1);
        }
    }

    Rng rng(cfg.seed);
    Matrix A, B, C;
    if (cfg.init == InitKind::Given) {
        if (cfg.initial->dims() != d) throw InvalidArgument("complete_masked: initial model dimensions differ");
        A = cfg.initial->A;
        B = cfg.initial->B;
        C = cfg.initial->C;
    } else {
        A = rng.unit_columns(d.d1, k);
        B = rng.unit_columns(d.d2, k);
        C = rng.unit_columns(d.d3, k);
    }
    Vector w = Vector::Ones(k);
    int redraws = 0;
    const double floor = 1e-13 * solver.value_rms();
    double prev = std::numeric_limits<double>::quiet_NaN();

    for (int it = 1; it <= cfg.max_iters; ++it) {
        const bool orth =
            cfg.orth_mode == OrthMode::Always || (cfg.orth_mode == OrthMode::FirstS && it <= cfg.orth_steps);
        if (orth) {
            A = detail::orthogonalize(std::move(A), rng, redraws, 'A');
            B = detail::orthogonalize(std::move(B), rng, redraws, 'B');
            C = detail::orthogonalize(std::move(C), rng, redraws, 'C');
            Matrix X = solver.solve_mode(0, B, C, A);
            Matrix Y = solver.solve_mode(1, A, C, B);
            Matrix Z = solver.solve_mode(2, A, B, C);
            detail::normalize_columns(X, &rng, &redraws);
            detail::normalize_columns(Y, &rng, &redraws);
            detail::normalize_columns(Z, &rng, &redraws);
            A = std::move(X);
            B = std::move(Y);
            C = std::move(Z);
            w = solver.solve_weights(A, B, C);
        } else {
            A = solver.solve_mode(0, B, C, A);
            detail::normalize_columns(A, nullptr, nullptr);
            B = solver.solve_mode(1, A, C, B);
            detail::normalize_columns(B, nullptr, nullptr);
            C = solver.solve_mode(2, A, B, C);
            w = detail::normalize_columns(C, nullptr, nullptr);
        }

        const double r = solver.rmse(w, A, B, C);
        if (cfg.record_trace) res.rmse_trace.push_back(r);
        res.iterations_used = it;
        if (r <= floor || (it > 1 && std::abs(prev - r) <= cfg.tol * prev)) {
            res.converged = true;
            break;
        }
        prev = r;
    }
    res.model = CpModel{std::move(w), std::move(A), std::move(B), std::move(C)};
    res.model.canonicalize();
    return res;
}

double missing_entry_error(const DenseTensor3& truth, const CompletionProblem& p, const CpModel& m) {
    const Dims d = truth.dims();
    if (p.dims != d || m.dims() != d) throw InvalidArgument("missing_entry_error: dimensions differ");
    const std::vector<char> mask = p.mask();
    const DenseTensor3 rec = cp_reconstruct(m);
    const auto t = truth.data();
    const auto r = rec.data();
    double err = 0.0;
    double ref = 0.0;
    std::size_t missing = 0;
    for (std::size_t n = 0; n < t.size(); ++n) {
        if (mask[n]) continue;
        ++missing;
        err += (t[n] - r[n]) * (t[n] - r[n]);
        ref += t[n] * t[n];
    }
    if (missing == 0) return 0.0;
    if (ref == 0.0) return err == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(err / ref);
}

}  // namespace tenfact
