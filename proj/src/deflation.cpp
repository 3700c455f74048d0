#include <algorithm>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tenfact/error.hpp"
#include "tenfact/extensions.hpp"
#include "tenfact/rng.hpp"

#include "factor_ops.hpp"

namespace tenfact {

namespace {

CpModel concat(const CpModel& a, const CpModel& b) {
    if (a.rank() == 0) return b;
    const Index k = a.rank() + b.rank();
    CpModel m{Vector(k), Matrix(a.A.rows(), k), Matrix(a.B.rows(), k), Matrix(a.C.rows(), k)};
    m.weights << a.weights, b.weights;
    m.A << a.A, b.A;
    m.B << a.B, b.B;
    m.C << a.C, b.C;
    return m;
}

DenseTensor3 subtract(const DenseTensor3& t, const CpModel& m) {
    const DenseTensor3 r = cp_reconstruct(m);
    std::vector<double> out(t.data().begin(), t.data().end());
    const auto rd = r.data();
    for (std::size_t n = 0; n < out.size(); ++n) out[n] -= rd[n];
    return DenseTensor3(t.dims(), std::move(out));
}

/// One Gauss-Seidel sweep at the accumulated rank, weights re-absorbed.
CpModel refine(const Tensor3& t, const CpModel& m) {
    auto [A, B, C] = als_sweep(t, m.A, m.B, m.C);
    Vector w = detail::normalize_columns(A, nullptr, nullptr);
    w.array() *= detail::normalize_columns(B, nullptr, nullptr).array();
    w.array() *= detail::normalize_columns(C, nullptr, nullptr).array();
    CpModel out{std::move(w), std::move(A), std::move(B), std::move(C)};
    out.canonicalize();
    return out;
}

}  // namespace

DeflationResult deflate_overcomplete(const Tensor3& t, Index total_rank, Index block, const DecompConfig& inner) {
    if (total_rank < 1) throw InvalidArgument("deflate_overcomplete: total rank must be at least 1");
    const Dims d = t.dims();
    if (block <= 0) block = std::min({d.d1, d.d2, d.d3});

    const DenseTensor3 dense = to_dense(t);
    const bool multi = total_rank > block;

    DeflationResult out;
    out.model = CpModel{Vector(0), Matrix(d.d1, 0), Matrix(d.d2, 0), Matrix(d.d3, 0)};
    DenseTensor3 residual = dense;
    Index remaining = total_rank;
    for (std::uint64_t b = 0; remaining > 0; ++b) {
        DecompConfig cfg = inner;
        cfg.rank = std::min(block, remaining);
        cfg.seed = b == 0 ? inner.seed : derive_seed(inner.seed, b);
        if (cfg.init == InitKind::Given) {
            cfg.init = InitKind::RandomSphere;
            cfg.initial.reset();
        }
        cfg.record_trace = false;
        try {
            const DecompResult r = decompose(residual, cfg);
            out.model = concat(out.model, r.model);
            if (multi) out.model = refine(dense, out.model);
        } catch (const Error& e) {
            out.error = fmt::format("block {} failed: {}", b, e.what());
            spdlog::error("deflate_overcomplete: {}", *out.error);
            return out;
        }
        remaining -= cfg.rank;
        out.block_residuals.push_back(residual_ratio(dense, out.model));
        if (remaining > 0) residual = subtract(dense, out.model);
    }
    return out;
}

}  // namespace tenfact
