#include <doctest.h>

#include "oracles.hpp"
#include "tenfact/bench.hpp"
#include "tenfact/error.hpp"
#include "tenfact/extensions.hpp"
#include "tenfact/linalg.hpp"

using namespace tenfact;

namespace {

DecompConfig inner(Index k, OrthMode mode, std::uint64_t seed) {
    DecompConfig c;
    c.rank = k;
    c.orth_mode = mode;
    c.seed = seed;
    c.max_iters = 100;
    return c;
}

bench::Instance instance(Index d, Index k, std::uint64_t seed) {
    bench::SynthSpec s;
    s.d = d;
    s.k = k;
    s.seed = seed;
    return bench::gen_random_cp(s);
}

// Loop oracle for the relative missing-entry error.
double missing_oracle(const DenseTensor3& truth, const std::vector<char>& mask, const CpModel& m) {
    double num = 0.0, den = 0.0;
    const Dims d = truth.dims();
    std::size_t n = 0;
    for (Index i = 0; i < d.d1; ++i)
        for (Index j = 0; j < d.d2; ++j)
            for (Index k = 0; k < d.d3; ++k, ++n) {
                if (mask[n]) continue;
                const double e = truth(i, j, k) - oracle::entry(m, i, j, k);
                num += e * e;
                den += truth(i, j, k) * truth(i, j, k);
            }
    return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("deflation with r <= d is a single hybrid run") {
    const auto inst = instance(10, 4, 1);
    const DecompConfig c = inner(4, OrthMode::FirstS, 2);
    const DeflationResult r = deflate_overcomplete(inst.tensor, 4, 10, c);
    const DecompResult h = hybrid_run(inst.tensor, c);
    CHECK(r.model.A == h.model.A);
    CHECK(r.model.weights == h.model.weights);
    CHECK(r.block_residuals.size() == 1);
}

TEST_CASE("deflation of a rank-d tensor stops after one block") {
    const CpModel truth{Vector::LinSpaced(6, 2.0, 1.0), Matrix::Identity(6, 6), Matrix::Identity(6, 6),
                        Matrix::Identity(6, 6)};
    const DeflationResult r = deflate_overcomplete(cp_reconstruct(truth), 6, 6, inner(6, OrthMode::FirstS, 3));
    REQUIRE(r.block_residuals.size() == 1);
    CHECK(r.block_residuals[0] < 1e-6);
}

TEST_CASE("overcomplete deflation residual is non-increasing in blocks") {
    bench::SynthSpec s;
    s.d = 12;
    s.k = 18;
    s.scheme = bench::WeightScheme::Geometric;
    s.ratio = std::pow(1.05, 17);
    s.seed = 4;
    const auto inst = bench::gen_random_cp(s);
    const DeflationResult r = deflate_overcomplete(inst.tensor, 18, 6, inner(6, OrthMode::FirstS, 5));
    CHECK_FALSE(r.error.has_value());
    CHECK(r.model.rank() == 18);
    REQUIRE(r.block_residuals.size() == 3);
    for (std::size_t b = 1; b < r.block_residuals.size(); ++b) {
        CHECK(r.block_residuals[b] <= r.block_residuals[b - 1] + 1e-12);
    }
}

TEST_CASE("completion with every entry observed") {
    const auto inst = instance(8, 3, 6);
    const CompletionProblem p = sample_entries(inst.tensor, 1.0, 7);
    CHECK(p.observed_count() == 512);
    DecompConfig c = inner(3, OrthMode::FirstS, 8);
    c.tol = 1e-12;
    c.max_iters = 300;
    const CompletionResult r = complete_masked(p, c, 1e-12);
    CHECK(residual_ratio(inst.tensor, r.model) < 1e-6);
    CHECK(missing_entry_error(inst.tensor, p, r.model) == 0.0);
}

TEST_CASE("full observation with vanishing ridge matches hybrid_run") {
    const auto inst = instance(8, 3, 9);
    const CompletionProblem p = sample_entries(inst.tensor, 1.0, 10);
    DecompConfig c = inner(3, OrthMode::FirstS, 11);
    c.tol = 1e-12;
    c.max_iters = 300;
    const CompletionResult r = complete_masked(p, c, 0.0);
    const DecompResult h = hybrid_run(inst.tensor, c);
    CHECK(std::abs(residual_ratio(inst.tensor, r.model) - residual_ratio(inst.tensor, h.model)) <= 1e-6);
}

TEST_CASE("completion from a single observed entry") {
    const CompletionProblem p = CompletionProblem::from_entries({3, 3, 3}, {{1, 2, 0, 2.5}});
    DecompConfig c = inner(1, OrthMode::None, 12);
    const CompletionResult r = complete_masked(p, c);
    CHECK(oracle::entry(r.model, 1, 2, 0) == doctest::Approx(2.5).epsilon(1e-6));
    CHECK(r.unconstrained_rows[0] == std::vector<Index>{0, 2});
    CHECK(r.unconstrained_rows[1] == std::vector<Index>{0, 1});
    CHECK(r.unconstrained_rows[2] == std::vector<Index>{1, 2});
}

TEST_CASE("completion problem validation") {
    CHECK_THROWS_AS(CompletionProblem::from_entries({2, 2, 2}, {{0, 0, 2, 1.0}}), InvalidArgument);
    CHECK_THROWS_AS(CompletionProblem::from_entries({2, 2, 2}, {{0, 0, 0, 1.0}, {0, 0, 0, 0.0}}), InvalidArgument);
    const CompletionProblem z = CompletionProblem::from_entries({2, 2, 2}, {{0, 0, 0, 0.0}, {1, 1, 1, 3.0}});
    CHECK(z.observed_count() == 2);
    CHECK(z.observed_zeros.size() == 1);
    const auto m = z.mask();
    CHECK(m[0] == 1);
    CHECK(m[7] == 1);
    CHECK(m[3] == 0);
}

TEST_CASE("missing_entry_error examples") {
    const auto inst = instance(5, 2, 13);
    const CompletionProblem p = sample_entries(inst.tensor, 0.3, 14);
    CHECK(missing_entry_error(inst.tensor, p, inst.model) <= 1e-14);
    CHECK(missing_entry_error(inst.tensor, p, CpModel::zeros({5, 5, 5}, 2)) == doctest::Approx(1.0));

    // Hand 2x2x2 case: truth all ones, entries (0,0,0) and (1,1,1) observed,
    // model w = 0.5 on e1 e1 e1 so every missing entry is off by 1.
    const DenseTensor3 ones = DenseTensor3::from_function({2, 2, 2}, [](Index, Index, Index) { return 1.0; });
    const CompletionProblem h = CompletionProblem::from_entries({2, 2, 2}, {{0, 0, 0, 1.0}, {1, 1, 1, 1.0}});
    CpModel m{Vector::Constant(1, 0.5), Matrix::Identity(2, 1), Matrix::Identity(2, 1), Matrix::Identity(2, 1)};
    CHECK(missing_entry_error(ones, h, m) == doctest::Approx(missing_oracle(ones, h.mask(), m)).epsilon(1e-14));
    CHECK(missing_entry_error(ones, h, m) == doctest::Approx(1.0));

    Rng rng(15);
    const CpModel est = oracle::random_model({5, 5, 5}, 2, rng);
    CHECK(missing_entry_error(inst.tensor, p, est) ==
          doctest::Approx(missing_oracle(inst.tensor, p.mask(), est)).epsilon(1e-12));

    CpModel flipped = est;
    flipped.A.col(0).swap(flipped.A.col(1));
    flipped.B.col(0).swap(flipped.B.col(1));
    flipped.C.col(0).swap(flipped.C.col(1));
    std::swap(flipped.weights[0], flipped.weights[1]);
    flipped.A.col(0) *= -1.0;
    flipped.B.col(0) *= -1.0;
    CHECK(missing_entry_error(inst.tensor, p, flipped) ==
          doctest::Approx(missing_entry_error(inst.tensor, p, est)).epsilon(1e-12));

    CHECK(missing_entry_error(inst.tensor, sample_entries(inst.tensor, 1.0, 1), est) == 0.0);
}

TEST_CASE("sample_entries is reproducible and near p") {
    const auto inst = instance(20, 2, 16);
    const CompletionProblem a = sample_entries(inst.tensor, 0.2, 17);
    const CompletionProblem b = sample_entries(inst.tensor, 0.2, 17);
    CHECK(a.mask() == b.mask());
    const double frac = static_cast<double>(a.observed_count()) / 8000.0;
    CHECK(std::abs(frac - 0.2) < 0.02);
}
