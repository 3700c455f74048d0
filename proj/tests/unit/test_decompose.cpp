#include <doctest.h>

#include <algorithm>

#include "oracles.hpp"
#include "tenfact/bench.hpp"
#include "tenfact/decompose.hpp"
#include "tenfact/diagnostics.hpp"
#include "tenfact/error.hpp"
#include "tenfact/linalg.hpp"

using namespace tenfact;

namespace {

CpModel diagonal_model(Index d, const std::vector<double>& w) {
    const Index k = static_cast<Index>(w.size());
    CpModel m{Vector::Map(w.data(), k), Matrix::Identity(d, k), Matrix::Identity(d, k), Matrix::Identity(d, k)};
    return m;
}

std::vector<double> sorted_weights(const CpModel& m) {
    std::vector<double> w(m.weights.data(), m.weights.data() + m.rank());
    for (double& x : w) x = std::abs(x);
    std::sort(w.begin(), w.end());
    return w;
}

bench::Instance random_instance(Index d, Index k, double ratio, std::uint64_t seed) {
    bench::SynthSpec s;
    s.d = d;
    s.k = k;
    s.scheme = ratio == 1.0 ? bench::WeightScheme::Uniform : bench::WeightScheme::Geometric;
    s.ratio = ratio;
    s.seed = seed;
    return bench::gen_random_cp(s);
}

DecompConfig config(Index k, OrthMode mode, std::uint64_t seed, int iters = 100) {
    DecompConfig c;
    c.rank = k;
    c.orth_mode = mode;
    c.seed = seed;
    c.max_iters = iters;
    c.record_trace = true;
    return c;
}

}  // namespace

TEST_CASE("als_sweep: true factors are a fixed point") {
    Rng rng(1);
    const CpModel m = oracle::random_model({5, 6, 7}, 3, rng);
    const DenseTensor3 t = cp_reconstruct(m);
    const auto [A, B, C] = als_sweep(t, m.A * m.weights.asDiagonal(), m.B, m.C);
    const CpModel out = CpModel::from_factors(Vector::Ones(3), A, B, C);
    CHECK(residual_ratio(t, out) < 1e-10);
}

TEST_CASE("als_sweep: zero tensor gives zero factors") {
    Rng rng(2);
    const DenseTensor3 z(Dims{4, 4, 4});
    const auto [A, B, C] = als_sweep(z, rng.unit_columns(4, 2), rng.unit_columns(4, 2), rng.unit_columns(4, 2));
    CHECK(A.cwiseAbs().maxCoeff() == 0.0);
    CHECK(B.cwiseAbs().maxCoeff() == 0.0);
    CHECK(C.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("als_sweep never increases the residual") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const DenseTensor3 t = oracle::random_dense({4, 4, 4}, rng);
        const Matrix A = rng.unit_columns(4, 2), B = rng.unit_columns(4, 2), C = rng.unit_columns(4, 2);
        const double before = oracle::frob_diff(t, CpModel::from_factors(Vector::Ones(2), A, B, C));
        const auto [A1, B1, C1] = als_sweep(t, A, B, C);
        const double after = oracle::frob_diff(t, CpModel::from_factors(Vector::Ones(2), A1, B1, C1));
        CHECK(after <= before + 1e-12);
    }
}

TEST_CASE("orth_als_run recovers a diagonal tensor exactly") {
    const CpModel truth = diagonal_model(6, {3.0, 2.0, 1.5});
    const DenseTensor3 t = cp_reconstruct(truth);
    const DecompResult r = orth_als_run(t, config(3, OrthMode::Always, 7));
    CHECK(residual_ratio(t, r.model) < 1e-10);
    const auto w = sorted_weights(r.model);
    CHECK(w[0] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(w[2] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(match_factors(truth, r.model).recovered_count == 3);
}

TEST_CASE("orth_als_run on skewed d=10, k=3") {
    const auto inst = random_instance(10, 3, 100.0, 11);
    const DecompResult r = orth_als_run(inst.tensor, config(3, OrthMode::Always, 12));
    CHECK(match_factors(inst.model, r.model).recovered_count == 3);
}

TEST_CASE("orthogonalization refuses k > d") {
    const auto inst = random_instance(4, 3, 1.0, 1);
    CHECK_THROWS_AS(orth_als_run(inst.tensor, config(5, OrthMode::Always, 1)), InvalidArgument);
    CHECK_THROWS_AS(hybrid_run(inst.tensor, config(5, OrthMode::FirstS, 1)), InvalidArgument);
    CHECK_NOTHROW(als_run(inst.tensor, config(5, OrthMode::None, 1, 3)));
}

TEST_CASE("hybrid_run degenerate switches") {
    const auto inst = random_instance(12, 4, 10.0, 21);
    DecompConfig c = config(4, OrthMode::FirstS, 22, 30);
    c.orth_steps = 0;
    const DecompResult h0 = hybrid_run(inst.tensor, c);
    const DecompResult als = als_run(inst.tensor, c);
    CHECK(h0.residual_trace == als.residual_trace);
    CHECK(h0.model.A == als.model.A);

    c.orth_steps = c.max_iters;
    const DecompResult hn = hybrid_run(inst.tensor, c);
    const DecompResult orth = orth_als_run(inst.tensor, c);
    CHECK(hn.residual_trace == orth.residual_trace);
    CHECK(hn.model.A == orth.model.A);
}

TEST_CASE("als_run started at the truth stays there") {
    const CpModel truth = diagonal_model(5, {2.0, 1.0});
    const DenseTensor3 t = cp_reconstruct(truth);
    DecompConfig c = config(2, OrthMode::None, 1, 10);
    c.init = InitKind::Given;
    c.initial = truth;
    const DecompResult r = als_run(t, c);
    for (double v : r.residual_trace) CHECK(v < 1e-10);
}

TEST_CASE("als_run residual trace is non-increasing") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const auto inst = random_instance(15, 6, 50.0, 100 + seed);
        const DecompResult r = als_run(inst.tensor, config(6, OrthMode::None, seed, 60));
        for (std::size_t t = 1; t < r.residual_trace.size(); ++t) {
            CHECK(r.residual_trace[t] <= r.residual_trace[t - 1] + 1e-12);
        }
    }
}

TEST_CASE("DecompConfig validation") {
    DecompConfig c;
    c.rank = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c.rank = 2;
    c.tol = 0.0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c.tol = 1e-6;
    c.init = InitKind::Given;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c.initial = CpModel::zeros({3, 3, 3}, 1);
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c.initial = CpModel::zeros({3, 3, 3}, 2);
    CHECK_NOTHROW(c.validate());
    c.rerandomize_period = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("tpm_run: diagonal fixed point") {
    const DenseTensor3 t = cp_reconstruct(diagonal_model(4, {3.0, 1.0}));
    const Vector e1 = Vector::Unit(4, 0);
    const TpmResult r = tpm_run(t, e1, e1, e1, 5);
    CHECK(r.weight == doctest::Approx(3.0).epsilon(1e-14));
    CHECK((r.x - e1).norm() <= 1e-14);
}

TEST_CASE("tpm_run: square law on weights (2, 1)") {
    const DenseTensor3 t = cp_reconstruct(diagonal_model(3, {2.0, 1.0}));
    Vector x0(3);
    x0 << 1.0, 0.5, 0.3;
    x0.normalize();
    std::vector<Vector> it;
    tpm_run(t, x0, x0, x0, 2, &it);
    REQUIRE(it.size() == 3);
    auto ratio = [](const Vector& x) { return x[1] / x[0]; };
    CHECK(ratio(it[0]) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(std::abs(ratio(it[1]) - 0.125) <= 1e-14);
    CHECK(std::abs(ratio(it[2]) - 0.0078125) <= 1e-14);
}

TEST_CASE("tpm_run: zero update is a numerical failure") {
    const DenseTensor3 t = cp_reconstruct(diagonal_model(3, {1.0}));
    const Vector e2 = Vector::Unit(3, 1);
    CHECK_THROWS_AS(tpm_run(t, e2, e2, e2, 3), NumericalFailure);
}

TEST_CASE("tpm_run on a random d=50, k=5 tensor lands near a true factor") {
    const auto inst = random_instance(50, 5, 1.0, 31);
    Rng rng(32);
    const TpmResult r = tpm_run(inst.tensor, rng.unit_vector(50), rng.unit_vector(50), rng.unit_vector(50), 50);
    double best = 2.0;
    for (Index i = 0; i < 5; ++i) {
        best = std::min({best, (inst.model.A.col(i) - r.x).norm(), (inst.model.A.col(i) + r.x).norm()});
    }
    CHECK(best < 0.2);
}

TEST_CASE("weight estimate tracks factor error on an orthogonal tensor") {
    const std::vector<double> w{2.0, 1.6, 1.2};
    const DenseTensor3 t = cp_reconstruct(diagonal_model(6, w));
    Rng rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        Vector x0 = Vector::Unit(6, 0) + 0.3 * rng.unit_vector(6);
        x0.normalize();
        for (int n = 1; n <= 4; ++n) {
            const TpmResult r = tpm_run(t, x0, x0, x0, n);
            const Vector e1 = Vector::Unit(6, 0);
            const double eps = std::max({(r.x - e1).norm(), (r.y - e1).norm(), (r.z - e1).norm()});
            CHECK(std::abs(1.0 - r.weight / w[0]) <= 4.0 * eps + 1e-15);
        }
    }
}

TEST_CASE("tpm_multi on a diagonal tensor") {
    const DenseTensor3 t = cp_reconstruct(diagonal_model(5, {3.0, 2.0, 1.0}));
    const TpmMultiResult r = tpm_multi(t, 100, 30, 3, 5);
    CHECK(r.clusters == 3);
    CHECK_FALSE(r.incomplete);
    const auto w = sorted_weights(r.model);
    CHECK(std::abs(w[0] - 1.0) <= 1e-8);
    CHECK(std::abs(w[1] - 2.0) <= 1e-8);
    CHECK(std::abs(w[2] - 3.0) <= 1e-8);
}

TEST_CASE("tpm_multi reports too few clusters") {
    const DenseTensor3 t = cp_reconstruct(diagonal_model(5, {3.0}));
    const TpmMultiResult r = tpm_multi(t, 10, 20, 2, 5);
    CHECK(r.incomplete);
    CHECK(r.clusters == 1);
}

TEST_CASE("orth_tpm_run") {
    SUBCASE("diagonal k=3") {
        const CpModel truth = diagonal_model(5, {3.0, 2.0, 1.0});
        const CpModel m = orth_tpm_run(cp_reconstruct(truth), 3, 30, 3);
        CHECK(match_factors(truth, m).recovered_count == 3);
    }
    SUBCASE("k=1 matches a single power run") {
        const auto inst = random_instance(8, 2, 1.0, 4);
        const CpModel m = orth_tpm_run(inst.tensor, 1, 20, 99);
        Rng rng(99);
        const Vector x = rng.unit_vector(8), y = rng.unit_vector(8), z = rng.unit_vector(8);
        const TpmResult r = tpm_run(inst.tensor, x, y, z, 20);
        CpModel single{Vector::Constant(1, r.weight), r.x, r.y, r.z};
        single.canonicalize();
        CHECK(m.weights == single.weights);
        CHECK(m.A == single.A);
    }
    SUBCASE("random d=50, k=10") {
        const auto inst = random_instance(50, 10, 1.0, 5);
        const CpModel m = orth_tpm_run(inst.tensor, 10, 50, 6);
        CHECK(match_factors(inst.model, m).recovered_count == 10);
    }
}

TEST_CASE("svd_init") {
    SUBCASE("diagonal tensor gives coordinate axes") {
        const CpModel truth = diagonal_model(5, {3.0, 2.0, 1.0});
        const auto [A, B, C] = svd_init(cp_reconstruct(truth), 3, 8);
        for (const Matrix* F : {&A, &B}) {
            for (Index r = 0; r < 3; ++r) {
                Index arg;
                const double peak = F->col(r).cwiseAbs().maxCoeff(&arg);
                CHECK(peak == doctest::Approx(1.0).epsilon(1e-10));
                CHECK(arg < 3);
            }
        }
        (void)C;
    }
    SUBCASE("rank one") {
        Rng rng(9);
        const CpModel truth = oracle::random_model({6, 6, 6}, 1, rng);
        const auto [A, B, C] = svd_init(cp_reconstruct(truth), 1, 10);
        CHECK(oracle::column_error(A, truth.A) <= 1e-10);
    }
    SUBCASE("feeds a converging ALS run") {
        const auto inst = random_instance(20, 4, 1.0, 12);
        DecompConfig c = config(4, OrthMode::None, 13, 200);
        c.init = InitKind::Svd;
        c.tol = 1e-12;
        const DecompResult r = als_run(inst.tensor, c);
        CHECK(residual_ratio(inst.tensor, r.model) < 1e-4);
    }
}

TEST_CASE("simdiag") {
    SUBCASE("noiseless d=10, k=5") {
        const auto inst = random_instance(10, 5, 1.0, 14);
        const CpModel m = simdiag(inst.tensor, 5, 15);
        const MatchResult mr = match_factors(inst.model, m);
        REQUIRE(mr.recovered_count == 5);
        double worst = 0.0;
        for (Index j = 0; j < 5; ++j) {
            const Index i = *mr.assignment[static_cast<std::size_t>(j)];
            for (int mode = 1; mode <= 3; ++mode) {
                const Vector a = inst.model.factor(mode).col(i), b = m.factor(mode).col(j);
                worst = std::max(worst, std::min((a - b).norm(), (a + b).norm()));
            }
        }
        CHECK(worst < 1e-6);
    }
    SUBCASE("rank one") {
        Rng rng(16);
        const CpModel truth = oracle::random_model({5, 5, 5}, 1, rng);
        const CpModel m = simdiag(cp_reconstruct(truth), 1, 17);
        CHECK(residual_ratio(cp_reconstruct(truth), m) < 1e-10);
    }
}

TEST_CASE("permuting true factors leaves recovery unchanged") {
    const auto inst = random_instance(15, 4, 10.0, 50);
    CpModel perm = inst.model;
    const std::array<Index, 4> p{2, 0, 3, 1};
    for (Index r = 0; r < 4; ++r) {
        perm.weights[r] = inst.model.weights[p[r]];
        perm.A.col(r) = inst.model.A.col(p[r]);
        perm.B.col(r) = inst.model.B.col(p[r]);
        perm.C.col(r) = inst.model.C.col(p[r]);
    }
    const DenseTensor3 t2 = cp_reconstruct(perm);
    const DecompResult a = orth_als_run(inst.tensor, config(4, OrthMode::Always, 51));
    const DecompResult b = orth_als_run(t2, config(4, OrthMode::Always, 51));
    CHECK(match_factors(inst.model, a.model).recovered_count == match_factors(perm, b.model).recovered_count);
}

TEST_CASE("algorithm registry round trip") {
    for (Algorithm a : all_algorithms()) CHECK(parse_algorithm(to_string(a)) == a);
    CHECK(all_algorithms().size() == 8);
    CHECK_THROWS_AS(parse_algorithm("nope"), InvalidArgument);
    const auto inst = random_instance(6, 2, 1.0, 60);
    AlgorithmOptions o;
    o.cfg.rank = 2;
    o.cfg.max_iters = 7;
    o.tpm_inits = 5;
    CHECK(run_algorithm(inst.tensor, Algorithm::Tpm, o).iterations_used == 7);
    CHECK(run_algorithm(inst.tensor, Algorithm::SimDiag, o).iterations_used == 1);
}
