#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace tenfact {

/// Mixes (master, index) into an independent stream seed (splitmix64 finalizer).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seeded generator used by every randomized routine. One instance per run;
/// never shared across threads.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }
    std::uint64_t next() { return engine_(); }

    Eigen::VectorXd gaussian(Eigen::Index n) {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

    /// Uniform draw from the unit sphere in R^n.
    Eigen::VectorXd unit_vector(Eigen::Index n) {
        for (;;) {
            Eigen::VectorXd v = gaussian(n);
            const double nrm = v.norm();
            if (nrm > 0.0) return v / nrm;
        }
    }

    /// n x k matrix whose columns are independent unit-sphere draws.
    Eigen::MatrixXd unit_columns(Eigen::Index n, Eigen::Index k) {
        Eigen::MatrixXd m(n, k);
        for (Eigen::Index j = 0; j < k; ++j) m.col(j) = unit_vector(n);
        return m;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace tenfact
