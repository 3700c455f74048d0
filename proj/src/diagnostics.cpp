#include "tenfact/diagnostics.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "tenfact/error.hpp"

namespace tenfact {

std::vector<double> beta_bound(double beta0, double gamma, Index k, double c_max, int steps) {
    if (!(beta0 >= 0.0 && beta0 < 1.0)) throw InvalidArgument("beta_bound: beta0 must lie in [0, 1)");
    if (!(gamma >= 1.0)) throw InvalidArgument("beta_bound: gamma must be at least 1");
    if (!(c_max >= 0.0)) throw InvalidArgument("beta_bound: c_max must be non-negative");
    if (steps < 0) throw InvalidArgument("beta_bound: steps must be non-negative");

    std::vector<double> beta(static_cast<std::size_t>(steps) + 1);
    beta[0] = beta0;
    const double kk = static_cast<double>(k);
    for (int t = 0; t < steps; ++t) {
        const double b = beta[static_cast<std::size_t>(t)];
        beta[static_cast<std::size_t>(t) + 1] = gamma * c_max + b * b + 3.0 * gamma * kk * c_max * b * b;
    }
    return beta;
}

TraceRecord correlation_trace(const CpModel& truth, const std::vector<Vector>& iterates,
                              std::optional<Index> reference) {
    const Index k = truth.rank();
    if (k == 0) throw InvalidArgument("correlation_trace: empty model");
    if (iterates.empty()) throw InvalidArgument("correlation_trace: no iterates");
    for (const auto& x : iterates) {
        if (x.size() != truth.A.rows()) throw InvalidArgument("correlation_trace: iterate length mismatch");
    }

    TraceRecord rec;
    if (reference) {
        if (*reference < 0 || *reference >= k) throw InvalidArgument("correlation_trace: reference out of range");
        rec.reference = *reference;
    } else {
        const Vector c0 = truth.A.transpose() * iterates.front();
        (truth.weights.array() * c0.array()).abs().maxCoeff(&rec.reference);
    }
    const Index ref = rec.reference;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    for (const auto& x : iterates) {
        const Vector c = truth.A.transpose() * x;
        const bool ok = std::abs(c[ref]) >= 1e-12;
        rec.defined.push_back(ok);
        if (!ok) {
            rec.ratios.push_back(Vector::Constant(k, nan));
            rec.max_weighted.push_back(nan);
            continue;
        }
        Vector ratio = c / c[ref];
        double worst = 0.0;
        for (Index i = 0; i < k; ++i) {
            if (i != ref) worst = std::max(worst, std::abs(truth.weights[i] / truth.weights[ref] * ratio[i]));
        }
        rec.ratios.push_back(std::move(ratio));
        rec.max_weighted.push_back(worst);
    }
    return rec;
}

std::optional<int> first_step_below(const TraceRecord& rec, double threshold) {
    for (std::size_t t = 0; t < rec.max_weighted.size(); ++t) {
        if (rec.defined[t] && rec.max_weighted[t] <= threshold) return static_cast<int>(t);
    }
    return std::nullopt;
}

}  // namespace tenfact
