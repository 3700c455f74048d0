#pragma once

#include <optional>
#include <vector>

#include "tenfact/tensor.hpp"

namespace tenfact {

/// Deterministic envelope beta_{t+1} = gamma c + beta_t^2 + 3 gamma k c beta_t^2,
/// returned for t = 0 .. steps (length steps + 1).
std::vector<double> beta_bound(double beta0, double gamma, Index k, double c_max, int steps);

/// Correlation ratios of power-method iterates against a known model.
struct TraceRecord {
    /// Factor the ratios are taken against: argmax_i |w_i <A_i, x_0>| unless given.
    Index reference = 0;
    /// ratios[t][i] = <A_i, x_t> / <A_ref, x_t>.
    std::vector<Vector> ratios;
    /// false where |<A_ref, x_t>| < 1e-12; the row is then NaN.
    std::vector<bool> defined;
    /// max over i != ref of |(w_i / w_ref) ratios[t][i]|; NaN when undefined.
    std::vector<double> max_weighted;
};

/// Uses truth.A and truth.weights only.
TraceRecord correlation_trace(const CpModel& truth, const std::vector<Vector>& iterates,
                              std::optional<Index> reference = std::nullopt);

/// First t with max_weighted[t] <= threshold, if any.
std::optional<int> first_step_below(const TraceRecord& rec, double threshold);

}  // namespace tenfact
