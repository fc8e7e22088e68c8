#pragma once

#include <cstdint>
#include <vector>

namespace nrlearn {

// One recorded tick. Row k describes the state the tick-k update acts on
// (i.e. the state after k-1 updates), together with that tick's event, so the
// running averages over rows 1..K match the theory's averages over k = 0..K-1.
struct MetricsRow {
    std::int64_t k = 0;
    double t = 0.0;
    int node = 0;
    double vbar = 0.0;         // mean squared deviation from the ensemble average
    double grad_norm_sq = 0.0; // ||grad loss(ensemble average)||^2
    double loss = 0.0;         // loss(ensemble average)
    double run_avg_grad_norm_sq = 0.0; // exact average over ticks 1..k
    double run_avg_vbar = 0.0;
};

struct MetricsTrace {
    std::vector<MetricsRow> rows; // thinned: every thin-th tick plus the last
    std::int64_t total_ticks = 0;
    double final_run_avg_grad_norm_sq = 0.0; // exact regardless of thinning
    double final_run_avg_vbar = 0.0;

    std::vector<double> column(double MetricsRow::* field) const {
        std::vector<double> values;
        values.reserve(rows.size());
        for (const auto& row : rows) values.push_back(row.*field);
        return values;
    }
};

} // namespace nrlearn
