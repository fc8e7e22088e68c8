#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "nrlearn/rng.hpp"
#include "nrlearn/types.hpp"

namespace nrlearn {

// Per-node Poisson arrival rates and the quantities derived from them.
struct NodeRates {
    Vector mu;
    double total = 0.0;
    double min = 0.0;
    double max = 0.0;
    double xi = 1.0; // mu_max / mu_min

    int nodes() const { return static_cast<int>(mu.size()); }
};

NodeRates make_rates(Vector mu);

struct Event {
    std::int64_t k;  // tick index, starts at 1
    double t;        // arrival time, strictly increasing
    int node;
};

struct EventTrace {
    std::vector<Event> events;
    std::uint64_t seed = 0;

    std::int64_t ticks() const { return static_cast<std::int64_t>(events.size()); }
};

// Superposition form: one exponential clock at the total rate; each arrival is
// assigned to node i with probability mu_i / mu_total.
EventTrace sample_trace(const NodeRates& rates, std::int64_t num_events, std::uint64_t seed);

// Same distribution via N independent exponential clocks merged by a priority
// queue. Kept as a distributional cross-check for sample_trace.
EventTrace sample_trace_merged(const NodeRates& rates, std::int64_t num_events,
                               std::uint64_t seed);

// Superposition form driven by a real-time horizon: all arrivals with t <= horizon.
EventTrace sample_trace_until(const NodeRates& rates, double horizon, std::uint64_t seed);

// (1 - exp(-mu t)) / (mu t): expected 1/D(t) under the aggregate process;
// converts per-tick averages into real-time averages.
double realtime_factor(double mu_total, double t);

// columns: k,t,node
void write_trace_csv(const EventTrace& trace, std::ostream& out);

} // namespace nrlearn
