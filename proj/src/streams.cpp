#include "nrlearn/streams.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <queue>
#include <stdexcept>

#include "nrlearn/csvio.hpp"
#include "nrlearn/errors.hpp"

namespace nrlearn {

NodeRates make_rates(Vector mu) {
    if (mu.size() < 1 || mu.minCoeff() <= 0.0)
        throw ConfigError("rates: every mu_i must be positive");
    NodeRates rates;
    rates.mu = std::move(mu);
    rates.total = rates.mu.sum();
    rates.min = rates.mu.minCoeff();
    rates.max = rates.mu.maxCoeff();
    rates.xi = rates.max / rates.min;
    return rates;
}

namespace {

// cumulative node-selection thresholds: P(node = i) = mu_i / mu_total
std::vector<double> selection_cdf(const NodeRates& rates) {
    std::vector<double> cdf(static_cast<std::size_t>(rates.nodes()));
    double acc = 0.0;
    for (int i = 0; i < rates.nodes(); ++i) {
        acc += rates.mu[i] / rates.total;
        cdf[static_cast<std::size_t>(i)] = acc;
    }
    cdf.back() = 1.0;
    return cdf;
}

int draw_node(const std::vector<double>& cdf, Rng& rng) {
    const double u = rng.uniform01();
    return static_cast<int>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
}

} // namespace

EventTrace sample_trace(const NodeRates& rates, std::int64_t num_events, std::uint64_t seed) {
    if (num_events < 1) throw ConfigError("sample_trace: need num_events >= 1");
    Rng rng(seed);
    const auto cdf = selection_cdf(rates);
    EventTrace trace;
    trace.seed = seed;
    trace.events.reserve(static_cast<std::size_t>(num_events));
    double t = 0.0;
    for (std::int64_t k = 1; k <= num_events; ++k) {
        t += rng.exponential(rates.total);
        trace.events.push_back({k, t, draw_node(cdf, rng)});
    }
    return trace;
}

EventTrace sample_trace_until(const NodeRates& rates, double horizon, std::uint64_t seed) {
    if (horizon <= 0.0) throw ConfigError("sample_trace_until: need horizon > 0");
    Rng rng(seed);
    const auto cdf = selection_cdf(rates);
    EventTrace trace;
    trace.seed = seed;
    double t = 0.0;
    for (std::int64_t k = 1;; ++k) {
        t += rng.exponential(rates.total);
        if (t > horizon) break;
        trace.events.push_back({k, t, draw_node(cdf, rng)});
    }
    return trace;
}

EventTrace sample_trace_merged(const NodeRates& rates, std::int64_t num_events,
                               std::uint64_t seed) {
    if (num_events < 1) throw ConfigError("sample_trace_merged: need num_events >= 1");
    Rng rng(seed);
    using Clock = std::pair<double, int>; // (next arrival, node)
    std::priority_queue<Clock, std::vector<Clock>, std::greater<>> next;
    for (int i = 0; i < rates.nodes(); ++i)
        next.emplace(rng.exponential(rates.mu[i]), i);
    EventTrace trace;
    trace.seed = seed;
    trace.events.reserve(static_cast<std::size_t>(num_events));
    for (std::int64_t k = 1; k <= num_events; ++k) {
        const auto [t, node] = next.top();
        next.pop();
        trace.events.push_back({k, t, node});
        next.emplace(t + rng.exponential(rates.mu[node]), node);
    }
    return trace;
}

double realtime_factor(double mu_total, double t) {
    if (mu_total <= 0.0) throw std::domain_error("realtime_factor: mu_total must be positive");
    if (t <= 0.0) throw std::domain_error("realtime_factor: t must be positive");
    const double x = mu_total * t;
    return -std::expm1(-x) / x;
}

void write_trace_csv(const EventTrace& trace, std::ostream& out) {
    out << "k,t,node\n";
    for (const Event& e : trace.events)
        out << e.k << ',' << format_double(e.t) << ',' << e.node << '\n';
}

} // namespace nrlearn
