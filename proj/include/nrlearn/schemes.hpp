#pragma once

#include <cstdint>
#include <functional>

#include "nrlearn/graph.hpp"
#include "nrlearn/metrics.hpp"
#include "nrlearn/problems.hpp"
#include "nrlearn/streams.hpp"
#include "nrlearn/types.hpp"

namespace nrlearn {

struct HyperParams {
    double gamma = 0.0; // learning rate, > 0
    double a = 0.0;     // network regularization strength, >= 0
};

// Network-regularized state: one parameter column per node.
struct NRState {
    Matrix thetas; // p x N
    std::int64_t k = 0;

    int nodes() const { return static_cast<int>(thetas.cols()); }
    int dim() const { return static_cast<int>(thetas.rows()); }
    Vector ensemble_average() const { return thetas.rowwise().mean(); }
};

// Federated state: a single shared parameter vector.
struct FLState {
    Vector theta;
    std::int64_t k = 0;
};

// F(thetas) = 1/4 sum_i sum_{j != i} a_ij ||theta_i - theta_j||^2
double consensus_potential(const Matrix& thetas, const Graph& g);

// grad_{theta_i} F = sum_j a_ij (theta_i - theta_j)
Vector consensus_grad(const Matrix& thetas, const Graph& g, int node);

// mean squared deviation of the columns from their average
double vbar(const Matrix& thetas);

// Active node takes theta_i -= gamma * (noisy_gradient + a * consensus_grad(i));
// all other nodes keep their parameters bit-identical. Throws DivergenceError
// if the update produces a non-finite coordinate.
NRState nr_step(const NRState& state, const Graph& g, const HyperParams& hp,
                int active_node, const Vector& noisy_gradient);

// Same update written as a one-row mixing matrix W applied to the active node:
// W_ii = 1 - gamma*a*deg(i), W_ij = gamma*a*a_ij. Algebraically identical to
// nr_step; kept separate so the identity can be tested.
NRState nr_step_w_form(const NRState& state, const Graph& g, const HyperParams& hp,
                       int active_node, const Vector& noisy_gradient);

FLState fl_step(const FLState& state, const HyperParams& hp, int active_node,
                const Vector& noisy_gradient);

// Observation point handed to per-tick hooks: the state before the update,
// the applied gradient pieces, and the state after.
struct TickInfo {
    const Event& event;
    const Matrix& pre_thetas;  // p x N (FL: p x 1)
    const Matrix& post_thetas;
    const Vector& true_grad;   // exact gradient at the active node's pre-update point
    const Vector& noise;       // realized noisy_gradient - true_grad
};

using TickHook = std::function<void(const TickInfo&)>;

struct RunOptions {
    int thin = 1;          // record every thin-th tick (the last is always recorded)
    TickHook hook;         // optional; receives every tick
};

struct NRRun {
    NRState state;
    MetricsTrace metrics;
    bool diverged = false;
    std::int64_t diverged_at = -1;
};

struct FLRun {
    FLState state;
    MetricsTrace metrics;
    bool diverged = false;
    std::int64_t diverged_at = -1;
};

// Iterate the per-tick update over the trace, recording metrics of the state
// each tick acts on. Deterministic given (inputs, noise_seed). Divergence is
// recorded, not thrown.
NRRun run_nr(const LossModel& model, const NoiseSpec& noise, const Graph& g,
             const HyperParams& hp, const Matrix& init, const EventTrace& trace,
             std::uint64_t noise_seed, const RunOptions& options = {});

FLRun run_fl(const LossModel& model, const NoiseSpec& noise, const HyperParams& hp,
             const Vector& init, const EventTrace& trace, std::uint64_t noise_seed,
             const RunOptions& options = {});

} // namespace nrlearn
