#include "nrlearn/schemes.hpp"

#include <cmath>

#include "nrlearn/errors.hpp"

namespace nrlearn {

namespace {

void check_state(const Matrix& thetas, const Graph& g, int active_node) {
    if (thetas.cols() != g.n)
        throw ConfigError("scheme state has " + std::to_string(thetas.cols()) +
                          " nodes but graph has " + std::to_string(g.n));
    if (active_node < 0 || active_node >= g.n)
        throw ConfigError("active node out of range");
}

void apply_nr_update(Matrix& thetas, const Graph& g, const HyperParams& hp, int i,
                     const Vector& noisy_gradient) {
    thetas.col(i) -= hp.gamma * (noisy_gradient + hp.a * consensus_grad(thetas, g, i));
}

} // namespace

double consensus_potential(const Matrix& thetas, const Graph& g) {
    if (thetas.cols() != g.n) throw ConfigError("consensus_potential: node count mismatch");
    double total = 0.0;
    for (int i = 0; i < g.n; ++i)
        for (int j = i + 1; j < g.n; ++j)
            if (g.adj(i, j) != 0.0)
                total += (thetas.col(i) - thetas.col(j)).squaredNorm();
    return 0.5 * total; // 1/4 over ordered pairs = 1/2 over unordered edges
}

Vector consensus_grad(const Matrix& thetas, const Graph& g, int node) {
    if (thetas.cols() != g.n) throw ConfigError("consensus_grad: node count mismatch");
    if (node < 0 || node >= g.n) throw ConfigError("consensus_grad: node out of range");
    const double deg = g.adj.col(node).sum();
    return deg * thetas.col(node) - thetas * g.adj.col(node);
}

double vbar(const Matrix& thetas) {
    const Vector mean = thetas.rowwise().mean();
    return (thetas.colwise() - mean).squaredNorm() / static_cast<double>(thetas.cols());
}

NRState nr_step(const NRState& state, const Graph& g, const HyperParams& hp,
                int active_node, const Vector& noisy_gradient) {
    check_state(state.thetas, g, active_node);
    NRState next = state;
    apply_nr_update(next.thetas, g, hp, active_node, noisy_gradient);
    next.k = state.k + 1;
    if (!next.thetas.col(active_node).allFinite())
        throw DivergenceError("nr_step produced a non-finite parameter", next.k);
    return next;
}

NRState nr_step_w_form(const NRState& state, const Graph& g, const HyperParams& hp,
                       int active_node, const Vector& noisy_gradient) {
    check_state(state.thetas, g, active_node);
    NRState next = state;
    const double deg = g.adj.col(active_node).sum();
    const double w_self = 1.0 - hp.gamma * hp.a * deg;
    next.thetas.col(active_node) = w_self * state.thetas.col(active_node) +
                                   hp.gamma * hp.a * (state.thetas * g.adj.col(active_node)) -
                                   hp.gamma * noisy_gradient;
    next.k = state.k + 1;
    if (!next.thetas.col(active_node).allFinite())
        throw DivergenceError("nr_step_w_form produced a non-finite parameter", next.k);
    return next;
}

FLState fl_step(const FLState& state, const HyperParams& hp, int active_node,
                const Vector& noisy_gradient) {
    if (active_node < 0) throw ConfigError("fl_step: active node out of range");
    FLState next;
    next.theta = state.theta - hp.gamma * noisy_gradient;
    next.k = state.k + 1;
    if (!next.theta.allFinite())
        throw DivergenceError("fl_step produced a non-finite parameter", next.k);
    return next;
}

namespace {

// shared metric bookkeeping for both runners
struct Recorder {
    MetricsTrace trace;
    double sum_gns = 0.0;
    double sum_vbar = 0.0;

    void observe(const Event& e, double vbar_k, double gns, double loss, int thin,
                 std::int64_t last_tick) {
        sum_gns += gns;
        sum_vbar += vbar_k;
        trace.total_ticks = e.k;
        trace.final_run_avg_grad_norm_sq = sum_gns / static_cast<double>(e.k);
        trace.final_run_avg_vbar = sum_vbar / static_cast<double>(e.k);
        if (e.k % thin == 0 || e.k == last_tick)
            trace.rows.push_back({e.k, e.t, e.node, vbar_k, gns, loss,
                                  trace.final_run_avg_grad_norm_sq,
                                  trace.final_run_avg_vbar});
    }
};

} // namespace

NRRun run_nr(const LossModel& model, const NoiseSpec& noise, const Graph& g,
             const HyperParams& hp, const Matrix& init, const EventTrace& trace,
             std::uint64_t noise_seed, const RunOptions& options) {
    if (init.rows() != model.dim || init.cols() != g.n)
        throw ConfigError("run_nr: init must be dim x nodes");
    if (noise.nodes() != g.n) throw ConfigError("run_nr: noise spec node count mismatch");
    if (options.thin < 1) throw ConfigError("run_nr: thin must be >= 1");

    Rng rng(noise_seed);
    NRRun run;
    run.state.thetas = init;
    run.state.k = 0;
    Recorder rec;
    const std::int64_t last_tick = trace.ticks();
    Matrix pre; // only materialized for hooks

    for (const Event& e : trace.events) {
        const Vector mean = run.state.thetas.rowwise().mean();
        const Vector mean_grad = grad_eval(model, mean);
        rec.observe(e, vbar(run.state.thetas), mean_grad.squaredNorm(),
                    loss_eval(model, mean), options.thin, last_tick);

        const Vector truth = grad_eval(model, run.state.thetas.col(e.node));
        const Vector noisy = noisy_grad(model, noise, e.node, run.state.thetas.col(e.node), rng);
        if (options.hook) pre = run.state.thetas;
        try {
            apply_nr_update(run.state.thetas, g, hp, e.node, noisy);
            run.state.k = e.k;
            if (!run.state.thetas.col(e.node).allFinite())
                throw DivergenceError("run_nr produced a non-finite parameter", e.k);
        } catch (const DivergenceError& err) {
            run.diverged = true;
            run.diverged_at = err.tick();
            break;
        }
        if (options.hook) {
            const Vector eps = noisy - truth;
            options.hook(TickInfo{e, pre, run.state.thetas, truth, eps});
        }
    }
    run.metrics = std::move(rec.trace);
    return run;
}

FLRun run_fl(const LossModel& model, const NoiseSpec& noise, const HyperParams& hp,
             const Vector& init, const EventTrace& trace, std::uint64_t noise_seed,
             const RunOptions& options) {
    if (init.size() != model.dim) throw ConfigError("run_fl: init dimension mismatch");
    if (options.thin < 1) throw ConfigError("run_fl: thin must be >= 1");

    Rng rng(noise_seed);
    FLRun run;
    run.state.theta = init;
    run.state.k = 0;
    Recorder rec;
    const std::int64_t last_tick = trace.ticks();
    Matrix pre(model.dim, 1);

    for (const Event& e : trace.events) {
        const Vector truth = grad_eval(model, run.state.theta);
        rec.observe(e, 0.0, truth.squaredNorm(), loss_eval(model, run.state.theta),
                    options.thin, last_tick);

        const Vector noisy = noisy_grad(model, noise, e.node, run.state.theta, rng);
        if (options.hook) pre.col(0) = run.state.theta;
        try {
            run.state = fl_step(run.state, hp, e.node, noisy);
            run.state.k = e.k;
        } catch (const DivergenceError& err) {
            run.diverged = true;
            run.diverged_at = err.tick();
            break;
        }
        if (options.hook) {
            const Vector eps = noisy - truth;
            const Matrix post = run.state.theta;
            options.hook(TickInfo{e, pre, post, truth, eps});
        }
    }
    run.metrics = std::move(rec.trace);
    return run;
}

} // namespace nrlearn
