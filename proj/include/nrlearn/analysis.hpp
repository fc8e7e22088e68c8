#pragma once

#include <cstdint>
#include <vector>

#include "nrlearn/graph.hpp"
#include "nrlearn/metrics.hpp"
#include "nrlearn/problems.hpp"
#include "nrlearn/schemes.hpp"
#include "nrlearn/streams.hpp"
#include "nrlearn/types.hpp"

namespace nrlearn {

// Everything the convergence bounds depend on, collected in one place.
struct BoundParams {
    double L = 0.0;        // gradient Lipschitz constant
    double lambda2 = 0.0;  // algebraic connectivity
    double d_bar = 0.0;    // max degree
    double N = 0.0;        // node count
    double xi = 1.0;       // mu_max / mu_min
    double sigma_sq = 0.0; // sum of sigma_i^2
    double mu_min = 0.0;
    double mu_max = 0.0;
    double mu_total = 0.0;
    double gamma = 0.0;
    double a = 0.0;
};

BoundParams derive_bound_params(const LossModel& model, const NoiseSpec& noise,
                                const SpectralSummary& spectrum, const NodeRates& rates,
                                const HyperParams& hp);

// The statement's contraction constant vs. the variant appearing mid-proof
// (mu_min and mu_max swapped in the linear term). The statement form is the
// default everywhere; the other is computed for comparison only.
enum class KappaVariant { Statement, ProofStep };

// kappa = 2(L mu_min - a lambda2 mu_max) + (4 gamma xi / N)(L^2 + 2 a^2 d_bar^2)
double kappa(const BoundParams& bp, KappaVariant variant = KappaVariant::Statement);

struct StepSizeLimits {
    double gamma_bar1 = 0.0; // N(2 a lambda2 mu_max - L(2 mu_min + xi/2)) / (6 xi (L^2 + 2 a^2 d_bar^2))
    double gamma_bar2 = 0.0; // 1 / (4 L (2N + 1))
    double a_threshold = 0.0; // (4 mu_min L + xi L) / (4 lambda2 mu_max)
};

StepSizeLimits step_size_limits(const BoundParams& bp);

// eta = (gamma xi / N)(1/2 - 2 gamma L (2 + 1/N))
double eta(const BoundParams& bp);
// the gamma at which the eta expression crosses zero: N / (4 L (2N + 1)).
// Differs from gamma_bar2 by a factor N; the stricter gamma_bar2 gates verdicts.
double eta_zero_gamma(const BoundParams& bp);
// eta_tilde = gamma (1 - L gamma / 2)
double eta_tilde(const BoundParams& bp);

// E[(1/K) sum ||grad loss(ensemble avg)||^2] upper bounds; require eta > 0.
double theorem1_bound(const BoundParams& bp, double loss0, double vbar0, std::int64_t ticks);
double theorem1_asymptote(const BoundParams& bp);
double theorem1_bound_realtime(const BoundParams& bp, double loss0, double vbar0, double t);

// E[(1/K) sum vbar_k] upper bounds; require kappa < 0 and eta > 0.
double corollary1_bound(const BoundParams& bp, double loss0, double vbar0, std::int64_t ticks);
double corollary1_asymptote(const BoundParams& bp);
double corollary1_bound_realtime(const BoundParams& bp, double loss0, double vbar0, double t);

// Federated counterpart; requires gamma in (0, 2/L).
double prop1_bound(const BoundParams& bp, const NodeRates& rates, const Vector& sigmas,
                   double loss0, std::int64_t ticks);
double prop1_asymptote(const BoundParams& bp, const NodeRates& rates, const Vector& sigmas);
double prop1_bound_realtime(const BoundParams& bp, const NodeRates& rates,
                            const Vector& sigmas, double loss0, double t);

// Derived constants plus bound values at a given horizon, with applicability
// flags instead of exceptions so invalid settings can be reported.
struct BoundReport {
    BoundParams params;
    double kappa_statement = 0.0;
    double kappa_proof_variant = 0.0;
    StepSizeLimits limits;
    double eta = 0.0;
    double eta_tilde = 0.0;
    double eta_zero_gamma = 0.0;
    bool theorem1_applicable = false;
    bool corollary1_applicable = false;
    bool prop1_applicable = false;
    double theorem1_value = 0.0; // NaN when inapplicable
    double corollary1_value = 0.0;
    double prop1_value = 0.0;
    double nr_asymptote = 0.0;
    double vbar_asymptote = 0.0;
    double fl_asymptote = 0.0;
    double loss0 = 0.0;
    double vbar0 = 0.0;
    std::int64_t ticks = 0;
};

BoundReport make_bound_report(const BoundParams& bp, const NodeRates& rates,
                              const Vector& sigmas, double loss0, double vbar0,
                              std::int64_t ticks);

// Independent (storage-based) metric computation: states[j] is the state tick
// events[j] acts on. Oracle for the online recorder in the runners.
MetricsTrace trajectory_metrics(const std::vector<Matrix>& states,
                                const std::vector<Event>& events, const LossModel& model);

// |vbar(post) - decomposition(pre, applied update)| for one recorded step.
// The decomposition recombines the exact per-node displacement terms
// (gradient, consensus, noise, and their ensemble means), so the residual is
// floating-point noise when the step really followed the update rule.
double lemma1_residual(const Matrix& pre_thetas, const Matrix& post_thetas,
                       const Graph& g, const HyperParams& hp, int active_node,
                       const Vector& true_grad, const Vector& noise);

// mean of the last `fraction` of the series; the empirical asymptote
double plateau(const std::vector<double>& series, double fraction = 0.2);

} // namespace nrlearn
