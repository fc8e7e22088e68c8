#include "nrlearn/analysis.hpp"

#include <cmath>
#include <limits>

#include "nrlearn/errors.hpp"

namespace nrlearn {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

BoundParams derive_bound_params(const LossModel& model, const NoiseSpec& noise,
                                const SpectralSummary& spectrum, const NodeRates& rates,
                                const HyperParams& hp) {
    if (noise.nodes() != rates.nodes())
        throw ConfigError("bound params: noise and rates disagree on node count");
    BoundParams bp;
    bp.L = model.lipschitz;
    bp.lambda2 = spectrum.lambda2;
    bp.d_bar = static_cast<double>(spectrum.max_degree);
    bp.N = static_cast<double>(rates.nodes());
    bp.xi = rates.xi;
    bp.sigma_sq = noise.sigma_sq_total();
    bp.mu_min = rates.min;
    bp.mu_max = rates.max;
    bp.mu_total = rates.total;
    bp.gamma = hp.gamma;
    bp.a = hp.a;
    return bp;
}

double kappa(const BoundParams& bp, KappaVariant variant) {
    const double linear = variant == KappaVariant::Statement
                              ? bp.L * bp.mu_min - bp.a * bp.lambda2 * bp.mu_max
                              : bp.L * bp.mu_max - bp.a * bp.lambda2 * bp.mu_min;
    return 2.0 * linear +
           (4.0 * bp.gamma * bp.xi / bp.N) * (bp.L * bp.L + 2.0 * bp.a * bp.a * bp.d_bar * bp.d_bar);
}

StepSizeLimits step_size_limits(const BoundParams& bp) {
    StepSizeLimits limits;
    limits.gamma_bar1 = bp.N *
                        (2.0 * bp.a * bp.lambda2 * bp.mu_max - bp.L * (2.0 * bp.mu_min + bp.xi / 2.0)) /
                        (6.0 * bp.xi * (bp.L * bp.L + 2.0 * bp.a * bp.a * bp.d_bar * bp.d_bar));
    limits.gamma_bar2 = 1.0 / (4.0 * bp.L * (2.0 * bp.N + 1.0));
    limits.a_threshold = (4.0 * bp.mu_min * bp.L + bp.xi * bp.L) / (4.0 * bp.lambda2 * bp.mu_max);
    return limits;
}

double eta(const BoundParams& bp) {
    return (bp.gamma * bp.xi / bp.N) * (0.5 - 2.0 * bp.gamma * bp.L * (2.0 + 1.0 / bp.N));
}

double eta_zero_gamma(const BoundParams& bp) {
    return bp.N / (4.0 * bp.L * (2.0 * bp.N + 1.0));
}

double eta_tilde(const BoundParams& bp) {
    return bp.gamma * (1.0 - bp.L * bp.gamma / 2.0);
}

namespace {

double noise_term_per_tick(const BoundParams& bp) {
    // L gamma^2 xi sigma^2 / N^2 * (1 + 1/(2N))
    return bp.L * bp.gamma * bp.gamma * bp.xi * bp.sigma_sq / (bp.N * bp.N) *
           (1.0 + 1.0 / (2.0 * bp.N));
}

} // namespace

double theorem1_bound(const BoundParams& bp, double loss0, double vbar0, std::int64_t ticks) {
    const double eta_value = eta(bp);
    if (!(eta_value > 0.0)) throw ConfigError("theorem1_bound: eta must be positive");
    if (ticks < 1) throw ConfigError("theorem1_bound: need ticks >= 1");
    const double horizon = static_cast<double>(ticks);
    return (loss0 + bp.L * vbar0 + horizon * noise_term_per_tick(bp)) / (eta_value * horizon);
}

double theorem1_asymptote(const BoundParams& bp) {
    const double eta_value = eta(bp);
    if (!(eta_value > 0.0)) throw ConfigError("theorem1_asymptote: eta must be positive");
    return noise_term_per_tick(bp) / eta_value;
}

double theorem1_bound_realtime(const BoundParams& bp, double loss0, double vbar0, double t) {
    const double eta_value = eta(bp);
    if (!(eta_value > 0.0)) throw ConfigError("theorem1_bound_realtime: eta must be positive");
    return (loss0 + bp.L * vbar0) * realtime_factor(bp.mu_total, t) / eta_value +
           theorem1_asymptote(bp);
}

namespace {

void require_corollary1(const BoundParams& bp, double kappa_value, double eta_value) {
    (void)bp;
    if (!(kappa_value < 0.0)) throw ConfigError("corollary1: kappa must be negative");
    if (!(eta_value > 0.0)) throw ConfigError("corollary1: eta must be positive");
}

double corollary1_initial_term(const BoundParams& bp, double loss0, double vbar0,
                               double eta_value) {
    return (bp.N / bp.gamma + 4.0 * bp.L * bp.gamma * bp.xi / eta_value) * vbar0 +
           (4.0 * bp.gamma * bp.xi / eta_value) * loss0;
}

} // namespace

double corollary1_bound(const BoundParams& bp, double loss0, double vbar0, std::int64_t ticks) {
    const double kappa_value = kappa(bp);
    const double eta_value = eta(bp);
    require_corollary1(bp, kappa_value, eta_value);
    if (ticks < 1) throw ConfigError("corollary1_bound: need ticks >= 1");
    const double abs_kappa = std::abs(kappa_value);
    return corollary1_initial_term(bp, loss0, vbar0, eta_value) /
               (static_cast<double>(ticks) * abs_kappa) +
           corollary1_asymptote(bp);
}

double corollary1_asymptote(const BoundParams& bp) {
    const double kappa_value = kappa(bp);
    const double eta_value = eta(bp);
    require_corollary1(bp, kappa_value, eta_value);
    const double abs_kappa = std::abs(kappa_value);
    const double g = bp.gamma;
    return 4.0 * bp.L * g * g * g * bp.xi * bp.xi * bp.sigma_sq /
               (eta_value * abs_kappa * bp.N * bp.N) * (1.0 + 1.0 / (2.0 * bp.N)) +
           g * bp.xi * bp.sigma_sq / (abs_kappa * bp.N);
}

double corollary1_bound_realtime(const BoundParams& bp, double loss0, double vbar0, double t) {
    const double kappa_value = kappa(bp);
    const double eta_value = eta(bp);
    require_corollary1(bp, kappa_value, eta_value);
    return corollary1_initial_term(bp, loss0, vbar0, eta_value) *
               realtime_factor(bp.mu_total, t) / std::abs(kappa_value) +
           corollary1_asymptote(bp);
}

namespace {

double rate_weighted_sigma_sq(const NodeRates& rates, const Vector& sigmas) {
    if (sigmas.size() != rates.mu.size())
        throw ConfigError("prop1: sigmas and rates disagree on node count");
    return (rates.mu.array() * sigmas.array().square()).sum() / rates.total;
}

void require_prop1(const BoundParams& bp) {
    if (!(bp.gamma > 0.0 && bp.gamma < 2.0 / bp.L))
        throw ConfigError("prop1: gamma must lie in (0, 2/L)");
}

} // namespace

double prop1_bound(const BoundParams& bp, const NodeRates& rates, const Vector& sigmas,
                   double loss0, std::int64_t ticks) {
    require_prop1(bp);
    if (ticks < 1) throw ConfigError("prop1_bound: need ticks >= 1");
    return loss0 / (eta_tilde(bp) * static_cast<double>(ticks)) +
           prop1_asymptote(bp, rates, sigmas);
}

double prop1_asymptote(const BoundParams& bp, const NodeRates& rates, const Vector& sigmas) {
    require_prop1(bp);
    return bp.L * bp.gamma * bp.gamma / (2.0 * eta_tilde(bp)) *
           rate_weighted_sigma_sq(rates, sigmas);
}

double prop1_bound_realtime(const BoundParams& bp, const NodeRates& rates,
                            const Vector& sigmas, double loss0, double t) {
    require_prop1(bp);
    return loss0 * realtime_factor(bp.mu_total, t) / eta_tilde(bp) +
           prop1_asymptote(bp, rates, sigmas);
}

BoundReport make_bound_report(const BoundParams& bp, const NodeRates& rates,
                              const Vector& sigmas, double loss0, double vbar0,
                              std::int64_t ticks) {
    BoundReport report;
    report.params = bp;
    report.kappa_statement = kappa(bp, KappaVariant::Statement);
    report.kappa_proof_variant = kappa(bp, KappaVariant::ProofStep);
    report.limits = step_size_limits(bp);
    report.eta = eta(bp);
    report.eta_tilde = eta_tilde(bp);
    report.eta_zero_gamma = eta_zero_gamma(bp);
    report.loss0 = loss0;
    report.vbar0 = vbar0;
    report.ticks = ticks;

    const double gamma_cap = std::min(report.limits.gamma_bar1, report.limits.gamma_bar2);
    report.theorem1_applicable =
        bp.a > report.limits.a_threshold && bp.gamma < gamma_cap && report.eta > 0.0;
    report.corollary1_applicable = report.theorem1_applicable && report.kappa_statement < 0.0;
    report.prop1_applicable = bp.gamma > 0.0 && bp.gamma < 2.0 / bp.L;

    report.theorem1_value = kNaN;
    report.corollary1_value = kNaN;
    report.prop1_value = kNaN;
    report.nr_asymptote = kNaN;
    report.vbar_asymptote = kNaN;
    report.fl_asymptote = kNaN;
    if (report.theorem1_applicable) {
        report.theorem1_value = theorem1_bound(bp, loss0, vbar0, ticks);
        report.nr_asymptote = theorem1_asymptote(bp);
    }
    if (report.corollary1_applicable) {
        report.corollary1_value = corollary1_bound(bp, loss0, vbar0, ticks);
        report.vbar_asymptote = corollary1_asymptote(bp);
    }
    if (report.prop1_applicable) {
        report.prop1_value = prop1_bound(bp, rates, sigmas, loss0, ticks);
        report.fl_asymptote = prop1_asymptote(bp, rates, sigmas);
    }
    return report;
}

MetricsTrace trajectory_metrics(const std::vector<Matrix>& states,
                                const std::vector<Event>& events, const LossModel& model) {
    if (states.size() != events.size())
        throw ConfigError("trajectory_metrics: one state per event required");
    MetricsTrace trace;
    double sum_gns = 0.0;
    double sum_vbar = 0.0;
    for (std::size_t j = 0; j < states.size(); ++j) {
        const Vector mean = states[j].rowwise().mean();
        const double gns = grad_eval(model, mean).squaredNorm();
        const double v = vbar(states[j]);
        sum_gns += gns;
        sum_vbar += v;
        const double count = static_cast<double>(j + 1);
        trace.rows.push_back({events[j].k, events[j].t, events[j].node, v, gns,
                              loss_eval(model, mean), sum_gns / count, sum_vbar / count});
    }
    trace.total_ticks = static_cast<std::int64_t>(events.size());
    if (!trace.rows.empty()) {
        trace.final_run_avg_grad_norm_sq = trace.rows.back().run_avg_grad_norm_sq;
        trace.final_run_avg_vbar = trace.rows.back().run_avg_vbar;
    }
    return trace;
}

double lemma1_residual(const Matrix& pre_thetas, const Matrix& post_thetas,
                       const Graph& g, const HyperParams& hp, int active_node,
                       const Vector& true_grad, const Vector& noise) {
    const auto n = pre_thetas.cols();
    const Vector mean = pre_thetas.rowwise().mean();
    const double vbar_pre = vbar(pre_thetas);
    const double vbar_post = vbar(post_thetas);

    // ensemble means of the indicator-gated terms; only the active node fires
    const Vector consensus_active = consensus_grad(pre_thetas, g, active_node);
    const Vector mean_loss_grad = true_grad / static_cast<double>(n);
    const Vector mean_consensus = consensus_active / static_cast<double>(n);
    const Vector mean_noise = noise / static_cast<double>(n);

    const Vector e_active = pre_thetas.col(active_node) - mean;
    double decomposed = vbar_pre;
    decomposed -= (2.0 * hp.gamma / static_cast<double>(n)) *
                  e_active.dot(true_grad + hp.a * consensus_active);
    decomposed -= (2.0 * hp.gamma / static_cast<double>(n)) * e_active.dot(noise);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double gate = i == active_node ? 1.0 : 0.0;
        const Vector delta = (gate * true_grad - mean_loss_grad) +
                             hp.a * (gate * consensus_active - mean_consensus) +
                             (gate * noise - mean_noise);
        decomposed += hp.gamma * hp.gamma * delta.squaredNorm() / static_cast<double>(n);
    }
    return std::abs(vbar_post - decomposed);
}

double plateau(const std::vector<double>& series, double fraction) {
    if (series.size() < 10) throw ConfigError("plateau: series too short (need >= 10)");
    if (fraction <= 0.0 || fraction > 1.0) throw ConfigError("plateau: fraction in (0,1]");
    const auto count = std::max<std::size_t>(
        1, static_cast<std::size_t>(fraction * static_cast<double>(series.size())));
    double total = 0.0;
    for (std::size_t i = series.size() - count; i < series.size(); ++i) total += series[i];
    return total / static_cast<double>(count);
}

} // namespace nrlearn
