#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nrlearn/analysis.hpp"
#include "nrlearn/schemes.hpp"

namespace nrlearn {

enum class SchemeChoice { NR, FL, Both };
enum class InitMode { Equal, Spread };

struct ModelSpec {
    std::string kind = "quadratic"; // quadratic | logistic | nonconvex_sine
    int dim = 10;
    // two entries -> linearly spaced eigenvalues, or dim explicit entries
    std::vector<double> spectrum = {0.1, 1.0};
    std::vector<double> linear;  // b, scalar or dim entries; empty -> zero
    int samples = 200;           // logistic
    std::uint64_t data_seed = 7; // logistic
    double amp = 0.5;            // nonconvex_sine
    double freq = 2.0;
};

struct NoiseConfig {
    std::string kind = "gaussian"; // gaussian | minibatch
    std::vector<double> sigma = {1.0}; // scalar broadcast or one per node
    std::vector<int> batch;            // minibatch sizes, scalar broadcast or per node
    double sample_sigma = 1.0;         // minibatch per-sample noise scale
    int pool = 256;
    std::uint64_t pool_seed = 11;
};

struct TopologySpec {
    std::string kind = "complete"; // complete | ring | watts_strogatz
    int k = 2;
    double beta = 0.0;
};

struct InitSpec {
    InitMode mode = InitMode::Spread;
    std::vector<double> theta0 = {0.0}; // scalar broadcast or dim entries
    double spread = 1.0;                // per-component stddev around theta0
};

struct SweepSpec {
    std::string axis; // a | gamma | N | topology
    std::vector<double> values;
    std::vector<TopologySpec> topologies; // topology axis only
    double gamma_c = 0.0;                 // N axis: gamma = gamma_c / N
    bool scale_ticks_quadratically = true; // N axis: ticks scale with (N/N0)^2
};

struct ExperimentConfig {
    int schema_version = 1;
    SchemeChoice scheme = SchemeChoice::NR;
    ModelSpec model;
    NoiseConfig noise;
    std::vector<double> rates = {1.0}; // scalar broadcast or one per node
    int nodes = 5;
    TopologySpec topology;
    HyperParams hyper{0.01, 10.0};
    std::int64_t ticks = 20000;
    double horizon = 0.0; // real-time mode when positive; overrides ticks
    int trials = 10;
    std::uint64_t seed = 20240601;
    InitSpec init;
    int thin = 1;
    int workers = 1;
    KappaVariant kappa_variant = KappaVariant::Statement;
    bool percentile_band = false;
    std::optional<SweepSpec> sweep;
    std::string out_dir = "out";
    bool export_traces = false; // write trace_<i>.csv audit files alongside metrics
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);
// canonical resolved form: defaults filled, execution details (out_dir, workers) omitted
std::string resolved_config_json(const ExperimentConfig& config);
std::string config_hash(const ExperimentConfig& config); // git-style sha1 of the resolved form

// every object a single trial needs, built deterministically from the config
struct BuiltExperiment {
    LossModel model;
    NoiseSpec noise;
    Graph graph;
    SpectralSummary spectrum;
    NodeRates rates;
    HyperParams hyper;
    Vector theta0;
};

BuiltExperiment build_experiment(const ExperimentConfig& config);

struct TrialSummary {
    int index = 0;
    std::uint64_t seed = 0;
    bool diverged = false;
    std::int64_t diverged_at = -1;
    std::int64_t ticks = 0;
    double loss0 = 0.0;
    double vbar0 = 0.0;
    double final_loss = 0.0;
    double final_grad_norm_sq = 0.0;
    double final_vbar = 0.0;
    double avg_grad_norm_sq = 0.0; // exact time average over all ticks
    double avg_vbar = 0.0;
    double loss_plateau = 0.0;     // mean of the last 20% of recorded rows
    double grad_norm_sq_plateau = 0.0;
    double vbar_plateau = 0.0;
};

struct TrialOutput {
    TrialSummary summary;
    MetricsTrace metrics;
};

// The per-trial seeds derived from (master seed, trial index).
struct TrialSeeds {
    std::uint64_t trial = 0;
    std::uint64_t trace = 0;
    std::uint64_t noise = 0;
    std::uint64_t init = 0;
};

TrialSeeds trial_seeds(std::uint64_t master, int trial_index);

// Run all trials of one scheme; pure apart from thread scheduling, output is
// deterministic and independent of the worker count.
std::vector<TrialOutput> run_trials(const ExperimentConfig& config, SchemeChoice scheme);

struct AggregateStats {
    double mean = 0.0;
    double stderr_mean = 0.0;
};

struct RunSummary {
    std::string scheme;
    std::string hash;
    int trials = 0;
    int diverged = 0;
    std::vector<TrialSummary> trial_summaries;
    AggregateStats avg_grad_norm_sq;
    AggregateStats avg_vbar;
    AggregateStats grad_norm_sq_plateau;
    AggregateStats loss_plateau;
    AggregateStats final_loss;
    std::optional<BoundReport> bounds;
    double wall_seconds = 0.0;
};

// run + write config.json, trial_<i>.csv, aggregate.csv, summary.json
RunSummary cmd_run(const ExperimentConfig& config);

struct CompareSummary {
    RunSummary nr;
    RunSummary fl;
    double plateau_ratio = 0.0; // NR grad plateau / FL grad plateau
};

// both schemes on identical event traces and noise seeds; artifacts in
// <out>/nr and <out>/fl plus a comparison report
CompareSummary cmd_compare(const ExperimentConfig& config);

struct SweepEntry {
    std::string label;
    double value = 0.0;
    RunSummary run;
};

struct SweepSummary {
    std::string axis;
    std::vector<SweepEntry> entries;
    double fitted_slope = 0.0; // N axis: slope of log(grad plateau) vs log(N)
};

SweepSummary cmd_sweep(const ExperimentConfig& config);

// derived constants and bound verdicts, no simulation
BoundReport cmd_check(const ExperimentConfig& config, std::ostream& out);

// render one metric from one or more aggregate.csv files into an SVG file
void cmd_plot(const std::vector<std::string>& inputs, const std::vector<std::string>& labels,
              const std::string& metric, const std::string& x_axis, bool log_y,
              const std::string& out_path, std::ostream& diagnostics);

} // namespace nrlearn
