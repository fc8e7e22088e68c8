#include "nrlearn/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include <json.hpp>

#include "nrlearn/csvio.hpp"
#include "nrlearn/errors.hpp"
#include "nrlearn/hash.hpp"
#include "nrlearn/stats.hpp"
#include "nrlearn/svgplot.hpp"

namespace nrlearn {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::uint64_t kGraphSeedTag = 0x67726170;

void check_keys(const json& j, const char* where, const std::set<std::string>& allowed) {
    for (const auto& item : j.items())
        if (!allowed.count(item.key()))
            throw ConfigError(std::string("config: unknown key '") + item.key() + "' in " + where);
}

std::vector<double> as_list(const json& j, const char* field) {
    std::vector<double> values;
    if (j.is_number()) {
        values.push_back(j.get<double>());
    } else if (j.is_array()) {
        for (const auto& v : j) {
            if (!v.is_number()) throw ConfigError(std::string("config: ") + field + " must be numeric");
            values.push_back(v.get<double>());
        }
    } else {
        throw ConfigError(std::string("config: ") + field + " must be a number or array");
    }
    if (values.empty()) throw ConfigError(std::string("config: ") + field + " must not be empty");
    return values;
}

std::vector<int> as_int_list(const json& j, const char* field) {
    std::vector<int> values;
    for (const double v : as_list(j, field)) {
        if (v != std::floor(v)) throw ConfigError(std::string("config: ") + field + " must be integer");
        values.push_back(static_cast<int>(v));
    }
    return values;
}

Vector broadcast(const std::vector<double>& values, int n, const char* field) {
    if (static_cast<int>(values.size()) == n)
        return Eigen::Map<const Vector>(values.data(), n);
    if (values.size() == 1) return Vector::Constant(n, values[0]);
    throw ConfigError(std::string("config: ") + field + " must have 1 or " + std::to_string(n) +
                      " entries, got " + std::to_string(values.size()));
}

IndexVector broadcast_int(const std::vector<int>& values, int n, const char* field) {
    IndexVector out(n);
    if (static_cast<int>(values.size()) == n) {
        for (int i = 0; i < n; ++i) out[i] = values[static_cast<std::size_t>(i)];
    } else if (values.size() == 1) {
        out.setConstant(values[0]);
    } else {
        throw ConfigError(std::string("config: ") + field + " must have 1 or " + std::to_string(n) +
                          " entries");
    }
    return out;
}

TopologySpec parse_topology(const json& j) {
    check_keys(j, "topology", {"kind", "k", "beta"});
    TopologySpec spec;
    spec.kind = j.value("kind", std::string("complete"));
    spec.k = j.value("k", 2);
    spec.beta = j.value("beta", 0.0);
    if (spec.kind != "complete" && spec.kind != "ring" && spec.kind != "watts_strogatz")
        throw ConfigError("config: topology.kind must be complete|ring|watts_strogatz");
    return spec;
}

json topology_json(const TopologySpec& spec) {
    json j;
    j["kind"] = spec.kind;
    if (spec.kind != "complete") j["k"] = spec.k;
    if (spec.kind == "watts_strogatz") j["beta"] = spec.beta;
    return j;
}

} // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& err) {
        throw ConfigError(std::string("config: invalid JSON: ") + err.what());
    }
    check_keys(j, "top level",
               {"schema_version", "scheme", "model", "noise", "rates", "nodes", "topology",
                "hyper", "ticks", "horizon", "trials", "seed", "init", "thin", "workers",
                "kappa_variant", "percentile_band", "sweep", "out_dir",
                "export_traces"});

    ExperimentConfig config;
    config.schema_version = j.value("schema_version", 1);
    if (config.schema_version != 1)
        throw ConfigError("config: unsupported schema_version " +
                          std::to_string(config.schema_version));

    const std::string scheme = j.value("scheme", std::string("nr"));
    if (scheme == "nr")
        config.scheme = SchemeChoice::NR;
    else if (scheme == "fl")
        config.scheme = SchemeChoice::FL;
    else if (scheme == "both")
        config.scheme = SchemeChoice::Both;
    else
        throw ConfigError("config: scheme must be nr|fl|both");

    if (j.contains("model")) {
        const json& m = j.at("model");
        check_keys(m, "model",
                   {"kind", "p", "spectrum", "b", "samples", "data_seed", "amp", "freq"});
        config.model.kind = m.value("kind", std::string("quadratic"));
        if (config.model.kind != "quadratic" && config.model.kind != "logistic" &&
            config.model.kind != "nonconvex_sine")
            throw ConfigError("config: model.kind must be quadratic|logistic|nonconvex_sine");
        config.model.dim = m.value("p", 10);
        if (config.model.dim < 1) throw ConfigError("config: model.p must be >= 1");
        if (m.contains("spectrum")) config.model.spectrum = as_list(m.at("spectrum"), "model.spectrum");
        if (m.contains("b")) config.model.linear = as_list(m.at("b"), "model.b");
        config.model.samples = m.value("samples", 200);
        config.model.data_seed = m.value("data_seed", std::uint64_t{7});
        config.model.amp = m.value("amp", 0.5);
        config.model.freq = m.value("freq", 2.0);
    }

    if (j.contains("noise")) {
        const json& n = j.at("noise");
        check_keys(n, "noise", {"kind", "sigma", "batch", "sample_sigma", "pool", "pool_seed"});
        config.noise.kind = n.value("kind", std::string("gaussian"));
        if (config.noise.kind != "gaussian" && config.noise.kind != "minibatch")
            throw ConfigError("config: noise.kind must be gaussian|minibatch");
        if (n.contains("sigma")) config.noise.sigma = as_list(n.at("sigma"), "noise.sigma");
        if (n.contains("batch")) config.noise.batch = as_int_list(n.at("batch"), "noise.batch");
        config.noise.sample_sigma = n.value("sample_sigma", 1.0);
        config.noise.pool = n.value("pool", 256);
        config.noise.pool_seed = n.value("pool_seed", std::uint64_t{11});
        if (config.noise.kind == "minibatch" && config.noise.batch.empty())
            throw ConfigError("config: minibatch noise requires batch sizes");
    }

    if (j.contains("rates")) config.rates = as_list(j.at("rates"), "rates");
    config.nodes = j.value("nodes", 5);
    if (config.nodes < 2) throw ConfigError("config: nodes must be >= 2");
    if (j.contains("topology")) config.topology = parse_topology(j.at("topology"));

    if (j.contains("hyper")) {
        const json& h = j.at("hyper");
        check_keys(h, "hyper", {"gamma", "a"});
        config.hyper.gamma = h.value("gamma", 0.01);
        config.hyper.a = h.value("a", 10.0);
    }
    if (config.hyper.gamma <= 0.0) throw ConfigError("config: hyper.gamma must be positive");
    if (config.hyper.a < 0.0) throw ConfigError("config: hyper.a must be >= 0");

    config.ticks = j.value("ticks", std::int64_t{20000});
    config.horizon = j.value("horizon", 0.0);
    if (config.horizon <= 0.0 && config.ticks < 1)
        throw ConfigError("config: need ticks >= 1 or a positive horizon");
    config.trials = j.value("trials", 10);
    if (config.trials < 1) throw ConfigError("config: trials must be >= 1");
    config.seed = j.value("seed", std::uint64_t{20240601});

    if (j.contains("init")) {
        const json& init = j.at("init");
        check_keys(init, "init", {"mode", "theta0", "spread"});
        const std::string mode = init.value("mode", std::string("spread"));
        if (mode == "equal")
            config.init.mode = InitMode::Equal;
        else if (mode == "spread")
            config.init.mode = InitMode::Spread;
        else
            throw ConfigError("config: init.mode must be equal|spread");
        if (init.contains("theta0")) config.init.theta0 = as_list(init.at("theta0"), "init.theta0");
        config.init.spread = init.value("spread", 1.0);
        if (config.init.spread < 0.0) throw ConfigError("config: init.spread must be >= 0");
    }

    // default thinning keeps recorded rows at or below 1e5 per trial
    const std::int64_t default_thin =
        config.horizon > 0.0 ? 1 : std::max<std::int64_t>(1, config.ticks / 100000);
    config.thin = j.value("thin", static_cast<int>(default_thin));
    if (config.thin < 1) throw ConfigError("config: thin must be >= 1");
    config.workers = j.value("workers", 1);
    if (config.workers < 1) throw ConfigError("config: workers must be >= 1");

    const std::string variant = j.value("kappa_variant", std::string("statement"));
    if (variant == "statement")
        config.kappa_variant = KappaVariant::Statement;
    else if (variant == "proof")
        config.kappa_variant = KappaVariant::ProofStep;
    else
        throw ConfigError("config: kappa_variant must be statement|proof");
    config.percentile_band = j.value("percentile_band", false);

    if (j.contains("sweep")) {
        const json& s = j.at("sweep");
        check_keys(s, "sweep",
                   {"axis", "values", "topologies", "gamma_c", "scale_ticks_quadratically"});
        SweepSpec sweep;
        sweep.axis = s.value("axis", std::string());
        if (sweep.axis != "a" && sweep.axis != "gamma" && sweep.axis != "N" &&
            sweep.axis != "topology")
            throw ConfigError("config: sweep.axis must be a|gamma|N|topology");
        if (s.contains("values")) sweep.values = as_list(s.at("values"), "sweep.values");
        if (s.contains("topologies"))
            for (const auto& t : s.at("topologies")) sweep.topologies.push_back(parse_topology(t));
        sweep.gamma_c = s.value("gamma_c", 0.0);
        sweep.scale_ticks_quadratically = s.value("scale_ticks_quadratically", true);
        if (sweep.axis == "topology") {
            if (sweep.topologies.empty())
                throw ConfigError("config: topology sweep needs sweep.topologies");
        } else if (sweep.values.empty()) {
            throw ConfigError("config: sweep needs values");
        }
        if (sweep.axis == "N" && sweep.gamma_c <= 0.0)
            throw ConfigError("config: N sweep needs gamma_c > 0");
        config.sweep = sweep;
    }

    config.out_dir = j.value("out_dir", std::string("out"));
    config.export_traces = j.value("export_traces", false);
    return config;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

std::string resolved_config_json(const ExperimentConfig& config) {
    json j;
    j["schema_version"] = config.schema_version;
    j["scheme"] = config.scheme == SchemeChoice::NR   ? "nr"
                  : config.scheme == SchemeChoice::FL ? "fl"
                                                      : "both";
    json m;
    m["kind"] = config.model.kind;
    m["p"] = config.model.dim;
    if (config.model.kind == "logistic") {
        m["samples"] = config.model.samples;
        m["data_seed"] = config.model.data_seed;
    } else {
        m["spectrum"] = config.model.spectrum;
        if (!config.model.linear.empty()) m["b"] = config.model.linear;
    }
    if (config.model.kind == "nonconvex_sine") {
        m["amp"] = config.model.amp;
        m["freq"] = config.model.freq;
    }
    j["model"] = m;

    json n;
    n["kind"] = config.noise.kind;
    if (config.noise.kind == "gaussian") {
        n["sigma"] = config.noise.sigma;
    } else {
        n["batch"] = config.noise.batch;
        n["sample_sigma"] = config.noise.sample_sigma;
        n["pool"] = config.noise.pool;
        n["pool_seed"] = config.noise.pool_seed;
    }
    j["noise"] = n;

    j["rates"] = config.rates;
    j["nodes"] = config.nodes;
    j["topology"] = topology_json(config.topology);
    j["hyper"] = {{"gamma", config.hyper.gamma}, {"a", config.hyper.a}};
    if (config.horizon > 0.0)
        j["horizon"] = config.horizon;
    else
        j["ticks"] = config.ticks;
    j["trials"] = config.trials;
    j["seed"] = config.seed;
    j["init"] = {{"mode", config.init.mode == InitMode::Equal ? "equal" : "spread"},
                 {"theta0", config.init.theta0},
                 {"spread", config.init.spread}};
    j["thin"] = config.thin;
    j["kappa_variant"] = config.kappa_variant == KappaVariant::Statement ? "statement" : "proof";
    j["percentile_band"] = config.percentile_band;
    if (config.sweep) {
        json s;
        s["axis"] = config.sweep->axis;
        if (config.sweep->axis == "topology") {
            json topologies = json::array();
            for (const auto& t : config.sweep->topologies) topologies.push_back(topology_json(t));
            s["topologies"] = topologies;
        } else {
            s["values"] = config.sweep->values;
        }
        if (config.sweep->axis == "N") {
            s["gamma_c"] = config.sweep->gamma_c;
            s["scale_ticks_quadratically"] = config.sweep->scale_ticks_quadratically;
        }
        j["sweep"] = s;
    }
    return j.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& config) {
    return git_blob_sha1(resolved_config_json(config));
}

BuiltExperiment build_experiment(const ExperimentConfig& config) {
    BuiltExperiment built;
    const int n = config.nodes;
    const int p = config.model.dim;

    // model
    if (config.model.kind == "logistic") {
        built.model = make_logistic(config.model.samples, p, config.model.data_seed);
    } else {
        Vector spectrum;
        if (static_cast<int>(config.model.spectrum.size()) == p) {
            spectrum = Eigen::Map<const Vector>(config.model.spectrum.data(), p);
        } else if (config.model.spectrum.size() == 2) {
            spectrum.setLinSpaced(p, config.model.spectrum[0], config.model.spectrum[1]);
        } else if (config.model.spectrum.size() == 1) {
            spectrum = Vector::Constant(p, config.model.spectrum[0]);
        } else {
            throw ConfigError("config: model.spectrum must have 1, 2, or p entries");
        }
        Vector b = config.model.linear.empty()
                       ? Vector::Zero(p)
                       : broadcast(config.model.linear, p, "model.b");
        if (config.model.kind == "quadratic") {
            built.model = make_quadratic(Matrix(spectrum.asDiagonal()), std::move(b));
        } else {
            built.model = make_nonconvex_sine(spectrum, std::move(b), config.model.amp,
                                              config.model.freq);
        }
    }

    // noise
    if (config.noise.kind == "gaussian") {
        built.noise = make_gaussian_noise(broadcast(config.noise.sigma, n, "noise.sigma"));
    } else {
        built.noise = make_minibatch_noise(broadcast_int(config.noise.batch, n, "noise.batch"), p,
                                           config.noise.sample_sigma, config.noise.pool,
                                           config.noise.pool_seed);
    }

    built.rates = make_rates(broadcast(config.rates, n, "rates"));

    if (config.topology.kind == "complete") {
        built.graph = build_complete(n);
    } else if (config.topology.kind == "ring") {
        built.graph = build_ring_lattice(n, config.topology.k);
    } else {
        Rng rng(derive_seed(config.seed, kGraphSeedTag));
        built.graph = build_watts_strogatz(n, config.topology.k, config.topology.beta, rng);
    }
    built.spectrum = spectral(built.graph);
    built.hyper = config.hyper;
    built.theta0 = broadcast(config.init.theta0, p, "init.theta0");
    return built;
}

TrialSeeds trial_seeds(std::uint64_t master, int trial_index) {
    TrialSeeds seeds;
    seeds.trial = derive_seed(master, static_cast<std::uint64_t>(trial_index));
    seeds.trace = derive_seed(seeds.trial, 1);
    seeds.noise = derive_seed(seeds.trial, 2);
    seeds.init = derive_seed(seeds.trial, 3);
    return seeds;
}

namespace {

Matrix nr_init(const BuiltExperiment& built, const InitSpec& init, std::uint64_t init_seed) {
    const int p = built.model.dim;
    const int n = built.graph.n;
    Matrix thetas(p, n);
    thetas.colwise() = built.theta0;
    if (init.mode == InitMode::Spread && init.spread > 0.0) {
        Rng rng(init_seed);
        Matrix draw(p, n);
        rng.normal_fill(draw.data(), static_cast<long>(p) * n);
        thetas += init.spread * draw;
    }
    return thetas;
}

Vector fl_init(const BuiltExperiment& built, const InitSpec& init, std::uint64_t init_seed) {
    Vector theta = built.theta0;
    if (init.mode == InitMode::Spread && init.spread > 0.0) {
        Rng rng(init_seed);
        Vector draw(built.model.dim);
        rng.normal_fill(draw.data(), built.model.dim);
        theta += init.spread * draw;
    }
    return theta;
}

double plateau_or_nan(const std::vector<double>& series) {
    return series.size() >= 10 ? plateau(series) : std::numeric_limits<double>::quiet_NaN();
}

TrialOutput run_one_trial(const ExperimentConfig& config, const BuiltExperiment& built,
                          SchemeChoice scheme, int index) {
    const TrialSeeds seeds = trial_seeds(config.seed, index);
    const EventTrace trace =
        config.horizon > 0.0 ? sample_trace_until(built.rates, config.horizon, seeds.trace)
                             : sample_trace(built.rates, config.ticks, seeds.trace);
    RunOptions options;
    options.thin = config.thin;

    TrialOutput out;
    out.summary.index = index;
    out.summary.seed = seeds.trial;

    if (scheme == SchemeChoice::NR) {
        const Matrix init = nr_init(built, config.init, seeds.init);
        const Vector mean0 = init.rowwise().mean();
        out.summary.loss0 = loss_eval(built.model, mean0);
        out.summary.vbar0 = vbar(init);
        NRRun run = run_nr(built.model, built.noise, built.graph, built.hyper, init, trace,
                           seeds.noise, options);
        out.summary.diverged = run.diverged;
        out.summary.diverged_at = run.diverged_at;
        const Vector mean = run.state.ensemble_average();
        out.summary.final_loss = loss_eval(built.model, mean);
        out.summary.final_grad_norm_sq = grad_eval(built.model, mean).squaredNorm();
        out.summary.final_vbar = vbar(run.state.thetas);
        out.metrics = std::move(run.metrics);
    } else {
        const Vector init = fl_init(built, config.init, seeds.init);
        out.summary.loss0 = loss_eval(built.model, init);
        out.summary.vbar0 = 0.0;
        FLRun run =
            run_fl(built.model, built.noise, built.hyper, init, trace, seeds.noise, options);
        out.summary.diverged = run.diverged;
        out.summary.diverged_at = run.diverged_at;
        out.summary.final_loss = loss_eval(built.model, run.state.theta);
        out.summary.final_grad_norm_sq = grad_eval(built.model, run.state.theta).squaredNorm();
        out.summary.final_vbar = 0.0;
        out.metrics = std::move(run.metrics);
    }
    out.summary.ticks = out.metrics.total_ticks;
    out.summary.avg_grad_norm_sq = out.metrics.final_run_avg_grad_norm_sq;
    out.summary.avg_vbar = out.metrics.final_run_avg_vbar;
    out.summary.loss_plateau = plateau_or_nan(out.metrics.column(&MetricsRow::loss));
    out.summary.grad_norm_sq_plateau =
        plateau_or_nan(out.metrics.column(&MetricsRow::grad_norm_sq));
    out.summary.vbar_plateau = plateau_or_nan(out.metrics.column(&MetricsRow::vbar));
    return out;
}

} // namespace

std::vector<TrialOutput> run_trials(const ExperimentConfig& config, SchemeChoice scheme) {
    if (scheme == SchemeChoice::Both)
        throw ConfigError("run_trials: pick a concrete scheme");
    const BuiltExperiment built = build_experiment(config);
    std::vector<TrialOutput> outputs(static_cast<std::size_t>(config.trials));
    const int workers = std::min(config.workers, config.trials);
    if (workers <= 1) {
        for (int i = 0; i < config.trials; ++i)
            outputs[static_cast<std::size_t>(i)] = run_one_trial(config, built, scheme, i);
        return outputs;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto work = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= config.trials) return;
            try {
                outputs[static_cast<std::size_t>(i)] = run_one_trial(config, built, scheme, i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) threads.emplace_back(work);
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return outputs;
}

namespace {

void write_metrics_csv(const std::string& path, const MetricsTrace& metrics) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << "k,t,node,vbar,grad_norm_sq,loss,running_avg_grad_norm_sq,running_avg_vbar\n";
    for (const auto& row : metrics.rows) {
        out << row.k << ',' << format_double(row.t) << ',' << row.node << ','
            << format_double(row.vbar) << ',' << format_double(row.grad_norm_sq) << ','
            << format_double(row.loss) << ',' << format_double(row.run_avg_grad_norm_sq) << ','
            << format_double(row.run_avg_vbar) << '\n';
    }
}

std::vector<std::size_t> surviving_indices(const std::vector<TrialOutput>& outputs) {
    std::vector<std::size_t> alive;
    for (std::size_t i = 0; i < outputs.size(); ++i)
        if (!outputs[i].summary.diverged) alive.push_back(i);
    return alive;
}

void write_aggregate_csv(const std::string& path, const std::vector<TrialOutput>& outputs,
                         bool percentile_band) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << "k,t_mean,vbar_mean,vbar_stderr,grad_norm_sq_mean,grad_norm_sq_stderr,"
           "loss_mean,loss_stderr,running_avg_grad_norm_sq_mean,"
           "running_avg_grad_norm_sq_stderr,running_avg_vbar_mean,running_avg_vbar_stderr";
    if (percentile_band)
        out << ",grad_norm_sq_p2_5,grad_norm_sq_p97_5,loss_p2_5,loss_p97_5";
    out << '\n';

    const auto alive = surviving_indices(outputs);
    if (alive.empty()) return;
    std::size_t rows = outputs[alive[0]].metrics.rows.size();
    for (const auto i : alive) rows = std::min(rows, outputs[i].metrics.rows.size());

    std::vector<double> scratch(alive.size());
    auto stats_for = [&](std::size_t row, double MetricsRow::* field) {
        for (std::size_t j = 0; j < alive.size(); ++j)
            scratch[j] = outputs[alive[j]].metrics.rows[row].*field;
        return std::pair<double, double>(mean(scratch), stderr_of_mean(scratch));
    };

    for (std::size_t row = 0; row < rows; ++row) {
        const auto k = outputs[alive[0]].metrics.rows[row].k;
        bool aligned = true;
        for (const auto i : alive)
            if (outputs[i].metrics.rows[row].k != k) aligned = false;
        if (!aligned) break; // horizon mode: trailing rows at unequal ticks

        const auto [t_mean, t_se] = stats_for(row, &MetricsRow::t);
        (void)t_se;
        const auto [vbar_mean, vbar_se] = stats_for(row, &MetricsRow::vbar);
        const auto [gns_mean, gns_se] = stats_for(row, &MetricsRow::grad_norm_sq);
        const auto [loss_mean, loss_se] = stats_for(row, &MetricsRow::loss);
        const auto [rg_mean, rg_se] = stats_for(row, &MetricsRow::run_avg_grad_norm_sq);
        const auto [rv_mean, rv_se] = stats_for(row, &MetricsRow::run_avg_vbar);
        out << k << ',' << format_double(t_mean) << ',' << format_double(vbar_mean) << ','
            << format_double(vbar_se) << ',' << format_double(gns_mean) << ','
            << format_double(gns_se) << ',' << format_double(loss_mean) << ','
            << format_double(loss_se) << ',' << format_double(rg_mean) << ','
            << format_double(rg_se) << ',' << format_double(rv_mean) << ','
            << format_double(rv_se);
        if (percentile_band) {
            std::vector<double> gns(scratch.size()), loss(scratch.size());
            for (std::size_t j = 0; j < alive.size(); ++j) {
                gns[j] = outputs[alive[j]].metrics.rows[row].grad_norm_sq;
                loss[j] = outputs[alive[j]].metrics.rows[row].loss;
            }
            out << ',' << format_double(percentile(gns, 2.5)) << ','
                << format_double(percentile(gns, 97.5)) << ','
                << format_double(percentile(loss, 2.5)) << ','
                << format_double(percentile(loss, 97.5));
        }
        out << '\n';
    }
}

AggregateStats aggregate_of(const std::vector<TrialOutput>& outputs,
                            double TrialSummary::* field) {
    std::vector<double> values;
    for (const auto& o : outputs)
        if (!o.summary.diverged && std::isfinite(o.summary.*field))
            values.push_back(o.summary.*field);
    AggregateStats stats;
    if (!values.empty()) {
        stats.mean = mean(values);
        stats.stderr_mean = stderr_of_mean(values);
    }
    return stats;
}

json bound_report_json(const BoundReport& report) {
    json j;
    j["L"] = report.params.L;
    j["lambda2"] = report.params.lambda2;
    j["d_bar"] = report.params.d_bar;
    j["N"] = report.params.N;
    j["xi"] = report.params.xi;
    j["sigma_sq"] = report.params.sigma_sq;
    j["mu_min"] = report.params.mu_min;
    j["mu_max"] = report.params.mu_max;
    j["mu_total"] = report.params.mu_total;
    j["gamma"] = report.params.gamma;
    j["a"] = report.params.a;
    j["kappa"] = report.kappa_statement;
    j["kappa_proof_variant"] = report.kappa_proof_variant;
    j["gamma_bar1"] = report.limits.gamma_bar1;
    j["gamma_bar2"] = report.limits.gamma_bar2;
    j["a_threshold"] = report.limits.a_threshold;
    j["eta"] = report.eta;
    j["eta_tilde"] = report.eta_tilde;
    j["eta_zero_gamma"] = report.eta_zero_gamma;
    j["ticks"] = report.ticks;
    j["loss0"] = report.loss0;
    j["vbar0"] = report.vbar0;
    auto value_or_null = [](bool ok, double v) { return ok ? json(v) : json(nullptr); };
    j["theorem1_applicable"] = report.theorem1_applicable;
    j["theorem1_bound"] = value_or_null(report.theorem1_applicable, report.theorem1_value);
    j["nr_asymptote"] = value_or_null(report.theorem1_applicable, report.nr_asymptote);
    j["corollary1_applicable"] = report.corollary1_applicable;
    j["corollary1_bound"] = value_or_null(report.corollary1_applicable, report.corollary1_value);
    j["vbar_asymptote"] = value_or_null(report.corollary1_applicable, report.vbar_asymptote);
    j["prop1_applicable"] = report.prop1_applicable;
    j["prop1_bound"] = value_or_null(report.prop1_applicable, report.prop1_value);
    j["fl_asymptote"] = value_or_null(report.prop1_applicable, report.fl_asymptote);
    return j;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

RunSummary summarize_and_write(const ExperimentConfig& config, SchemeChoice scheme,
                               const std::vector<TrialOutput>& outputs,
                               const std::string& out_dir, double wall_seconds) {
    fs::create_directories(out_dir);
    const std::string resolved = resolved_config_json(config);
    {
        std::ofstream cfg_out(out_dir + "/config.json", std::ios::binary);
        cfg_out << resolved;
    }
    for (const auto& output : outputs)
        write_metrics_csv(out_dir + "/trial_" + std::to_string(output.summary.index) + ".csv",
                          output.metrics);
    write_aggregate_csv(out_dir + "/aggregate.csv", outputs, config.percentile_band);

    const BuiltExperiment built = build_experiment(config);
    {
        std::ofstream graph_out(out_dir + "/graph.txt", std::ios::binary);
        write_edge_list(built.graph, graph_out);
    }
    if (config.export_traces) {
        for (const auto& output : outputs) {
            const TrialSeeds seeds = trial_seeds(config.seed, output.summary.index);
            const EventTrace trace =
                config.horizon > 0.0
                    ? sample_trace_until(built.rates, config.horizon, seeds.trace)
                    : sample_trace(built.rates, config.ticks, seeds.trace);
            std::ofstream trace_out(
                out_dir + "/trace_" + std::to_string(output.summary.index) + ".csv",
                std::ios::binary);
            write_trace_csv(trace, trace_out);
        }
    }

    RunSummary summary;
    summary.scheme = scheme == SchemeChoice::NR ? "nr" : "fl";
    summary.hash = git_blob_sha1(resolved);
    summary.trials = static_cast<int>(outputs.size());
    for (const auto& output : outputs) {
        summary.trial_summaries.push_back(output.summary);
        if (output.summary.diverged) ++summary.diverged;
    }
    summary.avg_grad_norm_sq = aggregate_of(outputs, &TrialSummary::avg_grad_norm_sq);
    summary.avg_vbar = aggregate_of(outputs, &TrialSummary::avg_vbar);
    summary.grad_norm_sq_plateau = aggregate_of(outputs, &TrialSummary::grad_norm_sq_plateau);
    summary.loss_plateau = aggregate_of(outputs, &TrialSummary::loss_plateau);
    summary.final_loss = aggregate_of(outputs, &TrialSummary::final_loss);
    summary.wall_seconds = wall_seconds;

    // bound report at the mean observed initial conditions
    const auto loss0 = aggregate_of(outputs, &TrialSummary::loss0).mean;
    const auto vbar0 = aggregate_of(outputs, &TrialSummary::vbar0).mean;
    std::int64_t ticks = config.ticks;
    if (config.horizon > 0.0) {
        double total = 0.0;
        int alive = 0;
        for (const auto& o : outputs)
            if (!o.summary.diverged) {
                total += static_cast<double>(o.summary.ticks);
                ++alive;
            }
        ticks = alive > 0 ? static_cast<std::int64_t>(total / alive) : 1;
    }
    if (ticks >= 1) {
        const BoundParams bp =
            derive_bound_params(built.model, built.noise, built.spectrum, built.rates, built.hyper);
        summary.bounds = make_bound_report(bp, built.rates, built.noise.sigma, loss0, vbar0, ticks);
    }

    json j;
    j["schema_version"] = 1;
    j["config"] = json::parse(resolved);
    j["config_hash"] = summary.hash;
    j["scheme"] = summary.scheme;
    j["trials"] = json::array();
    for (const auto& trial : summary.trial_summaries) {
        json t;
        t["index"] = trial.index;
        t["seed"] = trial.seed;
        t["diverged"] = trial.diverged;
        if (trial.diverged) t["diverged_at"] = trial.diverged_at;
        t["ticks"] = trial.ticks;
        t["loss0"] = finite_or_null(trial.loss0);
        t["vbar0"] = finite_or_null(trial.vbar0);
        t["final_loss"] = finite_or_null(trial.final_loss);
        t["final_grad_norm_sq"] = finite_or_null(trial.final_grad_norm_sq);
        t["final_vbar"] = finite_or_null(trial.final_vbar);
        t["avg_grad_norm_sq"] = finite_or_null(trial.avg_grad_norm_sq);
        t["avg_vbar"] = finite_or_null(trial.avg_vbar);
        t["loss_plateau"] = finite_or_null(trial.loss_plateau);
        t["grad_norm_sq_plateau"] = finite_or_null(trial.grad_norm_sq_plateau);
        t["vbar_plateau"] = finite_or_null(trial.vbar_plateau);
        j["trials"].push_back(t);
    }
    j["diverged_trials"] = summary.diverged;
    json agg;
    auto agg_json = [](const AggregateStats& s) {
        return json{{"mean", s.mean}, {"stderr", s.stderr_mean}};
    };
    agg["avg_grad_norm_sq"] = agg_json(summary.avg_grad_norm_sq);
    agg["avg_vbar"] = agg_json(summary.avg_vbar);
    agg["grad_norm_sq_plateau"] = agg_json(summary.grad_norm_sq_plateau);
    agg["loss_plateau"] = agg_json(summary.loss_plateau);
    agg["final_loss"] = agg_json(summary.final_loss);
    j["aggregate"] = agg;
    j["bounds"] = summary.bounds ? bound_report_json(*summary.bounds) : json(nullptr);
    j["wall_clock_seconds"] = wall_seconds;
    std::ofstream summary_out(out_dir + "/summary.json", std::ios::binary);
    summary_out << j.dump(2) << '\n';
    return summary;
}

} // namespace

RunSummary cmd_run(const ExperimentConfig& config) {
    if (config.scheme == SchemeChoice::Both)
        throw ConfigError("run: scheme 'both' is for the compare command");
    const auto start = std::chrono::steady_clock::now();
    const auto outputs = run_trials(config, config.scheme);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return summarize_and_write(config, config.scheme, outputs, config.out_dir, wall);
}

CompareSummary cmd_compare(const ExperimentConfig& config) {
    CompareSummary compare;
    for (const SchemeChoice scheme : {SchemeChoice::NR, SchemeChoice::FL}) {
        ExperimentConfig sub = config;
        sub.scheme = scheme;
        sub.out_dir = config.out_dir + (scheme == SchemeChoice::NR ? "/nr" : "/fl");
        const auto start = std::chrono::steady_clock::now();
        const auto outputs = run_trials(sub, scheme);
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        auto summary = summarize_and_write(sub, scheme, outputs, sub.out_dir, wall);
        (scheme == SchemeChoice::NR ? compare.nr : compare.fl) = std::move(summary);
    }
    compare.plateau_ratio = compare.nr.grad_norm_sq_plateau.mean /
                            compare.fl.grad_norm_sq_plateau.mean;
    json j;
    j["nr"] = {{"grad_norm_sq_plateau", compare.nr.grad_norm_sq_plateau.mean},
               {"grad_norm_sq_plateau_stderr", compare.nr.grad_norm_sq_plateau.stderr_mean},
               {"loss_plateau", compare.nr.loss_plateau.mean},
               {"loss_plateau_stderr", compare.nr.loss_plateau.stderr_mean},
               {"diverged_trials", compare.nr.diverged}};
    j["fl"] = {{"grad_norm_sq_plateau", compare.fl.grad_norm_sq_plateau.mean},
               {"grad_norm_sq_plateau_stderr", compare.fl.grad_norm_sq_plateau.stderr_mean},
               {"loss_plateau", compare.fl.loss_plateau.mean},
               {"loss_plateau_stderr", compare.fl.loss_plateau.stderr_mean},
               {"diverged_trials", compare.fl.diverged}};
    j["nr_over_fl_grad_plateau_ratio"] = finite_or_null(compare.plateau_ratio);
    fs::create_directories(config.out_dir);
    std::ofstream out(config.out_dir + "/compare.json", std::ios::binary);
    out << j.dump(2) << '\n';
    return compare;
}

SweepSummary cmd_sweep(const ExperimentConfig& config) {
    if (!config.sweep) throw ConfigError("sweep: config has no sweep section");
    const SweepSpec& sweep = *config.sweep;
    SweepSummary summary;
    summary.axis = sweep.axis;

    auto run_value = [&](const std::string& label, double value, ExperimentConfig sub) {
        sub.sweep.reset();
        sub.out_dir = config.out_dir + "/" + label;
        SweepEntry entry;
        entry.label = label;
        entry.value = value;
        entry.run = cmd_run(sub);
        summary.entries.push_back(std::move(entry));
    };

    if (sweep.axis == "topology") {
        for (const auto& topo : sweep.topologies) {
            ExperimentConfig sub = config;
            sub.topology = topo;
            const std::string label =
                topo.kind == "complete" ? "complete" : topo.kind + "_k" + std::to_string(topo.k);
            run_value(label, static_cast<double>(topo.k), std::move(sub));
        }
    } else {
        for (const double value : sweep.values) {
            ExperimentConfig sub = config;
            std::string label;
            if (sweep.axis == "a") {
                sub.hyper.a = value;
                label = "a_" + format_double(value);
            } else if (sweep.axis == "gamma") {
                sub.hyper.gamma = value;
                label = "gamma_" + format_double(value);
            } else { // N
                if (config.rates.size() != 1 || config.noise.sigma.size() != 1 ||
                    (!config.noise.batch.empty() && config.noise.batch.size() != 1))
                    throw ConfigError("sweep N: rates/sigma/batch must be scalars to rescale");
                sub.nodes = static_cast<int>(value);
                sub.hyper.gamma = sweep.gamma_c / value;
                if (sweep.scale_ticks_quadratically) {
                    const double scale = value / sweep.values.front();
                    sub.ticks = static_cast<std::int64_t>(
                        std::llround(static_cast<double>(config.ticks) * scale * scale));
                    // keep the recorded row count constant across N
                    sub.thin = std::max(1, static_cast<int>(std::llround(
                                               static_cast<double>(config.thin) * scale * scale)));
                }
                label = "n_" + std::to_string(static_cast<int>(value));
            }
            run_value(label, value, std::move(sub));
        }
    }

    if (sweep.axis == "N") {
        std::vector<double> log_n, log_plateau;
        for (const auto& entry : summary.entries) {
            if (entry.run.grad_norm_sq_plateau.mean > 0.0) {
                log_n.push_back(std::log(entry.value));
                log_plateau.push_back(std::log(entry.run.grad_norm_sq_plateau.mean));
            }
        }
        if (log_n.size() >= 2) summary.fitted_slope = linear_fit(log_n, log_plateau).slope;
    }

    json j;
    j["axis"] = summary.axis;
    j["entries"] = json::array();
    std::ofstream csv(config.out_dir + "/sweep.csv", std::ios::binary);
    csv << "label,value,grad_norm_sq_plateau_mean,grad_norm_sq_plateau_stderr,"
           "avg_vbar_mean,avg_vbar_stderr,loss_plateau_mean,diverged\n";
    for (const auto& entry : summary.entries) {
        json e;
        e["label"] = entry.label;
        e["value"] = entry.value;
        e["grad_norm_sq_plateau"] = finite_or_null(entry.run.grad_norm_sq_plateau.mean);
        e["grad_norm_sq_plateau_stderr"] = finite_or_null(entry.run.grad_norm_sq_plateau.stderr_mean);
        e["avg_vbar"] = finite_or_null(entry.run.avg_vbar.mean);
        e["loss_plateau"] = finite_or_null(entry.run.loss_plateau.mean);
        e["diverged_trials"] = entry.run.diverged;
        j["entries"].push_back(e);
        csv << entry.label << ',' << format_double(entry.value) << ','
            << format_double(entry.run.grad_norm_sq_plateau.mean) << ','
            << format_double(entry.run.grad_norm_sq_plateau.stderr_mean) << ','
            << format_double(entry.run.avg_vbar.mean) << ','
            << format_double(entry.run.avg_vbar.stderr_mean) << ','
            << format_double(entry.run.loss_plateau.mean) << ',' << entry.run.diverged << '\n';
    }
    if (sweep.axis == "N") j["fitted_slope"] = summary.fitted_slope;
    std::ofstream out(config.out_dir + "/sweep.json", std::ios::binary);
    out << j.dump(2) << '\n';
    return summary;
}

BoundReport cmd_check(const ExperimentConfig& config, std::ostream& out) {
    const BuiltExperiment built = build_experiment(config);
    const BoundParams bp =
        derive_bound_params(built.model, built.noise, built.spectrum, built.rates, built.hyper);
    const double loss0 = loss_eval(built.model, built.theta0);
    const double p = static_cast<double>(built.model.dim);
    const double n = static_cast<double>(built.graph.n);
    const double vbar0 = config.init.mode == InitMode::Equal
                             ? 0.0
                             : config.init.spread * config.init.spread * p * (n - 1.0) / n;
    std::int64_t ticks = config.ticks;
    if (config.horizon > 0.0)
        ticks = std::max<std::int64_t>(1, std::llround(built.rates.total * config.horizon));
    const BoundReport report =
        make_bound_report(bp, built.rates, built.noise.sigma, loss0, vbar0, ticks);

    out << "derived constants\n"
        << "  L = " << bp.L << "  lambda2 = " << bp.lambda2 << "  d_bar = " << bp.d_bar
        << "  N = " << bp.N << '\n'
        << "  xi = " << bp.xi << "  sigma_sq = " << bp.sigma_sq << "  mu = [" << bp.mu_min
        << ", " << bp.mu_max << "], total " << bp.mu_total << '\n'
        << "  gamma = " << bp.gamma << "  a = " << bp.a << '\n'
        << "  kappa = " << report.kappa_statement
        << "  (proof-step variant: " << report.kappa_proof_variant << ")\n"
        << "  gamma_bar1 = " << report.limits.gamma_bar1
        << "  gamma_bar2 = " << report.limits.gamma_bar2
        << "  a_threshold = " << report.limits.a_threshold << '\n'
        << "  eta = " << report.eta << "  (positive up to gamma = " << report.eta_zero_gamma
        << "; gamma_bar2 is the stricter printed condition)\n"
        << "  eta_tilde = " << report.eta_tilde << '\n';
    out << "expected initial conditions: loss0 = " << report.loss0
        << "  vbar0 = " << report.vbar0 << "  horizon ticks = " << report.ticks << '\n';
    if (report.theorem1_applicable) {
        out << "Theorem 1: applicable; bound = " << report.theorem1_value
            << ", asymptote = " << report.nr_asymptote << '\n';
    } else {
        out << "Theorem 1: inapplicable (need a > " << report.limits.a_threshold
            << " and gamma < min(" << report.limits.gamma_bar1 << ", "
            << report.limits.gamma_bar2 << "))\n";
    }
    if (report.corollary1_applicable) {
        out << "Corollary 1: applicable; bound = " << report.corollary1_value
            << ", asymptote = " << report.vbar_asymptote << '\n';
    } else {
        out << "Corollary 1: inapplicable (needs Theorem 1 and kappa < 0; kappa = "
            << report.kappa_statement << ")\n";
    }
    if (report.prop1_applicable) {
        out << "Proposition 1: applicable; bound = " << report.prop1_value
            << ", asymptote = " << report.fl_asymptote << '\n';
    } else {
        out << "Proposition 1: inapplicable (need gamma in (0, " << 2.0 / bp.L << "))\n";
    }
    return report;
}

void cmd_plot(const std::vector<std::string>& inputs, const std::vector<std::string>& labels,
              const std::string& metric, const std::string& x_axis, bool log_y,
              const std::string& out_path, std::ostream& diagnostics) {
    if (inputs.empty()) throw ConfigError("plot: need at least one input");
    if (!labels.empty() && labels.size() != inputs.size())
        throw ConfigError("plot: labels must match inputs");
    static const std::set<std::string> metrics = {"vbar", "grad_norm_sq", "loss",
                                                  "running_avg_grad_norm_sq",
                                                  "running_avg_vbar"};
    if (!metrics.count(metric)) throw ConfigError("plot: unknown metric '" + metric + "'");
    if (x_axis != "k" && x_axis != "t") throw ConfigError("plot: x must be k or t");

    std::vector<PlotSeries> series;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        std::string path = inputs[i];
        if (fs::is_directory(path)) path += "/aggregate.csv";
        const CsvTable table = read_csv(path);
        PlotSeries s;
        s.label = !labels.empty() ? labels[i]
                                  : fs::path(path).parent_path().filename().string();
        if (s.label.empty()) s.label = "series " + std::to_string(i);
        s.x = table.column(x_axis == "k" ? "k" : "t_mean");
        s.y = table.column(metric + "_mean");
        const int se_col = table.column_index(metric + "_stderr");
        if (se_col >= 0) {
            const auto se = table.column(metric + "_stderr");
            s.band_lo.resize(se.size());
            s.band_hi.resize(se.size());
            for (std::size_t r = 0; r < se.size(); ++r) {
                s.band_lo[r] = s.y[r] - se[r];
                s.band_hi[r] = s.y[r] + se[r];
            }
        }
        series.push_back(std::move(s));
    }
    PlotSpec spec;
    spec.title = metric;
    spec.xlabel = x_axis == "k" ? "tick" : "time";
    spec.ylabel = metric;
    spec.log_y = log_y;
    const PlotResult result = render_line_plot(spec, series);
    for (const auto& warning : result.warnings) diagnostics << "warning: " << warning << '\n';
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw ConfigError("plot: cannot write '" + out_path + "'");
    out << result.svg;
}

} // namespace nrlearn
