#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nrlearn/errors.hpp"
#include "nrlearn/experiment.hpp"
#include "xml_check.hpp"

using namespace nrlearn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("nrlearn_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// small, fast NR experiment used by several cases
std::string smoke_config_text() {
    return R"({
      "scheme": "nr",
      "model": {"kind": "quadratic", "p": 3, "spectrum": [0.5, 1.0]},
      "noise": {"kind": "gaussian", "sigma": 0.5},
      "rates": 1.0,
      "nodes": 3,
      "topology": {"kind": "complete"},
      "hyper": {"gamma": 0.05, "a": 2.0},
      "ticks": 300,
      "trials": 3,
      "seed": 321,
      "init": {"mode": "spread", "theta0": 0.0, "spread": 1.0}
    })";
}

} // namespace

TEST_CASE("config parsing: defaults, errors, hash stability") {
    const auto config = parse_config_text(smoke_config_text());
    CHECK(config.nodes == 3);
    CHECK(config.model.dim == 3);
    CHECK(config.hyper.gamma == 0.05);
    CHECK(config.thin == 1);

    CHECK_THROWS_AS(parse_config_text("{ not json"), ConfigError);
    CHECK_THROWS_AS(parse_config_text(R"({"bogus_key": 1})"), ConfigError);
    CHECK_THROWS_AS(parse_config_text(R"({"trials": 0})"), ConfigError);
    CHECK_THROWS_AS(parse_config_text(R"({"hyper": {"gamma": -1}})"), ConfigError);
    CHECK_THROWS_AS(parse_config_text(R"({"scheme": "nrfl"})"), ConfigError);
    CHECK_THROWS_AS(parse_config_text(R"({"noise": {"kind": "minibatch"}})"), ConfigError);

    // hash covers the resolved experiment, not where it is written
    auto a = config;
    auto b = config;
    b.out_dir = "somewhere/else";
    b.workers = 7;
    CHECK(config_hash(a) == config_hash(b));
    b.seed = 999;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("kappa variant switch parses") {
    auto config = parse_config_text(R"({"kappa_variant": "proof"})");
    CHECK(config.kappa_variant == KappaVariant::ProofStep);
    CHECK_THROWS_AS(parse_config_text(R"({"kappa_variant": "folklore"})"), ConfigError);
}

TEST_CASE("trial seeds are distinct per index and purpose") {
    const auto s0 = trial_seeds(5, 0);
    const auto s1 = trial_seeds(5, 1);
    CHECK(s0.trial != s1.trial);
    CHECK(s0.trace != s0.noise);
    CHECK(s0.noise != s0.init);
}

TEST_CASE("cmd_run writes deterministic artifacts") {
    auto config = parse_config_text(smoke_config_text());
    TempDir dir_a("run_a"), dir_b("run_b");
    config.out_dir = dir_a.str();
    const auto summary_a = cmd_run(config);
    config.out_dir = dir_b.str();
    const auto summary_b = cmd_run(config);

    CHECK(summary_a.diverged == 0);
    CHECK(slurp(dir_a.path / "aggregate.csv") == slurp(dir_b.path / "aggregate.csv"));
    CHECK(slurp(dir_a.path / "trial_0.csv") == slurp(dir_b.path / "trial_0.csv"));
    CHECK(summary_a.hash == summary_b.hash);

    const std::string expected_header =
        "k,t,node,vbar,grad_norm_sq,loss,running_avg_grad_norm_sq,running_avg_vbar\n";
    CHECK(slurp(dir_a.path / "trial_0.csv").substr(0, expected_header.size()) ==
          expected_header);
    CHECK(fs::exists(dir_a.path / "config.json"));
    CHECK(fs::exists(dir_a.path / "summary.json"));
}

TEST_CASE("seed isolation: growing the trial count keeps earlier trials byte-identical") {
    auto config = parse_config_text(smoke_config_text());
    TempDir small("iso_small"), large("iso_large");
    config.trials = 2;
    config.out_dir = small.str();
    cmd_run(config);
    config.trials = 4;
    config.out_dir = large.str();
    cmd_run(config);
    CHECK(slurp(small.path / "trial_0.csv") == slurp(large.path / "trial_0.csv"));
    CHECK(slurp(small.path / "trial_1.csv") == slurp(large.path / "trial_1.csv"));
}

TEST_CASE("worker count does not change the artifacts") {
    auto config = parse_config_text(smoke_config_text());
    TempDir serial("workers_1"), parallel("workers_4");
    config.out_dir = serial.str();
    cmd_run(config);
    config.workers = 4;
    config.out_dir = parallel.str();
    cmd_run(config);
    CHECK(slurp(serial.path / "aggregate.csv") == slurp(parallel.path / "aggregate.csv"));
}

TEST_CASE("horizon mode simulates to the first arrival past the horizon") {
    auto config = parse_config_text(smoke_config_text());
    config.horizon = 30.0; // mu_total = 3, about 90 ticks
    TempDir dir("horizon");
    config.out_dir = dir.str();
    const auto summary = cmd_run(config);
    for (const auto& trial : summary.trial_summaries) {
        CHECK(trial.ticks > 30);
        CHECK(trial.ticks < 200);
    }
}

TEST_CASE("fl divergence above the stability threshold is recorded, not fatal") {
    auto config = parse_config_text(R"({
      "scheme": "fl",
      "model": {"kind": "quadratic", "p": 2, "spectrum": [1.0, 1.0]},
      "noise": {"kind": "gaussian", "sigma": 1.0},
      "rates": [8, 1],
      "nodes": 2,
      "hyper": {"gamma": 2.5, "a": 0},
      "ticks": 3000,
      "trials": 3,
      "seed": 5,
      "init": {"mode": "spread", "theta0": 1.0, "spread": 1.0}
    })");
    TempDir dir("diverge");
    config.out_dir = dir.str();
    const auto summary = cmd_run(config);
    CHECK(summary.diverged >= 1); // gamma > 2/L on a noisy quadratic
    for (const auto& trial : summary.trial_summaries)
        if (trial.diverged) CHECK(trial.diverged_at > 0);
}

TEST_CASE("cmd_check verdicts") {
    auto config = parse_config_text(smoke_config_text());
    std::ostringstream out;

    // a far below the threshold: theorem 1 inapplicable
    config.hyper = {0.001, 0.0};
    auto report = cmd_check(config, out);
    CHECK_FALSE(report.theorem1_applicable);
    CHECK(out.str().find("Theorem 1: inapplicable") != std::string::npos);

    // gamma outside (0, 2/L): proposition 1 inapplicable
    config.hyper = {3.0, 10.0};
    std::ostringstream out2;
    report = cmd_check(config, out2);
    CHECK_FALSE(report.prop1_applicable);
    CHECK(out2.str().find("Proposition 1: inapplicable") != std::string::npos);

    // a valid setting reports all constants
    config.hyper = {0.002, 12.0};
    std::ostringstream out3;
    report = cmd_check(config, out3);
    CHECK(report.theorem1_applicable);
    CHECK(report.corollary1_applicable);
    CHECK(report.prop1_applicable);
    const auto built = build_experiment(config);
    const auto bp =
        derive_bound_params(built.model, built.noise, built.spectrum, built.rates, built.hyper);
    CHECK(report.theorem1_value ==
          doctest::Approx(theorem1_bound(bp, report.loss0, report.vbar0, report.ticks)));
}

TEST_CASE("cmd_compare runs both schemes and writes a comparison") {
    auto config = parse_config_text(smoke_config_text());
    config.scheme = SchemeChoice::Both;
    config.ticks = 400;
    TempDir dir("compare");
    config.out_dir = dir.str();
    const auto compare = cmd_compare(config);
    CHECK(fs::exists(dir.path / "nr" / "aggregate.csv"));
    CHECK(fs::exists(dir.path / "fl" / "aggregate.csv"));
    CHECK(fs::exists(dir.path / "compare.json"));
    CHECK(compare.nr.trials == 3);
    CHECK(compare.fl.trials == 3);
}

TEST_CASE("cmd_sweep over a writes per-value runs and a table") {
    auto config = parse_config_text(smoke_config_text());
    SweepSpec sweep;
    sweep.axis = "a";
    sweep.values = {1.0, 10.0};
    config.sweep = sweep;
    config.ticks = 400;
    TempDir dir("sweep");
    config.out_dir = dir.str();
    const auto summary = cmd_sweep(config);
    REQUIRE(summary.entries.size() == 2);
    CHECK(fs::exists(dir.path / "a_1" / "aggregate.csv"));
    CHECK(fs::exists(dir.path / "a_10" / "aggregate.csv"));
    CHECK(fs::exists(dir.path / "sweep.json"));
    CHECK(fs::exists(dir.path / "sweep.csv"));
}

TEST_CASE("cmd_plot renders well-formed svg from run artifacts") {
    auto config = parse_config_text(smoke_config_text());
    TempDir dir("plot");
    config.out_dir = (dir.path / "run").string();
    cmd_run(config);
    const std::string svg_path = (dir.path / "loss.svg").string();
    std::ostringstream diag;
    cmd_plot({config.out_dir}, {"nr"}, "loss", "k", true, svg_path, diag);
    const std::string svg = slurp(svg_path);
    CHECK(xml_well_formed(svg));
    CHECK(svg.find(">nr</text>") != std::string::npos);
    CHECK_THROWS_AS(
        cmd_plot({config.out_dir}, {}, "nonsense", "k", true, svg_path, diag), ConfigError);
}

TEST_CASE("minibatch noise config builds with table-1 batch asymmetry") {
    auto config = parse_config_text(R"({
      "scheme": "nr",
      "model": {"kind": "quadratic", "p": 4},
      "noise": {"kind": "minibatch", "batch": [1, 64, 64, 64, 64], "sample_sigma": 8.0},
      "rates": [8, 1, 1, 1, 1],
      "nodes": 5,
      "ticks": 50,
      "trials": 1,
      "seed": 2
    })");
    const auto built = build_experiment(config);
    CHECK(built.noise.kind == NoiseKind::Minibatch);
    CHECK(built.noise.sigma[0] / built.noise.sigma[1] == doctest::Approx(8.0));
    TempDir dir("minibatch");
    config.out_dir = dir.str();
    const auto summary = cmd_run(config);
    CHECK(summary.diverged == 0);
}

TEST_CASE("percentile band and trace export artifacts") {
    auto config = parse_config_text(smoke_config_text());
    config.percentile_band = true;
    config.export_traces = true;
    TempDir dir("extras");
    config.out_dir = dir.str();
    cmd_run(config);
    const std::string aggregate = slurp(dir.path / "aggregate.csv");
    CHECK(aggregate.find("loss_p2_5") != std::string::npos);
    CHECK(aggregate.find("grad_norm_sq_p97_5") != std::string::npos);
    CHECK(fs::exists(dir.path / "trace_0.csv"));
    CHECK(fs::exists(dir.path / "graph.txt"));
    const std::string trace = slurp(dir.path / "trace_0.csv");
    CHECK(trace.substr(0, 9) == "k,t,node\n");
    // K_3 has three edges
    CHECK(slurp(dir.path / "graph.txt") == "0 1\n0 2\n1 2\n");
}

TEST_CASE("smoke: one trial, ten ticks, ten metric rows") {
    auto config = parse_config_text(smoke_config_text());
    config.trials = 1;
    config.ticks = 10;
    TempDir dir("tiny");
    config.out_dir = dir.str();
    cmd_run(config);
    const std::string csv = slurp(dir.path / "trial_0.csv");
    int rows = -1; // header
    for (const char c : csv) rows += c == '\n' ? 1 : 0;
    CHECK(rows == 10);
    CHECK(fs::exists(dir.path / "summary.json"));
}

TEST_CASE("zero noise: both schemes converge to a vanishing plateau") {
    auto config = parse_config_text(smoke_config_text());
    config.noise.sigma = {0.0};
    config.ticks = 3000;
    config.hyper = {0.05, 2.0};
    config.scheme = SchemeChoice::Both;
    TempDir dir("zero_noise");
    config.out_dir = dir.str();
    const auto compare = cmd_compare(config);
    CHECK(compare.nr.diverged == 0);
    CHECK(compare.fl.diverged == 0);
    CHECK(compare.nr.grad_norm_sq_plateau.mean < 1e-12);
    CHECK(compare.fl.grad_norm_sq_plateau.mean < 1e-12);
}

TEST_CASE("horizon mode aggregates only aligned ticks") {
    auto config = parse_config_text(smoke_config_text());
    config.horizon = 40.0;
    config.thin = 5;
    TempDir dir("horizon_agg");
    config.out_dir = dir.str();
    cmd_run(config);
    const std::string csv = slurp(dir.path / "aggregate.csv");
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line); // header
    long prev_k = 0;
    int rows = 0;
    while (std::getline(in, line)) {
        const long k = std::stol(line.substr(0, line.find(',')));
        CHECK(k == prev_k + 5);
        prev_k = k;
        ++rows;
    }
    CHECK(rows > 5);
}

TEST_CASE("gamma sweep smoke") {
    auto config = parse_config_text(smoke_config_text());
    SweepSpec sweep;
    sweep.axis = "gamma";
    sweep.values = {0.02, 0.05};
    config.sweep = sweep;
    config.ticks = 200;
    TempDir dir("gsweep");
    config.out_dir = dir.str();
    const auto summary = cmd_sweep(config);
    REQUIRE(summary.entries.size() == 2);
    CHECK(fs::exists(dir.path / "gamma_0.02" / "aggregate.csv"));
    CHECK(fs::exists(dir.path / "gamma_0.05" / "aggregate.csv"));
}

TEST_CASE("resolved config embeds in summary.json with its hash") {
    auto config = parse_config_text(smoke_config_text());
    TempDir dir("summary");
    config.out_dir = dir.str();
    const auto summary = cmd_run(config);
    const std::string text = slurp(dir.path / "summary.json");
    CHECK(text.find("\"config_hash\": \"" + summary.hash + "\"") != std::string::npos);
    CHECK(text.find("\"schema_version\"") != std::string::npos);
    CHECK(text.find("\"bounds\"") != std::string::npos);
    CHECK(text.find("\"wall_clock_seconds\"") != std::string::npos);
}
