#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nrlearn/errors.hpp"
#include "nrlearn/experiment.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir;
    int workers = 0;
    int thin = 0;
    bool export_traces = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "experiment config (JSON)")->required();
    cmd->add_option("--seed", flags.seed, "override the master seed")
        ->each([&](const std::string&) { flags.seed_set = true; });
    cmd->add_option("--out", flags.out_dir, "override the output directory");
    cmd->add_option("--workers", flags.workers, "concurrent trials");
    cmd->add_option("--thin", flags.thin, "record every m-th tick");
    cmd->add_flag("--export-traces", flags.export_traces, "also write trace_<i>.csv audit files");
}

nrlearn::ExperimentConfig load_with_overrides(const CommonFlags& flags) {
    nrlearn::ExperimentConfig config = nrlearn::load_config(flags.config_path);
    if (flags.seed_set) config.seed = flags.seed;
    if (!flags.out_dir.empty()) config.out_dir = flags.out_dir;
    if (flags.workers > 0) config.workers = flags.workers;
    if (flags.thin > 0) config.thin = flags.thin;
    if (flags.export_traces) config.export_traces = true;
    return config;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"event-driven simulator for networked real-time learning"};
    app.require_subcommand(1);

    CommonFlags run_flags, compare_flags, sweep_flags, check_flags;
    auto* run_cmd = app.add_subcommand("run", "run one scheme and write CSV/JSON artifacts");
    add_common(run_cmd, run_flags);
    auto* compare_cmd =
        app.add_subcommand("compare", "run NR and FL on identical traces and compare");
    add_common(compare_cmd, compare_flags);
    auto* sweep_cmd = app.add_subcommand("sweep", "run the configured parameter sweep");
    add_common(sweep_cmd, sweep_flags);
    auto* check_cmd =
        app.add_subcommand("check", "evaluate bound preconditions and constants, no simulation");
    add_common(check_cmd, check_flags);

    std::vector<std::string> plot_inputs, plot_labels;
    std::string plot_metric = "loss", plot_x = "k", plot_out = "plot.svg";
    bool plot_linear = false;
    auto* plot_cmd = app.add_subcommand("plot", "render aggregate.csv curves into an SVG");
    plot_cmd->add_option("--in", plot_inputs, "aggregate.csv files or run directories")
        ->required();
    plot_cmd->add_option("--label", plot_labels, "legend labels (one per input)");
    plot_cmd->add_option("--metric", plot_metric,
                         "vbar|grad_norm_sq|loss|running_avg_grad_norm_sq|running_avg_vbar");
    plot_cmd->add_option("--x", plot_x, "x axis: k or t");
    plot_cmd->add_option("--out", plot_out, "output SVG path");
    plot_cmd->add_flag("--linear", plot_linear, "linear y axis (default: log scale)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            const auto config = load_with_overrides(run_flags);
            const auto summary = nrlearn::cmd_run(config);
            std::cout << "scheme " << summary.scheme << ": " << summary.trials << " trials, "
                      << summary.diverged << " diverged\n"
                      << "  time-avg ||grad||^2: " << summary.avg_grad_norm_sq.mean << " +- "
                      << summary.avg_grad_norm_sq.stderr_mean << '\n'
                      << "  time-avg vbar:       " << summary.avg_vbar.mean << " +- "
                      << summary.avg_vbar.stderr_mean << '\n'
                      << "  artifacts in " << config.out_dir << '\n';
            if (summary.diverged == summary.trials) {
                std::cerr << "all trials diverged\n";
                return 3;
            }
        } else if (compare_cmd->parsed()) {
            const auto config = load_with_overrides(compare_flags);
            const auto compare = nrlearn::cmd_compare(config);
            std::cout << "NR grad plateau: " << compare.nr.grad_norm_sq_plateau.mean << " +- "
                      << compare.nr.grad_norm_sq_plateau.stderr_mean << " ("
                      << compare.nr.diverged << " diverged)\n"
                      << "FL grad plateau: " << compare.fl.grad_norm_sq_plateau.mean << " +- "
                      << compare.fl.grad_norm_sq_plateau.stderr_mean << " ("
                      << compare.fl.diverged << " diverged)\n"
                      << "NR/FL ratio: " << compare.plateau_ratio << '\n'
                      << "artifacts in " << config.out_dir << '\n';
            if (compare.nr.diverged == compare.nr.trials &&
                compare.fl.diverged == compare.fl.trials) {
                std::cerr << "all trials diverged\n";
                return 3;
            }
        } else if (sweep_cmd->parsed()) {
            const auto config = load_with_overrides(sweep_flags);
            const auto sweep = nrlearn::cmd_sweep(config);
            std::cout << "sweep over " << sweep.axis << ":\n";
            for (const auto& entry : sweep.entries)
                std::cout << "  " << entry.label
                          << ": grad plateau = " << entry.run.grad_norm_sq_plateau.mean
                          << ", avg vbar = " << entry.run.avg_vbar.mean << " ("
                          << entry.run.diverged << " diverged)\n";
            if (sweep.axis == "N") std::cout << "fitted slope: " << sweep.fitted_slope << '\n';
            std::cout << "artifacts in " << config.out_dir << '\n';
        } else if (check_cmd->parsed()) {
            const auto config = load_with_overrides(check_flags);
            nrlearn::cmd_check(config, std::cout);
        } else if (plot_cmd->parsed()) {
            nrlearn::cmd_plot(plot_inputs, plot_labels, plot_metric, plot_x, !plot_linear,
                              plot_out, std::cerr);
            std::cout << "wrote " << plot_out << '\n';
        }
    } catch (const nrlearn::ConfigError& err) {
        std::cerr << "config error: " << err.what() << '\n';
        return 1;
    } catch (const nrlearn::DivergenceError& err) {
        std::cerr << "numerical error: " << err.what() << '\n';
        return 2;
    } catch (const nrlearn::NumericalError& err) {
        std::cerr << "numerical error: " << err.what() << '\n';
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    }
    return 0;
}
