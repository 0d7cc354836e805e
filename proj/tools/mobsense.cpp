// mobsense: plan sensor trajectories, run filters and sweeps from JSON configs.
//
// Exit codes: 0 success, 1 verification mismatch, 2 config error,
// 3 numerical failure, 4 infeasible plan.

#include "mobsense/cli/config.hpp"
#include "mobsense/cli/fixtures.hpp"
#include "mobsense/cli/plots.hpp"
#include "mobsense/cli/runner.hpp"
#include "mobsense/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace mobsense;

int exit_code(Error::Category c) {
    switch (c) {
        case Error::Category::numerical: return 3;
        case Error::Category::infeasible: return 4;
        default: return 2;
    }
}

int report(const cli::RunManifest& m) {
    int code = 0;
    for (const auto& p : m.points) {
        if (p.ok) {
            std::cout << p.point.id << " [" << p.point.key << "] ok  cond=" << io::fmt(p.condition);
            if (std::isfinite(p.steady_mse)) std::cout << "  trace=" << io::fmt(p.limiting_trace) << "  mse=" << io::fmt(p.steady_mse);
            std::cout << "\n";
        } else {
            std::cerr << p.point.id << " [" << p.point.key << "] failed: " << p.error << "\n";
            if (code == 0) code = exit_code(p.error_category);
        }
    }
    std::cout << "wrote " << (m.root / "manifest.json").string() << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mobile sensor trajectory planning and Kalman-filter evaluation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(MOBSENSE_VERSION));

    std::string config_path, run_dir, trajectory_path, fixtures_dir;
    std::optional<std::string> output_dir;
    std::optional<long> workers;
    bool plan_report = false;

    auto add_run_options = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("-o,--output-dir", output_dir, "output directory (overrides config and MOBSENSE_OUTPUT_DIR)");
        sub->add_option("-j,--workers", workers, "worker threads (overrides config and MOBSENSE_WORKERS)");
        sub->add_flag("--plan-report", plan_report, "write per-step greedy selection records to plan_report.csv");
    };
    auto* plan_cmd = app.add_subcommand("plan", "plan trajectories only");
    add_run_options(plan_cmd);
    auto* filter_cmd = app.add_subcommand("filter", "plan (or load) a trajectory and run the Kalman filter");
    add_run_options(filter_cmd);
    filter_cmd->add_option("--trajectory", trajectory_path, "use this trajectory.json instead of planning")
        ->check(CLI::ExistingFile);
    auto* sweep_cmd = app.add_subcommand("sweep", "run every point of the config's sweep grid");
    add_run_options(sweep_cmd);
    auto* plot_cmd = app.add_subcommand("plot", "render SVG plots for a run directory");
    plot_cmd->add_option("run_dir", run_dir, "directory containing manifest.json")->required()->check(CLI::ExistingDirectory);
    auto* verify_cmd = app.add_subcommand("verify", "re-hash the files listed in a run manifest");
    verify_cmd->add_option("run_dir", run_dir, "directory containing manifest.json")->required()->check(CLI::ExistingDirectory);
    auto* fixtures_cmd = app.add_subcommand("fixtures", "write the desk-scale fixture configs");
    fixtures_cmd->add_option("dir", fixtures_dir, "destination directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        cli::RunOptions opts;
        if (output_dir) opts.output_dir = *output_dir;
        if (workers) opts.workers = *workers;
        opts.plan_report = plan_report;

        if (plan_cmd->parsed() || filter_cmd->parsed() || sweep_cmd->parsed()) {
            const cli::ExperimentConfig cfg = cli::load_config(config_path);
            if (sweep_cmd->parsed() && !cfg.sweep) throw ConfigError("config has no sweep block; use 'filter'");
            if (filter_cmd->parsed() && cfg.sweep) throw ConfigError("config has a sweep block; use 'sweep'");
            opts.plan_only = plan_cmd->parsed();
            if (!trajectory_path.empty()) opts.trajectory = io::trajectory_from_json(nlohmann::json::parse(io::read_text(trajectory_path)));
            return report(cli::run_experiment(cfg, opts));
        }
        if (plot_cmd->parsed()) {
            for (const auto& f : cli::emit_plots(run_dir)) std::cout << (std::filesystem::path(run_dir) / f).string() << "\n";
            return 0;
        }
        if (verify_cmd->parsed()) {
            const auto problems = cli::verify_manifest(run_dir);
            for (const auto& p : problems) std::cerr << p << "\n";
            std::cout << (problems.empty() ? "ok" : "MISMATCH") << "\n";
            return problems.empty() ? 0 : 1;
        }
        if (fixtures_cmd->parsed()) {
            for (const auto& f : cli::write_fixtures(fixtures_dir)) std::cout << f.string() << "\n";
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.category());
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
