#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "pdiff/config.hpp"
#include "pdiff/error.hpp"
#include "pdiff/runner.hpp"

namespace {

struct ConfigArgs {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;  // in CLI order
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("--config", args.config_path, "flat key = value config file");
    for (const std::string& key : pdiff::known_config_keys()) {
        cmd->add_option_function<std::string>(
               "--" + key,
               [&args, key](const std::string& value) { args.overrides.emplace_back(key, value); },
               "set " + key)
            ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
}

void write_drop_curve_csv(const std::vector<pdiff::DropCurvePoint>& curve,
                          const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) pdiff::fail(pdiff::ErrorCategory::io, "cannot write " + path);
    out << "drop_rate,real_noise_rate,dropped_count\n";
    for (const auto& pt : curve)
        out << pdiff::format_double(pt.rate) << ',' << pdiff::format_double(pt.real_noise_rate)
            << ',' << pt.dropped_count << '\n';
    if (!out) pdiff::fail(pdiff::ErrorCategory::io, "write failed: " + path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"noisy-label training laboratory"};
    app.require_subcommand(1);

    ConfigArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "execute one training run");
    add_config_options(run_cmd, run_args);
    run_cmd->callback([&] {
        const pdiff::RunConfig cfg = pdiff::parse_config(run_args.config_path,
                                                         run_args.overrides);
        const pdiff::RunSummary summary = pdiff::run(cfg);
        std::cout << pdiff::summary_to_json(summary) << '\n';
    });

    ConfigArgs curve_args;
    int probe_epoch = 1;
    std::string strategy = "delta";
    auto* curve_cmd =
        app.add_subcommand("drop-curve", "drop-rate vs real-noise-rate curve at a probe point");
    add_config_options(curve_cmd, curve_args);
    curve_cmd->add_option("--probe-epoch", probe_epoch,
                          "full epochs of normal training before probing");
    curve_cmd->add_option("--strategy", strategy, "statistic: delta or py");
    curve_cmd->callback([&] {
        // mode is irrelevant here (training is always normal); default it
        std::vector<std::pair<std::string, std::string>> overrides{{"mode", "normal"}};
        overrides.insert(overrides.end(), curve_args.overrides.begin(),
                         curve_args.overrides.end());
        const pdiff::RunConfig cfg = pdiff::parse_config(curve_args.config_path, overrides);
        const pdiff::Statistic stat = pdiff::parse_statistic(strategy);
        const auto curve = pdiff::drop_curve(cfg, probe_epoch, stat);

        std::filesystem::create_directories(cfg.output_dir);
        const auto csv_path = std::filesystem::path(cfg.output_dir) /
                              ("drop_curve_" + strategy + ".csv");
        write_drop_curve_csv(curve, csv_path.string());

        std::cout << std::left << std::setw(12) << "drop_rate" << std::right << std::setw(18)
                  << "real_noise_rate" << std::setw(10) << "dropped" << '\n';
        for (const auto& pt : curve)
            std::cout << std::left << std::fixed << std::setprecision(2) << std::setw(12)
                      << pt.rate << std::right << std::setprecision(4) << std::setw(18)
                      << pt.real_noise_rate << std::setw(10) << pt.dropped_count << '\n';
    });

    std::string metrics_path;
    auto* summarize_cmd = app.add_subcommand("summarize", "summary of a finished metrics file");
    summarize_cmd->add_option("metrics", metrics_path, "path to metrics.jsonl")->required();
    summarize_cmd->callback(
        [&] { std::cout << pdiff::summary_to_json(pdiff::summarize(metrics_path)) << '\n'; });

    std::vector<std::string> summary_paths;
    auto* compare_cmd = app.add_subcommand("compare", "tabulate run summaries side by side");
    compare_cmd->add_option("summaries", summary_paths, "summary.json files")->required();
    compare_cmd->callback([&] {
        std::vector<pdiff::RunSummary> summaries;
        summaries.reserve(summary_paths.size());
        for (const std::string& path : summary_paths)
            summaries.push_back(pdiff::summary_from_json_file(path));
        std::cout << pdiff::compare_table(summaries);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(pdiff::ErrorCategory::argument);
    } catch (const pdiff::Error& e) {
        std::cerr << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
