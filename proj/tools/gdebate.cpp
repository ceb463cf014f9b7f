// gdebate: run debates, sweeps and cost tables from the command line.
//
// Exit status: 0 on success, 1 if any run aborted (the report is still
// written and marked partial), 2 on configuration or input errors.

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gdebate/harness.hpp"

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw gdebate::ConfigError("--out: cannot write '" + path + "'");
    return out;
}

void write_report(const gdebate::ExperimentReport& report, const std::string& path, const std::string& format) {
    auto out = open_out(path);
    if (format == "json") {
        gdebate::write_report_json(out, report);
        return;
    }
    gdebate::write_report_csv(out, report);
    auto summary = open_out(path + ".summary.csv");
    gdebate::write_summary_csv(summary, report);
}

int finish(const gdebate::ExperimentReport& report) {
    for (const auto& s : report.summaries) {
        if (s.status == gdebate::RunStatus::Complete) continue;
        std::cerr << "gdebate: " << gdebate::to_string(s.key.mode) << " M=" << s.key.agents
                  << " T=" << s.key.rounds << " R=" << s.key.intra_rounds << ": "
                  << gdebate::to_string(s.status) << " (" << s.completed << "/" << s.requested
                  << " repetitions): " << s.error << '\n';
    }
    return report.partial() ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Group and multi-agent debate runner with analytical token costs"};
    app.require_subcommand(1);

    std::string config_path, spec_path, params_path, out_path, format = "csv";
    std::uint64_t seed = 0;
    int count = 1, operand_max = 99;

    auto* run = app.add_subcommand("run", "Run one experiment config");
    run->add_option("--config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--out", out_path, "Report path")->required();
    run->add_option("--format", format, "Report format")->check(CLI::IsMember({"csv", "json"}));

    auto* sweep = app.add_subcommand("sweep", "Run a cartesian grid of configs");
    sweep->add_option("--spec", spec_path, "Sweep spec (JSON)")->required();
    sweep->add_option("--out", out_path, "Report path")->required();
    sweep->add_option("--format", format, "Report format")->check(CLI::IsMember({"csv", "json"}));

    auto* cost = app.add_subcommand("cost", "Tabulate analytical token costs");
    cost->add_option("--params", params_path, "Cost axes (JSON)")->required();
    cost->add_option("--out", out_path, "CSV path")->required();

    auto* gen = app.add_subcommand("gen-arith", "Generate arithmetic problems as JSON Lines");
    gen->add_option("--seed", seed, "Generator seed")->required();
    gen->add_option("--count", count, "Number of problems")->required()->check(CLI::PositiveNumber);
    gen->add_option("--operand-max", operand_max, "Largest operand")->check(CLI::NonNegativeNumber);
    gen->add_option("--out", out_path, "Output path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto report = gdebate::run_experiment(gdebate::load_experiment(config_path));
            write_report(report, out_path, format);
            return finish(report);
        }
        if (*sweep) {
            auto report = gdebate::sweep_grid(gdebate::load_sweep(spec_path));
            write_report(report, out_path, format);
            return finish(report);
        }
        if (*cost) {
            auto rows = gdebate::cost_report(gdebate::load_cost_axes(params_path));
            auto out = open_out(out_path);
            gdebate::write_cost_csv(out, rows);
            return 0;
        }
        if (*gen) {
            auto out = open_out(out_path);
            gdebate::write_dataset(out, gdebate::gen_arithmetic(seed, count, operand_max));
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "gdebate: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
