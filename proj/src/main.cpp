#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "krflow/experiment.h"

using namespace krflow;

static std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= csv.size()) {
        std::size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) comma = csv.size();
        std::string tok = csv.substr(pos, comma - pos);
        if (!tok.empty()) out.push_back(std::stod(tok));
        pos = comma + 1;
    }
    if (out.empty()) throw ConfigError("--values lists no numbers");
    return out;
}

int main(int argc, char** argv) {
    CLI::App app{"symmetry-reduced Kahler-Ricci flow laboratory"};
    app.require_subcommand(1);

    std::string config_path, axis, values_csv;
    std::string report_out = "report.json";
    std::vector<std::string> report_dirs;
    bool no_svg = false;

    CLI::App* run = app.add_subcommand("run", "single flow experiment");
    run->add_option("config", config_path, "key = value config file")
        ->required();

    CLI::App* sweep = app.add_subcommand("sweep", "runs over one parameter");
    sweep->add_option("config", config_path, "key = value config file")
        ->required();
    sweep->add_option("--axis", axis, "parameter to vary")->required();
    sweep->add_option("--values", values_csv, "comma separated values")
        ->required();

    CLI::App* report =
        app.add_subcommand("report", "aggregate finished run directories");
    report->add_option("dirs", report_dirs, "run directories");
    report->add_option("-o,--out", report_out, "report path");
    report->add_flag("--no-svg", no_svg, "skip plot rendering");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            RunSummary s = run_experiment(parse_config(config_path));
            std::printf("%s rate=%.6g sup_h=%.3e alpha_hat=%.4g %s -> %s\n",
                        to_string(s.outcome).c_str(), s.rate, s.final_sup_h,
                        s.alpha_hat, to_string(s.equivalence).c_str(),
                        s.out_dir.c_str());
            if (!s.failure.empty())
                std::fprintf(stderr, "failure: %s\n", s.failure.c_str());
            return exit_code(s.outcome);
        }
        if (sweep->parsed()) {
            auto entries = run_sweep(parse_config(config_path), axis,
                                     parse_values(values_csv));
            for (const auto& e : entries)
                std::printf("%s %s\n", e.dir.c_str(),
                            e.error.empty()
                                ? to_string(e.summary.outcome).c_str()
                                : e.error.c_str());
            return 0;
        }
        write_report(report_dirs, report_out, !no_svg);
        std::printf("%s\n", report_out.c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 5;
    }
}
