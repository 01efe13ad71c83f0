#pragma once
#include "krflow/config.h"
#include "krflow/estimates.h"
#include "krflow/functionals.h"
#include "krflow/io.h"

namespace krflow {

struct RunSummary {
    Outcome outcome = Outcome::Inconclusive;
    std::string failure;
    double final_t = 0.0;
    double final_sup_h = 0.0;
    double rate = 0.0;
    bool rate_fitted = false;
    double c0 = 0.0;
    double alpha_hat = 0.0;
    bool alpha_threshold_passed = false;
    EquivalenceClass equivalence = EquivalenceClass::Inconclusive;
    std::string monitor_error;  // Mixed classification or chain violation
    double wall_seconds = 0.0;
    std::uint64_t hash = 0;
    std::string out_dir;  // after the KRFLOW_OUT override
};

int exit_code(Outcome o);  // 0 converged, 2 diverged, 3 failure, 4 open

// full single run: flow + monitors + delta sweep, writing run.csv,
// monitors.json, summary.json, checkpoints and final.bin into the output
// directory (KRFLOW_OUT env var wins over cfg.out_dir)
RunSummary run_experiment(const ExperimentConfig& cfg);

struct SweepEntry {
    double value = 0.0;
    std::string dir;
    std::string error;  // nonempty when the run threw
    RunSummary summary;
};

// independent runs over one scalar axis, each in its own subdirectory,
// plus index.json (outcomes; a dt axis also gets a convergence-order table)
std::vector<SweepEntry> run_sweep(const ExperimentConfig& base,
                                  const std::string& axis,
                                  const std::vector<double>& values);

// cross-run aggregation: report.json plus one SVG of F, nu, Osc, sup|h|
// per run directory next to it
void write_report(const std::vector<std::string>& dirs,
                  const std::string& out_path, bool svg = true);

}  // namespace krflow
