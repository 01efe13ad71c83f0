#pragma once
#include <optional>

#include "krflow/flow.h"

namespace krflow {

struct ExperimentConfig {
    std::string preset = "cp1";
    double L = 18.0;
    int N = 0;  // 0: preset default (513 in one variable, 161 in two)
    bool ke_reference = true;  // cp1 only; ignored elsewhere
    FlowConfig flow;
    std::vector<double> delta_grid;  // defaults to 0.125 * (1..12)
    double alpha_budget = 1e3;
    std::string out_dir = "out";
    std::string manifest_path;  // empty: embedded preset table
    std::optional<std::string> resume;

    int resolved_N(int dim) const { return N > 0 ? N : (dim == 1 ? 513 : 161); }
};

ExperimentConfig default_config(const std::string& preset);

// key = value text, '#' comments; unknown keys and out-of-range values are
// rejected by name
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::string& path);

std::string serialize_config(const ExperimentConfig& cfg);

// FNV-1a over the canonical serialization; ties checkpoints to their config
std::uint64_t config_hash(const ExperimentConfig& cfg);

}  // namespace krflow
