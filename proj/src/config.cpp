#include "krflow/config.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace krflow {

static std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

ExperimentConfig default_config(const std::string& preset) {
    ExperimentConfig cfg;
    cfg.preset = preset;
    cfg.ke_reference = (preset == "cp1");
    for (int k = 1; k <= 12; ++k) cfg.delta_grid.push_back(0.125 * k);
    return cfg;
}

static double parse_num(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for '" + key + "': " + v);
    }
}

static bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("bad boolean value for '" + key + "': " + v);
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg = default_config("cp1");
    bool delta_set = false;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected 'key = value', got: " + line);
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key == "preset") {
            cfg.preset = val;
            cfg.ke_reference = (val == "cp1");
        } else if (key == "L") {
            cfg.L = parse_num(key, val);
            if (cfg.L <= 0) throw ConfigError("L must be positive");
        } else if (key == "N") {
            cfg.N = (int)parse_num(key, val);
            if (cfg.N < 8) throw ConfigError("N must be at least 8");
        } else if (key == "ke_reference") {
            cfg.ke_reference = parse_bool(key, val);
        } else if (key == "dt") {
            cfg.flow.dt = parse_num(key, val);
            if (cfg.flow.dt <= 0) throw ConfigError("dt must be positive");
        } else if (key == "t_max") {
            cfg.flow.t_max = parse_num(key, val);
            if (cfg.flow.t_max < 0) throw ConfigError("t_max must be >= 0");
        } else if (key == "scheme") {
            if (val == "imex")
                cfg.flow.scheme = Scheme::IMEX;
            else if (val == "rk4")
                cfg.flow.scheme = Scheme::RK4;
            else
                throw ConfigError("unknown scheme: " + val);
        } else if (key == "c0_policy") {
            if (val == "zero")
                cfg.flow.c0_policy = C0Policy::Zero;
            else if (val == "mean_h")
                cfg.flow.c0_policy = C0Policy::MeanH;
            else if (val == "bisect")
                cfg.flow.c0_policy = C0Policy::Bisect;
            else
                throw ConfigError("unknown c0_policy: " + val);
        } else if (key == "symmetrize") {
            cfg.flow.do_symmetrize = parse_bool(key, val);
        } else if (key == "seed") {
            cfg.flow.seed = (std::uint64_t)parse_num(key, val);
        } else if (key == "amplitude") {
            cfg.flow.amplitude = parse_num(key, val);
            if (cfg.flow.amplitude < 0)
                throw ConfigError("amplitude must be >= 0");
        } else if (key == "convergence_tol") {
            cfg.flow.convergence_tol = parse_num(key, val);
            if (cfg.flow.convergence_tol <= 0)
                throw ConfigError("convergence_tol must be positive");
        } else if (key == "divergence_osc_budget") {
            cfg.flow.divergence_osc_budget = parse_num(key, val);
            if (cfg.flow.divergence_osc_budget <= 0)
                throw ConfigError("divergence_osc_budget must be positive");
        } else if (key == "checkpoint_every") {
            cfg.flow.checkpoint_every = (int)parse_num(key, val);
            if (cfg.flow.checkpoint_every <= 0)
                throw ConfigError("checkpoint_every must be positive");
        } else if (key == "snapshot_every") {
            cfg.flow.snapshot_every = (int)parse_num(key, val);
            if (cfg.flow.snapshot_every <= 0)
                throw ConfigError("snapshot_every must be positive");
        } else if (key == "delta_grid") {
            cfg.delta_grid.clear();
            std::istringstream ds(val);
            std::string tok;
            while (std::getline(ds, tok, ',')) {
                tok = trim(tok);
                if (!tok.empty())
                    cfg.delta_grid.push_back(parse_num(key, tok));
            }
            if (cfg.delta_grid.empty())
                throw ConfigError("delta_grid must list at least one value");
            delta_set = true;
        } else if (key == "alpha_budget") {
            cfg.alpha_budget = parse_num(key, val);
            if (cfg.alpha_budget <= 0)
                throw ConfigError("alpha_budget must be positive");
        } else if (key == "out_dir") {
            cfg.out_dir = val;
        } else if (key == "manifest") {
            cfg.manifest_path = val;
        } else if (key == "resume") {
            cfg.resume = val;
        } else {
            throw ConfigError("unknown config key: " + key);
        }
    }
    (void)delta_set;
    return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

static std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "preset = " << cfg.preset << "\n";
    out << "L = " << fmt(cfg.L) << "\n";
    if (cfg.N > 0) out << "N = " << cfg.N << "\n";
    out << "ke_reference = " << (cfg.ke_reference ? "true" : "false") << "\n";
    out << "dt = " << fmt(cfg.flow.dt) << "\n";
    out << "t_max = " << fmt(cfg.flow.t_max) << "\n";
    out << "scheme = " << to_string(cfg.flow.scheme) << "\n";
    out << "c0_policy = " << to_string(cfg.flow.c0_policy) << "\n";
    out << "symmetrize = " << (cfg.flow.do_symmetrize ? "true" : "false")
        << "\n";
    out << "seed = " << cfg.flow.seed << "\n";
    out << "amplitude = " << fmt(cfg.flow.amplitude) << "\n";
    out << "convergence_tol = " << fmt(cfg.flow.convergence_tol) << "\n";
    out << "divergence_osc_budget = " << fmt(cfg.flow.divergence_osc_budget)
        << "\n";
    out << "checkpoint_every = " << cfg.flow.checkpoint_every << "\n";
    out << "snapshot_every = " << cfg.flow.snapshot_every << "\n";
    out << "delta_grid = ";
    for (std::size_t i = 0; i < cfg.delta_grid.size(); ++i)
        out << (i ? ", " : "") << fmt(cfg.delta_grid[i]);
    out << "\n";
    out << "alpha_budget = " << fmt(cfg.alpha_budget) << "\n";
    out << "out_dir = " << cfg.out_dir << "\n";
    if (!cfg.manifest_path.empty()) out << "manifest = " << cfg.manifest_path << "\n";
    if (cfg.resume) out << "resume = " << *cfg.resume << "\n";
    return out.str();
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    // resume path and output directory excluded: a resumed run writing
    // elsewhere must still hash like the original
    ExperimentConfig c(cfg);
    c.resume.reset();
    c.out_dir = "out";
    std::string s = serialize_config(c);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace krflow
