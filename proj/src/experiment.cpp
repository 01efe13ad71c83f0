#include "krflow/experiment.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "krflow/curvature.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace krflow {

int exit_code(Outcome o) {
    switch (o) {
        case Outcome::ConvergedKE: return 0;
        case Outcome::Diverged: return 2;
        case Outcome::NumericalFailure: return 3;
        default: return 4;
    }
}

static ReducedModel resolve_model(const ExperimentConfig& cfg) {
    if (cfg.manifest_path.empty()) return build_model(cfg.preset);
    auto models = parse_manifest(read_text_file(cfg.manifest_path));
    for (auto& m : models)
        if (m.name == cfg.preset) return m;
    throw ConfigError("preset '" + cfg.preset + "' not in manifest " +
                      cfg.manifest_path);
}

static std::string resolve_out_dir(const ExperimentConfig& cfg,
                                   bool honor_env = true) {
    const char* env = honor_env ? std::getenv("KRFLOW_OUT") : nullptr;
    return (env && *env) ? std::string(env) : cfg.out_dir;
}

static std::string checkpoint_stem(const std::string& path) {
    if (path.size() > 4 && path.compare(path.size() - 4, 4, ".bin") == 0)
        return path.substr(0, path.size() - 4);
    if (path.size() > 5 && path.compare(path.size() - 5, 5, ".json") == 0)
        return path.substr(0, path.size() - 5);
    return path;
}

static json alpha_json(const DeltaSweepResult& ds) {
    return json{{"deltas", ds.deltas},
                {"sup_integrals", ds.sup_integrals},
                {"alpha_hat", ds.alpha_hat},
                {"budget", ds.budget},
                {"threshold_passed", ds.threshold_passed}};
}

static RunSummary run_one(const ExperimentConfig& cfg, bool honor_env) {
    ReducedModel model = resolve_model(cfg);
    Grid grid(model.n, cfg.resolved_N(model.n), cfg.L);
    bool ke = cfg.ke_reference && model.name == "cp1";
    ReferenceData ref = build_reference(model, grid, ke);
    RefCurvature rc = build_ref_curvature(ref);

    RunSummary sum;
    sum.hash = config_hash(cfg);
    sum.out_dir = resolve_out_dir(cfg, honor_env);
    std::error_code ec;
    fs::create_directories(sum.out_dir, ec);
    if (ec) throw IoError("cannot create output dir: " + sum.out_dir);

    StartState start;
    if (cfg.resume) {
        std::string stem = checkpoint_stem(*cfg.resume);
        CheckpointMeta meta = read_checkpoint_meta(stem);
        if (meta.config_hash != sum.hash)
            throw ConfigError("checkpoint config hash mismatch: " + stem);
        FieldBlob blob = read_field(stem + ".bin");
        if (blob.n != grid.n || blob.N != grid.N || blob.L != grid.L)
            throw ConfigError("checkpoint grid disagrees with config: " + stem);
        start.phi = std::move(blob.values);
        start.t = meta.t;
        start.c0 = meta.c0;
    } else {
        // the start state is assembled here (not inside the flow driver) so
        // checkpoints can record c0 as stepping proceeds
        Rng rng(cfg.flow.seed);
        start.phi = bump_perturbation(ref, rng, cfg.flow.amplitude);
        if (cfg.flow.do_symmetrize)
            start.phi =
                symmetrize(ref, start.phi, model.box_symmetry_group());
        double bm = boundary_mean(ref, start.phi);
        for (double& v : start.phi) v -= bm;
        start.c0 = choose_c0(ref, start.phi, cfg.flow);
        if (start.c0 != 0.0)
            for (double& v : start.phi) v += start.c0;
    }
    sum.c0 = start.c0;

    std::ofstream csv(sum.out_dir + "/run.csv",
                      std::ios::binary | std::ios::trunc);
    if (!csv) throw IoError("cannot open run.csv in " + sum.out_dir);
    csv << kCsvHeader << "\n";

    auto hook = [&](int k, double t, const PotentialField& f, bool snap) {
        if (snap) {
            FunctionalValues fn = compute_functionals(f);
            PerelmanTriple pm = perelman_monitor(f, rc);
            std::vector<double> pd = flow_rhs(f);
            double supdot = 0.0;
            for (double v : pd) supdot = std::max(supdot, std::abs(v));
            double sup = -1e300, inf = 1e300;
            for (double v : f.phi) {
                sup = std::max(sup, v);
                inf = std::min(inf, v);
            }
            double cp = std::nan("");
            try {
                cp = poincare_proxy(f).proxy;
            } catch (const std::exception&) {
                // leave nan: the eigensolve has no say over the run outcome
            }
            CsvRow r;
            double* c = r.col;
            c[0] = t;
            c[1] = sup;
            c[2] = inf;
            c[3] = sup - inf;
            c[4] = fn.I;
            c[5] = fn.J;
            c[6] = fn.F0;
            c[7] = fn.F;
            c[8] = fn.nu;
            c[9] = fn.int_phi_ref;
            c[10] = fn.int_negphi_ev;
            c[11] = supdot;
            c[12] = pm.sup_R;
            c[13] = pm.sup_h;
            c[14] = pm.sup_gradh;
            c[15] = cp;
            c[16] = integrate_const(ref, f.detH) - 1.0;
            csv << format_csv_row(r);
            csv.flush();
        }
        if (k > 0 && k % cfg.flow.checkpoint_every == 0) {
            char name[48];
            std::snprintf(name, sizeof name, "/checkpoint_%06d", k);
            FieldBlob blob{grid.n, grid.N, grid.L, f.phi};
            write_checkpoint(sum.out_dir + name, blob,
                             {t, start.c0, sum.hash});
        }
    };

    Trajectory traj = run_flow(ref, cfg.flow, hook, &start);
    sum.outcome = traj.outcome;
    sum.failure = traj.failure;
    sum.final_sup_h = traj.final_sup_h;
    sum.rate = traj.rate;
    sum.rate_fitted = traj.rate_fitted;
    sum.wall_seconds = traj.wall_seconds;
    if (!traj.times.empty()) sum.final_t = traj.times.back();

    json monitors;
    DeltaSweepResult ds;
    if (!traj.phis.empty()) {
        write_field(sum.out_dir + "/final.bin",
                    {grid.n, grid.N, grid.L, traj.phis.back()});
        ds = delta_sweep(ref, traj.phis, cfg.delta_grid, cfg.alpha_budget);
        sum.alpha_hat = ds.alpha_hat;
        sum.alpha_threshold_passed = ds.threshold_passed;
        try {
            MonitorReport mon = inequality_monitors(ref, traj.times, traj.phis);
            sum.equivalence = mon.equivalence.cls;
            monitors["delta"] = mon.delta;
            monitors["identity_err"] = mon.identity_err;
            monitors["equivalence"] = {
                {"labels", std::vector<int>(mon.equivalence.labels,
                                            mon.equivalence.labels + 7)},
                {"class", to_string(mon.equivalence.cls)}};
            json steps = json::array();
            json consts;
            for (const auto& s : mon.steps) {
                steps.push_back({{"name", s.name},
                                 {"constant", s.constant},
                                 {"calibrated", s.calibrated},
                                 {"worst", s.worst},
                                 {"violated", s.violated},
                                 {"lhs", s.lhs},
                                 {"rhs", s.rhs}});
                if (s.calibrated) consts[s.name] = s.constant;
            }
            monitors["steps"] = steps;
            monitors["calibrated_constants"] = consts;
        } catch (const std::exception& e) {
            sum.monitor_error = e.what();
            monitors["error"] = sum.monitor_error;
        }
        monitors["alpha"] = alpha_json(ds);
    }
    write_text_file(sum.out_dir + "/monitors.json", monitors.dump(2) + "\n");

    json js;
    js["outcome"] = to_string(sum.outcome);
    js["failure"] = sum.failure;
    js["final_t"] = sum.final_t;
    js["final_sup_h"] = sum.final_sup_h;
    js["rate"] = sum.rate;
    js["rate_fitted"] = sum.rate_fitted;
    js["c0"] = sum.c0;
    js["alpha_hat"] = sum.alpha_hat;
    js["alpha_threshold_passed"] = sum.alpha_threshold_passed;
    js["equivalence"] = to_string(sum.equivalence);
    js["monitor_error"] = sum.monitor_error;
    js["wall_seconds"] = sum.wall_seconds;
    js["config_hash"] = sum.hash;
    js["config"] = serialize_config(cfg);
    js["exit_code"] = exit_code(sum.outcome);
    write_text_file(sum.out_dir + "/summary.json", js.dump(2) + "\n");
    return sum;
}

RunSummary run_experiment(const ExperimentConfig& cfg) {
    return run_one(cfg, true);
}

static void set_axis(ExperimentConfig& cfg, const std::string& axis,
                     double v) {
    if (axis == "dt")
        cfg.flow.dt = v;
    else if (axis == "t_max")
        cfg.flow.t_max = v;
    else if (axis == "amplitude")
        cfg.flow.amplitude = v;
    else if (axis == "seed")
        cfg.flow.seed = (std::uint64_t)std::llround(v);
    else if (axis == "N")
        cfg.N = (int)std::llround(v);
    else if (axis == "L")
        cfg.L = v;
    else if (axis == "convergence_tol")
        cfg.flow.convergence_tol = v;
    else if (axis == "divergence_osc_budget")
        cfg.flow.divergence_osc_budget = v;
    else if (axis == "alpha_budget")
        cfg.alpha_budget = v;
    else
        throw ConfigError("not a sweepable axis: " + axis);
}

std::vector<SweepEntry> run_sweep(const ExperimentConfig& base,
                                  const std::string& axis,
                                  const std::vector<double>& values) {
    std::string root = resolve_out_dir(base);
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw IoError("cannot create output dir: " + root);

    std::vector<SweepEntry> entries;
    for (std::size_t i = 0; i < values.size(); ++i) {
        SweepEntry e;
        e.value = values[i];
        e.dir = root + "/" + axis + "_" + std::to_string(i);
        ExperimentConfig cfg(base);
        set_axis(cfg, axis, values[i]);
        cfg.out_dir = e.dir;
        try {
            // the override already picked the sweep root; workers go below it
            e.summary = run_one(cfg, false);
        } catch (const std::exception& ex) {
            e.error = ex.what();
        }
        entries.push_back(std::move(e));
    }

    json runs = json::array();
    for (const auto& e : entries) {
        json r;
        r["value"] = e.value;
        r["dir"] = e.dir;
        if (!e.error.empty()) {
            r["error"] = e.error;
        } else {
            r["outcome"] = to_string(e.summary.outcome);
            r["exit_code"] = exit_code(e.summary.outcome);
            r["rate"] = e.summary.rate;
            r["final_sup_h"] = e.summary.final_sup_h;
        }
        runs.push_back(r);
    }
    json index;
    index["axis"] = axis;
    index["runs"] = runs;

    // dt refinement study: successive-solution errors against the finest run
    if (axis == "dt" && entries.size() >= 2) {
        bool ok = true;
        for (const auto& e : entries) ok = ok && e.error.empty();
        if (ok) {
            std::vector<std::vector<double>> finals;
            for (const auto& e : entries)
                finals.push_back(read_field(e.dir + "/final.bin").values);
            json table = json::array();
            std::vector<double> errs;
            for (std::size_t i = 0; i + 1 < finals.size(); ++i) {
                double err = 0.0;
                const auto& a = finals[i];
                const auto& b = finals.back();
                for (std::size_t j = 0; j < a.size(); ++j)
                    err = std::max(err, std::abs(a[j] - b[j]));
                errs.push_back(err);
                json row;
                row["dt"] = values[i];
                row["sup_diff_vs_finest"] = err;
                if (i > 0 && errs[i - 1] > 0 && err > 0 &&
                    values[i] != values[i - 1])
                    row["observed_order"] = std::log(errs[i - 1] / err) /
                                            std::log(values[i - 1] / values[i]);
                table.push_back(row);
            }
            index["order_table"] = table;
        }
    }
    write_text_file(root + "/index.json", index.dump(2) + "\n");
    return entries;
}

// ---------------------------------------------------------------------------
// report

struct Series {
    std::vector<double> t, F, nu, osc, sup_h;
    double max_dF = 0.0, max_dnu = 0.0;
};

static bool load_series(const std::string& dir, Series& s) {
    std::ifstream f(dir + "/run.csv");
    if (!f) return false;
    std::string line;
    if (!std::getline(f, line)) return false;
    while (std::getline(f, line)) {
        double col[kCsvCols];
        int i = 0;
        std::size_t pos = 0;
        while (i < kCsvCols && pos <= line.size()) {
            std::size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            col[i++] = std::atof(line.substr(pos, comma - pos).c_str());
            pos = comma + 1;
        }
        if (i != kCsvCols) return false;
        if (!s.F.empty()) {
            s.max_dF = std::max(s.max_dF, col[7] - s.F.back());
            s.max_dnu = std::max(s.max_dnu, col[8] - s.nu.back());
        }
        s.t.push_back(col[0]);
        s.F.push_back(col[7]);
        s.nu.push_back(col[8]);
        s.osc.push_back(col[3]);
        s.sup_h.push_back(col[13]);
    }
    return !s.t.empty();
}

static std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

static void append_polyline(std::string& svg, const std::vector<double>& t,
                            const std::vector<double>& y, const char* color) {
    double t0 = t.front(), t1 = t.back();
    double lo = 1e300, hi = -1e300;
    for (double v : y) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi - lo < 1e-300) hi = lo + 1.0;
    if (t1 - t0 < 1e-300) t1 = t0 + 1.0;
    svg += "  <polyline fill=\"none\" stroke=\"";
    svg += color;
    svg += "\" points=\"";
    for (std::size_t i = 0; i < t.size(); ++i) {
        double px = 40 + 560 * (t[i] - t0) / (t1 - t0);
        double py = 330 - 300 * (y[i] - lo) / (hi - lo);
        svg += fmt6(px) + "," + fmt6(py) + " ";
    }
    svg += "\"/>\n";
}

static std::string render_svg(const Series& s, const std::string& title) {
    // each series scaled to its own range; the plot is a trend glance,
    // not a shared-axis chart
    std::string svg =
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" "
        "height=\"360\" viewBox=\"0 0 640 360\">\n"
        "  <rect width=\"640\" height=\"360\" fill=\"white\"/>\n";
    svg += "  <text x=\"40\" y=\"20\" font-size=\"14\">" + title +
           " (F black, nu blue, Osc red, sup|h| green)</text>\n";
    append_polyline(svg, s.t, s.F, "black");
    append_polyline(svg, s.t, s.nu, "blue");
    append_polyline(svg, s.t, s.osc, "red");
    append_polyline(svg, s.t, s.sup_h, "green");
    svg += "</svg>\n";
    return svg;
}

void write_report(const std::vector<std::string>& dirs,
                  const std::string& out_path, bool svg) {
    json runs = json::array();
    json warnings = json::array();
    std::string base = out_path;
    std::size_t dot = base.rfind('.');
    if (dot != std::string::npos) base = base.substr(0, dot);

    for (std::size_t i = 0; i < dirs.size(); ++i) {
        const std::string& dir = dirs[i];
        json sumj;
        try {
            sumj = json::parse(read_text_file(dir + "/summary.json"));
        } catch (const std::exception& e) {
            warnings.push_back(dir + ": " + e.what());
            continue;
        }
        Series s;
        if (!load_series(dir, s)) {
            warnings.push_back(dir + ": missing or malformed run.csv");
            continue;
        }
        json r;
        r["dir"] = dir;
        r["outcome"] = sumj.value("outcome", "");
        r["equivalence"] = sumj.value("equivalence", "");
        r["alpha_hat"] = sumj.value("alpha_hat", 0.0);
        r["rate"] = sumj.value("rate", 0.0);
        r["final_sup_h"] = sumj.value("final_sup_h", 0.0);
        r["max_dF"] = s.max_dF;
        r["max_dnu"] = s.max_dnu;
        r["rows"] = s.t.size();
        if (svg) {
            std::string plot = base + "_plot_" + std::to_string(i) + ".svg";
            write_text_file(plot, render_svg(s, dir));
            r["plot"] = plot;
        }
        runs.push_back(r);
    }
    json rep;
    rep["runs"] = runs;
    rep["warnings"] = warnings;
    write_text_file(out_path, rep.dump(2) + "\n");
}

}  // namespace krflow
