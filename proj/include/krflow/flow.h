#pragma once
#include <functional>
#include <memory>

#include "krflow/field.h"

namespace krflow {

enum class Scheme { IMEX, RK4 };
enum class C0Policy { Zero, MeanH, Bisect };
enum class Outcome { ConvergedKE, Diverged, Inconclusive, NumericalFailure };

std::string to_string(Outcome o);
std::string to_string(Scheme s);
std::string to_string(C0Policy p);

struct FlowConfig {
    double dt = 0.05;
    double t_max = 30.0;
    Scheme scheme = Scheme::IMEX;
    C0Policy c0_policy = C0Policy::Zero;
    bool do_symmetrize = true;
    std::uint64_t seed = 5;
    double amplitude = 0.15;
    double convergence_tol = 1e-3;
    double divergence_osc_budget = 20.0;
    int checkpoint_every = 100;
    int snapshot_every = 20;
};

// deterministic uniform sampler (bit-stable across platforms)
struct Rng {
    std::uint64_t s[4];
    explicit Rng(std::uint64_t seed);
    std::uint64_t next_u64();
    double uniform(double a, double b);
};

// symmetry-respecting random bumps, amplitude-halved until the metric keeps
// a positivity margin
std::vector<double> bump_perturbation(const ReferenceData& ref, Rng& rng,
                                      double amplitude, double margin = 0.5);

// initial additive constant per policy
double choose_c0(const ReferenceData& ref, const std::vector<double>& pert,
                 const FlowConfig& cfg);

struct StepReject : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// exponential integrator for the potential flow: the linear +phi term is
// integrated exactly, the log Monge-Ampere term is treated implicitly and
// solved by a modified Newton iteration with a lazily refactored linear
// operator.  Falls back to recursive sub-steps when Newton rejects.
class Stepper {
  public:
    Stepper(const ReferenceData& ref, int order = 0);
    ~Stepper();
    std::vector<double> step(const PotentialField& f, double dt,
                             const std::vector<IMat>* group);
    // drop the cached factorization; the driver calls this on a fixed step
    // cadence so a resumed run rebuilds the identical operator sequence
    void invalidate();
    // probe mode: skip the per-step gauge pinning (exposes the e^t mode)
    bool pin_gauge = true;
    long newton_iters = 0;
    long refactor_count = 0;
    struct Solver;

  private:
    std::vector<double> implicit_solve(const PotentialField& f, double dt);
    std::vector<double> step_rec(const PotentialField& f, double dt, int depth);
    const ReferenceData& ref_;
    int order_;
    std::unique_ptr<Solver> solver_;
};

// explicit RK4 step (order study and CFL-limited runs)
std::vector<double> rk4_step(const ReferenceData& ref,
                             const std::vector<double>& phi, double dt,
                             int order, bool pin_gauge = true);
double cfl_limit(const PotentialField& f);

// resume point: skips perturbation and c0 selection, continues at t
struct StartState {
    std::vector<double> phi;
    double t = 0.0;
    double c0 = 0.0;
};

struct Trajectory {
    std::vector<double> times;                 // snapshot cadence
    std::vector<std::vector<double>> phis;
    double c0 = 0.0;
    Outcome outcome = Outcome::Inconclusive;
    double rate = 0.0;        // fitted exponential rate when Converged-KE
    bool rate_fitted = false;
    std::string failure;      // NumericalFailure detail
    double final_sup_h = 0.0;
    double wall_seconds = 0.0;
};

// called every accepted step; snapshot marks the recording cadence rows
using SnapshotHook = std::function<void(int step, double t,
                                        const PotentialField& f, bool snapshot)>;

Trajectory run_flow(const ReferenceData& ref, const FlowConfig& cfg,
                    const SnapshotHook& hook = nullptr,
                    const StartState* start = nullptr);

// outcome + rate on an already recorded trajectory
void classify_outcome(const ReferenceData& ref, Trajectory& traj,
                      const FlowConfig& cfg);

}  // namespace krflow
