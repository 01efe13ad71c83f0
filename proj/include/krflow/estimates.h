#pragma once
#include "krflow/curvature.h"
#include "krflow/field.h"

namespace krflow {

// the seven boundedness quantities tracked along a run
struct BoundsRecord {
    double t = 0;
    double q1 = 0;  // ||phi||_C0
    double q2 = 0;  // sup phi
    double q3 = 0;  // inf phi
    double q4 = 0;  // (1/V) int phi det0
    double q5 = 0;  // (1/V) int (-phi) detH
    double q6 = 0;  // I
    double q7 = 0;  // Osc phi
};

BoundsRecord snapshot_bounds(const PotentialField& f, double t = 0.0);

enum class EquivalenceClass { AllBounded, AllUnbounded, Mixed, Inconclusive };
std::string to_string(EquivalenceClass c);

// finite-horizon boundedness labels: 0 bounded, 1 unbounded, 2 inconclusive
struct EquivalenceReport {
    int labels[7] = {2, 2, 2, 2, 2, 2, 2};
    EquivalenceClass cls = EquivalenceClass::Inconclusive;
};

EquivalenceReport equivalence_report(const std::vector<BoundsRecord>& recs,
                                     double budget = 20.0);

// one inequality chain member: lhs <= rhs + constant, the constant calibrated
// over the burn-in window for the non-exact steps
struct MonitorSeries {
    std::string name;
    std::vector<double> lhs, rhs;
    double constant = 0.0;  // calibrated (0 for the exact steps)
    bool calibrated = false;
    double worst = 0.0;  // max post-burn-in excess over rhs + constant
    bool violated = false;
};

struct MonitorReport {
    std::vector<MonitorSeries> steps;
    std::vector<BoundsRecord> bounds;
    double delta = 0.5;  // exponent in the sup-vs-weighted step
    EquivalenceReport equivalence;
    double identity_err = 0.0;  // max | q5 - q6 + q4 | over snapshots
};

// all Table-style implication monitors over a recorded trajectory; throws
// DomainError on a Mixed classification or an energy-vs-osc violation
MonitorReport inequality_monitors(const ReferenceData& ref,
                                  const std::vector<double>& times,
                                  const std::vector<std::vector<double>>& phis,
                                  double delta = 0.5, double budget = 20.0);

struct PerelmanTriple {
    double sup_R = 0, sup_h = 0, sup_gradh = 0;
};

PerelmanTriple perelman_monitor(const PotentialField& f,
                                const RefCurvature& rc);

struct PoincareResult {
    double lambda1 = 0;
    double proxy = 0;  // 1/lambda1
    double residual = 0;
    int iters = 0;
};

// smallest nonzero eigenvalue of u -> -div(detH H^{-1} grad u)/detH in the
// evolved-measure inner product; inverse iteration with constants deflated,
// then a shift-invert polish for clustered spectra
PoincareResult poincare_proxy(const PotentialField& f, double tol = 1e-10,
                              int maxit = 400);

}  // namespace krflow
