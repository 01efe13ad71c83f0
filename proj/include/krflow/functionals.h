#pragma once
#include "krflow/field.h"

namespace krflow {

// scalar observables of one potential
struct FunctionalValues {
    double I = 0, J = 0, F0 = 0, F = 0, nu = 0;
    double int_phi_ref = 0;     // (1/V) int phi det0
    double int_negphi_ev = 0;   // (1/V) int (-phi) detH
    double dirichlet_sum = 0;   // sum of the wedge Dirichlet integrals
};

// Dirichlet integrals (1/V) int grad phi . adj-wedge . grad phi for the
// evolved and reference forms; two entries for n=2, one for n=1
std::vector<double> dirichlet_terms(const PotentialField& f);

FunctionalValues compute_functionals(const PotentialField& f);

// (1/V) int e^{-delta (phi - sup phi)} det0
double alpha_integral(const ReferenceData& ref, const std::vector<double>& phi,
                      double delta);

struct DeltaSweepResult {
    std::vector<double> deltas;
    std::vector<double> sup_integrals;
    double alpha_hat = 0.0;
    double budget = 0.0;
    bool threshold_passed = false;  // alpha_hat > n/(n+1)
};

DeltaSweepResult delta_sweep(const ReferenceData& ref,
                             const std::vector<std::vector<double>>& trajectory,
                             const std::vector<double>& deltas, double budget);

// (I, F) pairs plus a properness flag: "violating" when F drifts down with
// no lower plateau over the horizon
struct PropernessScatter {
    std::vector<std::pair<double, double>> points;
    bool violating = false;
};
PropernessScatter properness_scatter(const std::vector<double>& I_series,
                                     const std::vector<double>& F_series);

}  // namespace krflow
