#pragma once
#include <vector>

#include "krflow/reference.h"

namespace krflow {

struct AdmissibilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// finite-difference stencils on flattened grids (axis 0 varies slowest);
// Neumann ends via even reflection, nested differences for round-off control
namespace fd {
void d2(const std::vector<double>& u, std::vector<double>& out, int n, int N,
        double h, int axis, int order);
void d1(const std::vector<double>& u, std::vector<double>& out, int n, int N,
        double h, int axis, int order);
// fourth-order interior with one-sided edge rows (for curvature fields)
void d2_onesided(const std::vector<double>& u, std::vector<double>& out, int n,
                 int N, double h, int axis);
void d1_onesided(const std::vector<double>& u, std::vector<double>& out, int n,
                 int N, double h, int axis);
}  // namespace fd

// Evolving potential with cached Hessian, gradient and Monge-Ampere density.
// The Hessian of F0 is analytic; only phi is differenced.  The MA ratio is
// clamped to e^{+-6}: on tail nodes the true ratio is below what doubles can
// resolve and must not poison logs or quadrature.
struct PotentialField {
    const ReferenceData* ref = nullptr;
    int order = 2;
    std::vector<double> phi;
    std::vector<double> p11, p22, p12;  // D^2 phi (p22/p12 empty for n=1)
    std::vector<double> detH;           // clamped on tail nodes
    std::vector<double> gx, gy;
    bool raw_ok = true;        // detH/det0 > 0 on every non-tail node
    double min_ratio = 0.0;    // over non-tail nodes
    std::size_t worst_node = 0;

    PotentialField() = default;
    PotentialField(const ReferenceData& r, std::vector<double> values, int ord);

    bool admissible() const { return raw_ok; }
    double H11(std::size_t i) const { return ref->a11[i] + p11[i]; }
    double H22(std::size_t i) const { return ref->a22[i] + p22[i]; }
    double H12(std::size_t i) const { return ref->a12[i] + p12[i]; }
};

// default stencil order for the preset dimension
int default_order(int n);

// construct and fail loudly on admissibility loss (op-level contract)
PotentialField hessian_field(const ReferenceData& ref, std::vector<double> phi,
                             int order = 0);

std::vector<double> ma_ratio(const PotentialField& f);

// h_phi and its normalization constant c: (1/V) sum w e^{h} detH = 1 exactly
std::pair<std::vector<double>, double> ricci_potential(const PotentialField& f);
// the constant alone, from phi (no field build needed)
double c_phi(const ReferenceData& ref, const std::vector<double>& phi);

std::vector<double> flow_rhs(const PotentialField& f);

// |grad f|^2 in the evolved metric, per node
std::vector<double> grad_norm_sq(const std::vector<double>& f,
                                 const PotentialField& fld);

double boundary_mean(const ReferenceData& ref, const std::vector<double>& phi);

// average phi over the box-preserving symmetry subgroup
std::vector<double> symmetrize(const ReferenceData& ref,
                               const std::vector<double>& phi,
                               const std::vector<IMat>& group);

}  // namespace krflow
