#pragma once
#include <cstdint>
#include <vector>

#include "krflow/model.h"

namespace krflow {

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Grid {
    int n = 1;
    int N = 513;
    double L = 18.0;
    double h = 0.0;

    Grid() = default;
    Grid(int n_, int N_, double L_);
    std::size_t size() const { return n == 1 ? (std::size_t)N : (std::size_t)N * N; }
    double node(int i) const { return -L + h * i; }
};

// deterministic fixed-tree pairwise sum; the reduction order is part of the
// output contract (bit-identical reruns)
double pairwise_sum(const double* a, std::size_t n);
double pairwise_sum(const std::vector<double>& a);

// Reference geometry on the grid: Guillemin potential of the lattice points,
// its analytic Hessian, and the normalized reference Ricci potential.
struct ReferenceData {
    ReducedModel model;
    Grid grid;
    bool ke_override = false;  // cp1 only: closed-form KE reference

    std::vector<double> x;     // axis nodes
    std::vector<double> w;     // trapezoid weights, flattened
    std::vector<double> F0;
    std::vector<double> a11, a22, a12;  // H0 entries (a22/a12 empty for n=1)
    std::vector<double> det0;
    std::vector<double> h_ref;
    std::vector<std::uint8_t> tail;  // det0 below resolvable fraction of max
    double V = 0.0;
    double q_ref = 0.0;   // sum w e^{-F0}
    double mass0 = 0.0;   // sum w det0
    double c_ref = 0.0;
};

ReferenceData build_reference(const ReducedModel& model, const Grid& grid,
                              bool ke_override = false);

// (1/V) sum w f density
double integrate(const ReferenceData& ref, const std::vector<double>& f,
                 const std::vector<double>& density);
double integrate_const(const ReferenceData& ref, const std::vector<double>& density);

}  // namespace krflow
