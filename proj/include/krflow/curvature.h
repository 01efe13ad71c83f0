#pragma once
#include "krflow/field.h"

namespace krflow {

// Hessian of -log det H0, from the analytic third and fourth cumulants of
// the softmax distribution over lattice points (no finite differences)
struct RefCurvature {
    std::vector<double> g11, g22, g12;  // g22/g12 empty for n=1
};

RefCurvature build_ref_curvature(const ReferenceData& ref);

// scalar curvature R = tr(H^{-1} D^2(-log detH)), normalized so that the
// KE reference gives R = n.  phi is re-anchored to its boundary mean first
// so the differenced log stays in the decaying gauge.
std::vector<double> scalar_curvature(const PotentialField& f,
                                     const RefCurvature& rc);

}  // namespace krflow
