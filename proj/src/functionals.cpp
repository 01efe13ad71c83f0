#include "krflow/functionals.h"

#include <cmath>

namespace krflow {

std::vector<double> dirichlet_terms(const PotentialField& f) {
    const ReferenceData& ref = *f.ref;
    const Grid& g = ref.grid;
    if (g.n == 1) {
        // edge-based form, the exact summation-by-parts partner of the
        // measure route
        const int N = g.N;
        std::vector<double> terms(N - 1);
        for (int i = 0; i < N - 1; ++i) {
            double d = (f.phi[i + 1] - f.phi[i]) / g.h;
            terms[i] = g.h * d * d;
        }
        return {pairwise_sum(terms) / ref.V};
    }
    const std::size_t M = g.size();
    std::vector<double> t_ev(M), t_ref(M);
    for (std::size_t i = 0; i < M; ++i) {
        double px = f.gx[i], py = f.gy[i];
        t_ev[i] = 0.5 * (px * px * f.H22(i) + py * py * f.H11(i) -
                         2 * px * py * f.H12(i));
        t_ref[i] = 0.5 * (px * px * ref.a22[i] + py * py * ref.a11[i] -
                          2 * px * py * ref.a12[i]);
    }
    return {integrate_const(ref, t_ev), integrate_const(ref, t_ref)};
}

FunctionalValues compute_functionals(const PotentialField& f) {
    const ReferenceData& ref = *f.ref;
    const int n = ref.grid.n;
    FunctionalValues out;
    out.int_phi_ref = integrate(ref, f.phi, ref.det0);
    double int_phi_ev = integrate(ref, f.phi, f.detH);
    out.I = out.int_phi_ref - int_phi_ev;
    out.int_negphi_ev = -int_phi_ev;

    // F and nu are constant-gauge invariant; evaluate them on the anchored
    // potential so the computed values are too
    double a = boundary_mean(ref, f.phi);
    const PotentialField* fa = &f;
    PotentialField anchored;
    if (a != 0.0) {
        std::vector<double> shifted(f.phi);
        for (double& v : shifted) v -= a;
        anchored = PotentialField(ref, std::move(shifted), f.order);
        fa = &anchored;
    }

    auto terms = dirichlet_terms(*fa);
    out.dirichlet_sum = 0.0;
    out.J = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        out.dirichlet_sum += terms[i];
        out.J += (i + 1.0) / (n + 1.0) * terms[i];
    }
    out.F0 = out.J - out.int_phi_ref;
    // log((1/V) int e^{h_ref - phi} det0) = c_ref - c_phi, exactly
    double cphi = c_phi(ref, fa->phi);
    out.F = (out.J - integrate(ref, fa->phi, ref.det0)) - (ref.c_ref - cphi);
    auto [hphi, c] = ricci_potential(*fa);
    out.nu = out.F + integrate(ref, ref.h_ref, ref.det0) -
             integrate(ref, hphi, fa->detH);
    return out;
}

double alpha_integral(const ReferenceData& ref, const std::vector<double>& phi,
                      double delta) {
    if (delta < 0) throw ConfigError("alpha integral needs delta >= 0");
    double sup = -1e300;
    for (double v : phi) sup = std::max(sup, v);
    std::vector<double> e(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i)
        e[i] = std::exp(-delta * (phi[i] - sup));
    return integrate(ref, e, ref.det0);
}

DeltaSweepResult delta_sweep(const ReferenceData& ref,
                             const std::vector<std::vector<double>>& trajectory,
                             const std::vector<double>& deltas, double budget) {
    if (trajectory.empty()) throw ConfigError("delta sweep needs a trajectory");
    DeltaSweepResult r;
    r.deltas = deltas;
    r.budget = budget;
    for (double d : deltas) {
        double sup = 0.0;
        for (const auto& phi : trajectory)
            sup = std::max(sup, alpha_integral(ref, phi, d));
        r.sup_integrals.push_back(sup);
        if (sup <= budget) r.alpha_hat = std::max(r.alpha_hat, d);
    }
    double n = ref.grid.n;
    r.threshold_passed = r.alpha_hat > n / (n + 1.0);
    return r;
}

PropernessScatter properness_scatter(const std::vector<double>& I_series,
                                     const std::vector<double>& F_series) {
    PropernessScatter out;
    const std::size_t k = std::min(I_series.size(), F_series.size());
    for (std::size_t i = 0; i < k; ++i)
        out.points.emplace_back(I_series[i], F_series[i]);
    if (k >= 6) {
        // violating: still falling over the final third at a rate comparable
        // to the overall drop (no plateau)
        std::size_t third = k - k / 3;
        double drop_all = F_series.front() - F_series.back();
        double drop_tail = F_series[third] - F_series.back();
        double span = double(k - 1 - third) / double(k - 1);
        out.violating = drop_all > 1e-6 && drop_tail > 0.5 * span * drop_all;
    }
    return out;
}

}  // namespace krflow
