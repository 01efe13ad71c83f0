#include "krflow/estimates.h"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>

#include "krflow/flow.h"
#include "krflow/functionals.h"

namespace krflow {

std::string to_string(EquivalenceClass c) {
    switch (c) {
        case EquivalenceClass::AllBounded: return "AllBounded";
        case EquivalenceClass::AllUnbounded: return "AllUnbounded";
        case EquivalenceClass::Mixed: return "Mixed";
        default: return "Inconclusive";
    }
}

BoundsRecord snapshot_bounds(const PotentialField& f, double t) {
    const ReferenceData& ref = *f.ref;
    BoundsRecord r;
    r.t = t;
    double lo = 1e300, hi = -1e300;
    for (double v : f.phi) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    r.q2 = hi;
    r.q3 = lo;
    r.q1 = std::max(std::abs(hi), std::abs(lo));
    r.q7 = hi - lo;
    r.q4 = integrate(ref, f.phi, ref.det0);
    double ev = integrate(ref, f.phi, f.detH);
    r.q5 = -ev;
    r.q6 = r.q4 - ev;
    return r;
}

static double slope(const std::vector<double>& t, const std::vector<double>& v,
                    std::size_t from) {
    if (v.size() - from < 2) return 0.0;
    double mt = 0, mv = 0;
    std::size_t k = v.size() - from;
    for (std::size_t i = from; i < v.size(); ++i) {
        mt += t[i];
        mv += v[i];
    }
    mt /= k;
    mv /= k;
    double num = 0, den = 0;
    for (std::size_t i = from; i < v.size(); ++i) {
        num += (t[i] - mt) * (v[i] - mv);
        den += (t[i] - mt) * (t[i] - mt);
    }
    return den > 0 ? num / den : 0.0;
}

EquivalenceReport equivalence_report(const std::vector<BoundsRecord>& recs,
                                     double budget) {
    EquivalenceReport rep;
    if (recs.size() < 10) return rep;
    std::vector<double> ts;
    for (const auto& r : recs) ts.push_back(r.t);
    auto series = [&](int q) {
        std::vector<double> v;
        for (const auto& r : recs) {
            const double* p = &r.q1;
            v.push_back(p[q]);
        }
        return v;
    };
    std::size_t from = recs.size() - recs.size() / 3;
    for (int q = 0; q < 7; ++q) {
        std::vector<double> v = series(q), av;
        for (double x : v) av.push_back(std::abs(x));
        double maxabs = 0;
        for (double x : av) maxabs = std::max(maxabs, x);
        double s_raw = slope(ts, v, from);
        double s_abs = slope(ts, av, from);
        bool monotone = true;
        for (std::size_t i = from + 1; i < av.size(); ++i)
            if (av[i] < av[i - 1] - 1e-9 * (1 + av[i - 1])) monotone = false;
        if (maxabs < budget && std::abs(s_raw) < 1e-3)
            rep.labels[q] = 0;
        else if (av.back() > budget && monotone && s_abs > 1e-2)
            rep.labels[q] = 1;
        else
            rep.labels[q] = 2;
    }
    bool any_b = false, any_u = false, any_i = false;
    for (int q = 0; q < 7; ++q) {
        any_b |= rep.labels[q] == 0;
        any_u |= rep.labels[q] == 1;
        any_i |= rep.labels[q] == 2;
    }
    if (any_b && any_u)
        rep.cls = EquivalenceClass::Mixed;
    else if (any_i)
        rep.cls = EquivalenceClass::Inconclusive;
    else if (any_u)
        rep.cls = EquivalenceClass::AllUnbounded;
    else
        rep.cls = EquivalenceClass::AllBounded;
    return rep;
}

MonitorReport inequality_monitors(const ReferenceData& ref,
                                  const std::vector<double>& times,
                                  const std::vector<std::vector<double>>& phis,
                                  double delta, double budget) {
    if (phis.empty() || times.size() != phis.size())
        throw ConfigError("monitors need matching times and snapshots");
    MonitorReport rep;
    rep.delta = delta;
    const int n = ref.grid.n;
    std::vector<double> aux_rhs;  // sup(-phidot - h_ref) + volume-log slack
    for (std::size_t i = 0; i < phis.size(); ++i) {
        PotentialField f(ref, phis[i], 2);
        rep.bounds.push_back(snapshot_bounds(f, times[i]));
        std::vector<double> pd = flow_rhs(f);
        double sup = -1e300;
        for (std::size_t j = 0; j < pd.size(); ++j)
            sup = std::max(sup, -pd[j] - ref.h_ref[j]);
        double vol = integrate_const(ref, f.detH) - 1.0;
        aux_rhs.push_back(sup + std::max(0.0, std::log1p(vol)));
    }
    rep.equivalence = equivalence_report(rep.bounds, budget);
    bool bounded = rep.equivalence.cls == EquivalenceClass::AllBounded;

    const std::size_t K = rep.bounds.size();
    const std::size_t burn = std::max<std::size_t>(1, K / 10);
    auto make = [&](const std::string& name, auto lhs_f, auto rhs_f,
                    bool calib, double tol) {
        MonitorSeries s;
        s.name = name;
        s.calibrated = calib;
        for (std::size_t i = 0; i < K; ++i) {
            s.lhs.push_back(lhs_f(rep.bounds[i], i));
            s.rhs.push_back(rhs_f(rep.bounds[i], i));
        }
        if (calib) {
            for (std::size_t i = 0; i < std::min(burn, K); ++i)
                s.constant = std::max(s.constant, s.lhs[i] - s.rhs[i]);
            // bounded runs must not trend away from the calibrated constant
            std::vector<double> resid;
            for (std::size_t i = 0; i < K; ++i)
                resid.push_back(s.lhs[i] - s.rhs[i]);
            for (std::size_t i = burn; i < K; ++i)
                s.worst = std::max(s.worst, resid[i] - s.constant);
            if (bounded && K >= 6) {
                double sl = slope(times, resid, K - K / 3);
                s.violated = sl > 1e-3;
            }
        } else {
            for (std::size_t i = 0; i < K; ++i)
                s.worst = std::max(s.worst, s.lhs[i] - s.rhs[i]);
            s.violated = s.worst > tol;
        }
        rep.steps.push_back(std::move(s));
    };

    double ratio = (1.0 - delta) / delta;
    make("sup_vs_weighted",
         [](const BoundsRecord& b, std::size_t) { return b.q2; },
         [ratio](const BoundsRecord& b, std::size_t) { return ratio * b.q5; },
         true, 0);
    make("c0_vs_sup",
         [](const BoundsRecord& b, std::size_t) {
             return b.q1 / (std::max(0.0, b.q2) + 1.0);
         },
         [](const BoundsRecord&, std::size_t) { return 0.0; }, true, 0);
    make("neg_inf_vs_c0",
         [](const BoundsRecord& b, std::size_t) { return -b.q3; },
         [](const BoundsRecord& b, std::size_t) { return b.q1; }, false, 1e-12);
    make("weighted_vs_neg_inf",
         [](const BoundsRecord& b, std::size_t) { return b.q5; },
         [](const BoundsRecord& b, std::size_t) { return -b.q3; }, false, 1e-6);
    make("mean_vs_sup",
         [](const BoundsRecord& b, std::size_t) { return b.q4; },
         [](const BoundsRecord& b, std::size_t) { return b.q2; }, false, 1e-6);
    make("sup_vs_mean",
         [](const BoundsRecord& b, std::size_t) { return b.q2; },
         [](const BoundsRecord& b, std::size_t) { return b.q4; }, true, 0);
    make("osc_vs_c0",
         [](const BoundsRecord& b, std::size_t) { return b.q7; },
         [](const BoundsRecord& b, std::size_t) { return 2 * b.q1; }, false,
         1e-12);
    make("energy_vs_osc",
         [](const BoundsRecord& b, std::size_t) { return b.q6; },
         [](const BoundsRecord& b, std::size_t) { return b.q7; }, false, 1e-6);
    make("weighted_vs_energy",
         [](const BoundsRecord& b, std::size_t) { return b.q5; },
         [](const BoundsRecord& b, std::size_t) { return b.q6; }, true, 0);
    make("weighted_vs_nsup",
         [](const BoundsRecord& b, std::size_t) { return b.q5; },
         [n](const BoundsRecord& b, std::size_t) { return n * b.q2; }, true, 0);
    make("mean_vs_flow",
         [](const BoundsRecord& b, std::size_t) { return -b.q4; },
         [&aux_rhs](const BoundsRecord&, std::size_t i) { return aux_rhs[i]; },
         false, 1e-6);

    for (const auto& b : rep.bounds)
        rep.identity_err =
            std::max(rep.identity_err, std::abs(b.q5 - b.q6 + b.q4));

    if (rep.equivalence.cls == EquivalenceClass::Mixed)
        throw DomainError("equivalence monitor: Mixed classification");
    for (const auto& s : rep.steps)
        if (s.name == "energy_vs_osc" && s.violated)
            throw DomainError("energy_vs_osc violated beyond tolerance");
    return rep;
}

PerelmanTriple perelman_monitor(const PotentialField& f,
                                const RefCurvature& rc) {
    PerelmanTriple out;
    std::vector<double> R = scalar_curvature(f, rc);
    for (double v : R) out.sup_R = std::max(out.sup_R, std::abs(v));
    auto [h, c] = ricci_potential(f);
    for (double v : h) out.sup_h = std::max(out.sup_h, std::abs(v));
    std::vector<double> g2 = grad_norm_sq(h, f);
    double m = 0;
    for (double v : g2) m = std::max(m, v);
    out.sup_gradh = std::sqrt(std::max(0.0, m));
    return out;
}

// ---------------------------------------------------------------------------
// Poincare proxy: generalized eigenproblem K u = lambda M u assembled from
// the Dirichlet form of -div(detH H^{-1} grad .)/detH

static Eigen::SparseMatrix<double> stiffness(const PotentialField& f) {
    const ReferenceData& ref = *f.ref;
    const Grid& g = ref.grid;
    const int N = g.N;
    const double h = g.h;
    std::vector<Eigen::Triplet<double>> trip;
    if (g.n == 1) {
        // detH * H^{-1} = 1 in one variable: plain midpoint fluxes
        double c = 1.0 / h;
        for (int i = 0; i < N - 1; ++i) {
            trip.emplace_back(i, i, c);
            trip.emplace_back(i + 1, i + 1, c);
            trip.emplace_back(i, i + 1, -c);
            trip.emplace_back(i + 1, i, -c);
        }
        Eigen::SparseMatrix<double> K(N, N);
        K.setFromTriplets(trip.begin(), trip.end());
        return K;
    }
    auto id = [N](int i, int j) { return i * N + j; };
    trip.reserve((std::size_t)N * N * 12);
    // adj(H) diagonal with midpoint averages; h^2 weight cancels 1/h^2
    for (int i = 0; i < N - 1; ++i)
        for (int j = 0; j < N; ++j) {
            double c = 0.5 * (f.H22(id(i, j)) + f.H22(id(i + 1, j)));
            trip.emplace_back(id(i, j), id(i, j), c);
            trip.emplace_back(id(i + 1, j), id(i + 1, j), c);
            trip.emplace_back(id(i, j), id(i + 1, j), -c);
            trip.emplace_back(id(i + 1, j), id(i, j), -c);
        }
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N - 1; ++j) {
            double c = 0.5 * (f.H11(id(i, j)) + f.H11(id(i, j + 1)));
            trip.emplace_back(id(i, j), id(i, j), c);
            trip.emplace_back(id(i, j + 1), id(i, j + 1), c);
            trip.emplace_back(id(i, j), id(i, j + 1), -c);
            trip.emplace_back(id(i, j + 1), id(i, j), -c);
        }
    // mixed part with centered gradients, zero rows at the faces
    for (int i = 1; i < N - 1; ++i)
        for (int j = 1; j < N - 1; ++j) {
            double w12 = -0.25 * f.H12(id(i, j));
            for (int si = -1; si <= 1; si += 2)
                for (int sj = -1; sj <= 1; sj += 2) {
                    double v = si * sj * w12;
                    trip.emplace_back(id(i + si, j), id(i, j + sj), v);
                    trip.emplace_back(id(i, j + sj), id(i + si, j), v);
                }
        }
    Eigen::SparseMatrix<double> K(N * N, N * N);
    K.setFromTriplets(trip.begin(), trip.end());
    return K;
}

PoincareResult poincare_proxy(const PotentialField& f, double tol, int maxit) {
    const ReferenceData& ref = *f.ref;
    const std::size_t M = ref.grid.size();
    Eigen::SparseMatrix<double> K = stiffness(f);
    Eigen::VectorXd m(M);
    for (std::size_t i = 0; i < M; ++i) m[i] = ref.w[i] * f.detH[i];
    double mt = m.sum();

    Eigen::SparseMatrix<double> Mm(M, M);
    {
        std::vector<Eigen::Triplet<double>> t;
        for (std::size_t i = 0; i < M; ++i) t.emplace_back(i, i, m[i]);
        Mm.setFromTriplets(t.begin(), t.end());
    }
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(K + Mm);
    if (lu.info() != Eigen::Success)
        throw DomainError("eigen iteration operator not factorizable");

    Rng rng(0);
    Eigen::VectorXd x(M);
    for (std::size_t i = 0; i < M; ++i) x[i] = rng.uniform(-1.0, 1.0);
    auto project = [&](Eigen::VectorXd v) {
        double a = m.dot(v) / mt;
        v.array() -= a;
        return Eigen::VectorXd(v / std::sqrt(v.dot(m.cwiseProduct(v))));
    };
    double lam = 0, lam_old = 1e300;
    int it = 0;
    for (; it < maxit; ++it) {
        x = project(x);
        lam = x.dot(K * x);
        if (std::abs(lam - lam_old) < 1e-6 * std::max(std::abs(lam), 1.0))
            break;
        lam_old = lam;
        x = lu.solve(m.cwiseProduct(x));
    }
    // factorizing near lam collapses onto the eigenspace even when the
    // spectrum is clustered
    double sig = lam * (1 - 1e-3);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu2;
    lu2.compute(Eigen::SparseMatrix<double>(K - sig * Mm));
    if (lu2.info() != Eigen::Success)
        throw DomainError("shifted operator not factorizable");
    double res = 1e300;
    for (int it2 = 0; it2 < 30; ++it2) {
        x = project(lu2.solve(m.cwiseProduct(x)));
        lam = x.dot(K * x);
        Eigen::VectorXd r = K * x - lam * m.cwiseProduct(x);
        res = r.cwiseAbs().maxCoeff() / m.cwiseProduct(x).cwiseAbs().maxCoeff();
        ++it;
        if (res < tol) break;
    }
    if (res > 1e-8)
        throw DomainError("eigenpair residual did not converge");
    PoincareResult out;
    out.lambda1 = lam;
    out.proxy = 1.0 / lam;
    out.residual = res;
    out.iters = it;
    return out;
}

}  // namespace krflow
