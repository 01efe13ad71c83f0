#include "krflow/reference.h"

#include <cmath>

namespace krflow {

Grid::Grid(int n_, int N_, double L_) : n(n_), N(N_), L(L_) {
    if (N < 8) throw ConfigError("grid needs at least 8 nodes per axis");
    if (L <= 0) throw ConfigError("grid half-width must be positive");
    h = 2.0 * L / (N - 1);
}

double pairwise_sum(const double* a, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += a[i];
        return s;
    }
    std::size_t half = n / 2;
    return pairwise_sum(a, half) + pairwise_sum(a + half, n - half);
}

double pairwise_sum(const std::vector<double>& a) {
    return pairwise_sum(a.data(), a.size());
}

double integrate(const ReferenceData& ref, const std::vector<double>& f,
                 const std::vector<double>& density) {
    std::vector<double> terms(f.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        terms[i] = ref.w[i] * f[i] * density[i];
    return pairwise_sum(terms) / ref.V;
}

double integrate_const(const ReferenceData& ref, const std::vector<double>& density) {
    std::vector<double> terms(density.size());
    for (std::size_t i = 0; i < density.size(); ++i)
        terms[i] = ref.w[i] * density[i];
    return pairwise_sum(terms) / ref.V;
}

namespace {

// tail mass outside the box, estimated from the boundary decay rate of det0
void check_tail_mass(const ReferenceData& ref) {
    const Grid& g = ref.grid;
    const int N = g.N;
    double outside = 0.0;
    if (g.n == 1) {
        for (int side = 0; side < 2; ++side) {
            double d0 = side ? ref.det0[N - 1] : ref.det0[0];
            double d1 = side ? ref.det0[N - 2] : ref.det0[1];
            double rate = std::log(d1 / d0) / g.h;
            if (rate <= 0) throw DomainError("det0 not decaying at the boundary");
            outside += d0 / rate;
        }
    } else {
        auto at = [&](int i, int j) { return ref.det0[(std::size_t)i * N + j]; };
        for (int k = 0; k < N; ++k) {
            // four boundary faces, decay rate from the adjacent layer
            struct {
                double d0, d1;
            } faces[4] = {{at(0, k), at(1, k)},
                          {at(N - 1, k), at(N - 2, k)},
                          {at(k, 0), at(k, 1)},
                          {at(k, N - 1), at(k, N - 2)}};
            for (auto& f : faces) {
                double rate = std::log(f.d1 / f.d0) / g.h;
                if (rate <= 0) continue;  // corners of flat presets; tiny anyway
                outside += g.h * f.d0 / rate;
            }
        }
    }
    if (outside / ref.mass0 > 1e-6)
        throw DomainError("reference tail outside the box exceeds tolerance; "
                          "increase the half-width L");
}

}  // namespace

ReferenceData build_reference(const ReducedModel& model, const Grid& grid,
                              bool ke_override) {
    if (grid.n != model.n) throw ConfigError("grid dimension does not match model");
    if (ke_override && model.name != "cp1")
        throw ConfigError("the closed-form KE reference exists only for cp1");

    ReferenceData ref;
    ref.model = model;
    ref.grid = grid;
    ref.ke_override = ke_override;
    ref.V = model.volume;
    const int N = grid.N;
    const std::size_t M = grid.size();
    ref.x.resize(N);
    for (int i = 0; i < N; ++i) ref.x[i] = grid.node(i);

    ref.F0.resize(M);
    ref.det0.resize(M);
    ref.a11.resize(M);
    if (grid.n == 2) {
        ref.a22.resize(M);
        ref.a12.resize(M);
    }

    const auto& pts = model.points;
    const std::size_t m = pts.size();
    std::vector<double> E(m), P(m);

    auto fill_node = [&](std::size_t id, double X, double Y) {
        double emax = -1e300;
        for (std::size_t a = 0; a < m; ++a) {
            E[a] = pts[a][0] * X + pts[a][1] * Y;
            emax = std::max(emax, E[a]);
        }
        double S = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            P[a] = std::exp(E[a] - emax);
            S += P[a];
        }
        for (std::size_t a = 0; a < m; ++a) P[a] /= S;
        ref.F0[id] = std::log(S) + emax;
        double mx = 0.0, my = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            mx += P[a] * pts[a][0];
            my += P[a] * pts[a][1];
        }
        if (grid.n == 1) {
            double v = 0.0;
            for (std::size_t a = 0; a < m; ++a) {
                double c = pts[a][0] - mx;
                v += P[a] * c * c;
            }
            ref.a11[id] = v;
            ref.det0[id] = v;
        } else {
            double v11 = 0.0, v22 = 0.0, v12 = 0.0;
            for (std::size_t a = 0; a < m; ++a) {
                double cx = pts[a][0] - mx, cy = pts[a][1] - my;
                v11 += P[a] * cx * cx;
                v22 += P[a] * cy * cy;
                v12 += P[a] * cx * cy;
            }
            ref.a11[id] = v11;
            ref.a22[id] = v22;
            ref.a12[id] = v12;
            // cancellation-free determinant: Cauchy-Binet over point pairs
            double det = 0.0;
            for (std::size_t a = 0; a < m; ++a)
                for (std::size_t b = a + 1; b < m; ++b) {
                    double cax = pts[a][0] - mx, cay = pts[a][1] - my;
                    double cbx = pts[b][0] - mx, cby = pts[b][1] - my;
                    double cr = cax * cby - cay * cbx;
                    det += P[a] * P[b] * cr * cr;
                }
            ref.det0[id] = det;
        }
    };

    if (grid.n == 1) {
        for (int i = 0; i < N; ++i) fill_node(i, ref.x[i], 0.0);
    } else {
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j)
                fill_node((std::size_t)i * N + j, ref.x[i], ref.x[j]);
    }

    if (ke_override) {
        for (int i = 0; i < N; ++i) {
            double ch = std::cosh(ref.x[i] / 2);
            ref.F0[i] = 2.0 * std::log(2.0 * ch);
            ref.a11[i] = 0.5 / (ch * ch);
            ref.det0[i] = ref.a11[i];
        }
    }

    // nodes carrying no resolvable reference mass; the MA ratio there sits
    // below double-precision resolution and is clamped, not evolved
    double dmax = 0.0;
    for (double d : ref.det0) dmax = std::max(dmax, d);
    ref.tail.resize(M);
    for (std::size_t i = 0; i < M; ++i) ref.tail[i] = ref.det0[i] < 1e-5 * dmax;

    // trapezoid weights
    ref.w.resize(M);
    if (grid.n == 1) {
        for (int i = 0; i < N; ++i)
            ref.w[i] = (i == 0 || i == N - 1) ? grid.h / 2 : grid.h;
    } else {
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                double wi = (i == 0 || i == N - 1) ? grid.h / 2 : grid.h;
                double wj = (j == 0 || j == N - 1) ? grid.h / 2 : grid.h;
                ref.w[(std::size_t)i * N + j] = wi * wj;
            }
    }

    {
        std::vector<double> terms(M);
        for (std::size_t i = 0; i < M; ++i) terms[i] = ref.w[i] * std::exp(-ref.F0[i]);
        ref.q_ref = pairwise_sum(terms);
        for (std::size_t i = 0; i < M; ++i) terms[i] = ref.w[i] * ref.det0[i];
        ref.mass0 = pairwise_sum(terms);
    }
    ref.c_ref = std::log(ref.mass0 / ref.q_ref);
    ref.h_ref.resize(M);
    for (std::size_t i = 0; i < M; ++i)
        ref.h_ref[i] = -std::log(ref.det0[i]) - ref.F0[i] + ref.c_ref;

    check_tail_mass(ref);
    return ref;
}

}  // namespace krflow
